#pragma once

#include <string>
#include <vector>

#include "segtrack/gim/gim.hpp"
#include "segtrack/network.hpp"
#include "segtrack/train/synthetic.hpp"

namespace segtrack {

struct TrainingConfig {
    SyntheticConfig synthetic;
    int batch_size = 8;
    int epochs = 10;
    int iterations_per_epoch = 25;  // batch * iterations * epochs pairs in total
    float learning_rate = 1e-3f;
    float decay_factor = 0.2f;
    int decay_interval_epochs = 15;
    int top_k = 3;
    GimCaps gim_caps{500, 1000};
    double perturbation_fraction = 0.125;  // location jitter as fraction of target size
    double divergence_factor = 10.0;       // abort when loss exceeds this times the initial loss
    int validation_samples = 24;           // from the held-out tenth of the seed stream
    unsigned seed = 7;
    bool overfit = false;  // train repeatedly on one fixed pair
    int overfit_steps = 500;
    std::string loss_csv_path;  // per-iteration loss log, empty to disable
    bool verbose = false;
};

// Scaled-up schedule matching the original training regime.
TrainingConfig paper_scale_config();

// Per-axis uniform jitter in [-fraction*w, fraction*w] x [-fraction*h, fraction*h]
// applied to the ground-truth center when building the location channel.
Eigen::Vector2d sample_location_jitter(std::mt19937& rng, double w, double h, double fraction);

struct TrainingResult {
    std::vector<double> loss_curve;            // mean loss per optimizer step
    std::vector<double> validation_curve;      // before training, then once per epoch
    double initial_loss = 0, final_loss = 0;
    bool diverged = false;
    std::string divergence_note;
};

// Optimizes the feature-adjust and refinement weights on procedural pairs.
// The matching-model vectors built from the train frame are held constant in
// the backward pass; gradients flow through the test-frame branch only.
TrainingResult train_network(NetworkWeights& weights, const TrainingConfig& config);

}  // namespace segtrack
