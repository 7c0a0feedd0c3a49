#pragma once

#include <random>
#include <utility>
#include <vector>

#include "segtrack/core/mask.hpp"
#include "segtrack/core/tensor.hpp"

namespace segtrack {

struct SyntheticConfig {
    int frame_w = 320;
    int frame_h = 320;
    int num_frames = 60;
    double target_radius = 34;       // base radius, pixels
    double deform_amplitude = 0.14;  // relative radial deformation
    double translation_speed = 3.0;  // pixels per frame
    double rotation_speed = 0.04;    // radians per frame
    double scale_amplitude = 0.12;   // relative slow scale oscillation
    bool distractor = true;
    int pair_range = 50;  // max frame distance of a training pair
};

// Procedural scene: textured deformable blob over a textured background with
// an optional distractor blob. All parameters derive from the seed.
struct SceneParams {
    SyntheticConfig config;
    double start_x = 0, start_y = 0;
    double vel_x = 0, vel_y = 0;
    double base_radius = 0;
    double rotation_phase = 0;
    std::vector<double> lobe_amp, lobe_phase, lobe_rate;  // radial harmonics
    Eigen::Vector3f target_color, background_color, distractor_color;
    unsigned texture_seed = 0;
    double distractor_x = 0, distractor_y = 0, distractor_vx = 0, distractor_vy = 0;
    double distractor_radius = 0;
};

SceneParams make_scene(unsigned seed, const SyntheticConfig& config = {});

struct RenderedFrame {
    Tensor<float> image;  // [3,H,W]
    Mask mask;
    double center_x = 0, center_y = 0;
};

RenderedFrame render_frame(const SceneParams& scene, int frame_index);

struct SyntheticSequence {
    std::vector<Tensor<float>> frames;
    std::vector<Mask> masks;
    unsigned seed = 0;
};

SyntheticSequence generate_synthetic_sequence(unsigned seed, const SyntheticConfig& config = {});

// Training pair drawn from one procedural sequence, frame indices at most
// pair_range apart.
struct TrainingSample {
    Tensor<float> train_frame, test_frame;
    Mask train_mask, test_mask;
    int train_index = 0, test_index = 0;
};

TrainingSample generate_synthetic_sample(unsigned seed, const SyntheticConfig& config = {});

}  // namespace segtrack
