#include "segtrack/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>

#include "segtrack/gem/dcf.hpp"
#include "segtrack/gim/gim.hpp"
#include "segtrack/nn/adam.hpp"
#include "segtrack/refine/refine.hpp"

namespace segtrack {

namespace {

uint32_t mix_seed(uint32_t a, uint32_t b) {
    uint64_t z = (static_cast<uint64_t>(a) << 32) | (b + 0x9E3779B9u);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return static_cast<uint32_t>(z ^ (z >> 31));
}

struct Bounds {
    double cx = 0, cy = 0, w = 0, h = 0;
    bool ok = false;
};

Bounds mask_bounds(const Mask& mask) {
    int minx = 1 << 30, miny = 1 << 30, maxx = -1, maxy = -1;
    for (int y = 0; y < mask.rows(); ++y)
        for (int x = 0; x < mask.cols(); ++x)
            if (mask(y, x)) {
                minx = std::min(minx, x);
                maxx = std::max(maxx, x);
                miny = std::min(miny, y);
                maxy = std::max(maxy, y);
            }
    Bounds b;
    if (maxx < 0) return b;
    b.cx = 0.5 * (minx + maxx);
    b.cy = 0.5 * (miny + maxy);
    b.w = maxx - minx + 1;
    b.h = maxy - miny + 1;
    b.ok = b.w >= 4 && b.h >= 4;
    return b;
}

// One forward (and optionally backward) pass over a train/test pair. Returns
// the loss, or nothing when the pair is degenerate at model resolution.
std::optional<double> run_sample(NetworkWeights& weights, const TrainingConfig& cfg,
                                 const TrainingSample& sample, std::mt19937& rng, bool backward,
                                 float grad_scale) {
    const Bounds tb = mask_bounds(sample.train_mask);
    if (!tb.ok) return std::nullopt;
    const SearchRegion train_region =
        extract_search_region(sample.train_frame, tb.cx, tb.cy, tb.w, tb.h);
    const ComputedFeatures train_feats = compute_feature_pyramid(train_region, weights.adjust);
    const Mask grid_mask =
        downsample_mask_majority(warp_mask_to_crop(train_region, sample.train_mask), kModelStride);
    const long fg = foreground_count(grid_mask);
    if (fg == 0 || fg == grid_mask.size()) return std::nullopt;
    const GimModel<float> gim =
        build_gim_model(train_feats.match_features, grid_mask, cfg.top_k, cfg.gim_caps, rng);

    const Bounds qb = mask_bounds(sample.test_mask);
    if (!qb.ok) return std::nullopt;
    const SearchRegion test_region =
        extract_search_region(sample.test_frame, qb.cx, qb.cy, qb.w, qb.h);
    ComputedFeatures test_feats = compute_feature_pyramid(test_region, weights.adjust);

    // location channel centered at the jittered ground-truth position
    const Eigen::Vector2d jitter =
        sample_location_jitter(rng, qb.w, qb.h, cfg.perturbation_fraction);
    const double px = qb.cx + jitter.x(), py = qb.cy + jitter.y();
    const auto to_cell = [](double crop_coord) {
        return std::clamp(static_cast<int>(std::floor((crop_coord + 0.5) / kModelStride)), 0,
                          kGridSize - 1);
    };
    const int cell_x = to_cell(test_region.crop_u(px));
    const int cell_y = to_cell(test_region.crop_v(py));

    GimChannels<float> ch = similarity_channels(test_feats.match_features, gim);
    const Tensor<float> L = location_channel<float>(cell_y, cell_x, kGridSize, kGridSize);

    RefineCache<float> cache;
    const Tensor<float> prob =
        refine_forward(L, ch.F, ch.P, test_feats.pyramid.levels[1], test_feats.pyramid.levels[0],
                       weights.refine, backward ? &cache : nullptr);
    const Mask target = warp_mask_to_crop(test_region, sample.test_mask);

    Tensor<float> grad_logits;
    const double loss = crossentropy_loss(prob, target, backward ? &grad_logits : nullptr);
    if (backward) {
        grad_logits.array() *= grad_scale;
        const RefineInputGrads<float> g = refine_backward(cache, grad_logits, weights.refine);
        const Tensor<float> grad_feats =
            gim_backward(ch, gim, g.grad_F, g.grad_P, kGridSize, kGridSize);
        feature_adjust_backward(test_feats, grad_feats, weights.adjust);
    }
    return loss;
}

}  // namespace

Eigen::Vector2d sample_location_jitter(std::mt19937& rng, double w, double h, double fraction) {
    std::uniform_real_distribution<double> jx(-fraction * w, fraction * w);
    std::uniform_real_distribution<double> jy(-fraction * h, fraction * h);
    const double x = jx(rng);
    return {x, jy(rng)};
}

TrainingConfig paper_scale_config() {
    TrainingConfig cfg;
    cfg.batch_size = 64;
    cfg.epochs = 40;
    cfg.iterations_per_epoch = 1000;
    cfg.gim_caps = GimCaps{1000, 2000};
    return cfg;
}

TrainingResult train_network(NetworkWeights& weights, const TrainingConfig& config) {
    TrainingResult result;
    AdamConfig<float> adam_cfg;
    adam_cfg.learning_rate = config.learning_rate;
    adam_cfg.decay_factor = config.decay_factor;
    adam_cfg.decay_interval_epochs = config.decay_interval_epochs;
    AdamOptimizer<float> optimizer(adam_cfg);
    for (auto& [name, params] : weights.layers()) {
        (void)name;
        optimizer.attach(params);
    }

    std::mt19937 rng(config.seed ^ 0xC0FFEEu);

    // one deterministic seed stream; every tenth seed is held out for
    // validation, the rest feed training
    uint64_t train_cursor = 0;
    const auto next_seed = [&](uint64_t& cursor, bool validation) {
        while (true) {
            const uint32_t s = mix_seed(config.seed, static_cast<uint32_t>(cursor++));
            if ((s % 10 == 0) == validation) return s;
        }
    };

    const int batch = config.overfit ? 1 : std::max(1, config.batch_size);
    const int epochs = config.overfit ? 1 : std::max(1, config.epochs);
    const int iters = config.overfit ? config.overfit_steps : std::max(1, config.iterations_per_epoch);

    std::optional<TrainingSample> fixed_sample;
    if (config.overfit) {
        for (int attempt = 0; attempt < 100 && !fixed_sample; ++attempt) {
            TrainingSample s =
                generate_synthetic_sample(next_seed(train_cursor, false), config.synthetic);
            std::mt19937 probe(config.seed);
            if (run_sample(weights, config, s, probe, false, 1.0f)) fixed_sample = std::move(s);
        }
        if (!fixed_sample) throw std::runtime_error("train_network: no usable pair found");
    }

    const auto validate = [&]() {
        uint64_t cursor = 0;
        std::mt19937 vrng(config.seed ^ 0x7EA5EDu);
        double sum = 0;
        int n = 0;
        for (int i = 0; i < config.validation_samples; ++i) {
            const TrainingSample s =
                generate_synthetic_sample(next_seed(cursor, true), config.synthetic);
            if (const auto l = run_sample(weights, config, s, vrng, false, 1.0f)) {
                sum += *l;
                ++n;
            }
        }
        return n > 0 ? sum / n : 0.0;
    };

    std::ofstream csv;
    if (!config.loss_csv_path.empty()) {
        csv.open(config.loss_csv_path);
        csv << "epoch,iteration,loss\n";
    }

    if (!config.overfit) result.validation_curve.push_back(validate());

    const float grad_scale = 1.0f / static_cast<float>(batch);
    for (int epoch = 0; epoch < epochs; ++epoch) {
        optimizer.set_epoch(epoch);
        double epoch_loss = 0;
        for (int it = 0; it < iters; ++it) {
            optimizer.zero_grad();
            double batch_loss = 0;
            int n = 0, attempts = 0;
            while (n < batch && attempts < batch + 100) {
                ++attempts;
                std::optional<double> l;
                if (config.overfit) {
                    l = run_sample(weights, config, *fixed_sample, rng, true, grad_scale);
                } else {
                    const TrainingSample s =
                        generate_synthetic_sample(next_seed(train_cursor, false), config.synthetic);
                    l = run_sample(weights, config, s, rng, true, grad_scale);
                }
                if (!l) continue;
                batch_loss += *l;
                ++n;
            }
            if (n == 0) throw std::runtime_error("train_network: no usable pairs in batch");
            batch_loss /= n;
            optimizer.step();
            result.loss_curve.push_back(batch_loss);
            epoch_loss += batch_loss;
            if (result.loss_curve.size() == 1) result.initial_loss = batch_loss;
            if (csv.is_open()) csv << epoch << ',' << it << ',' << batch_loss << '\n';
            if (!std::isfinite(batch_loss) ||
                batch_loss > config.divergence_factor * std::max(result.initial_loss, 1e-6)) {
                result.diverged = true;
                result.divergence_note = "loss " + std::to_string(batch_loss) + " at epoch " +
                                         std::to_string(epoch) + " iteration " + std::to_string(it) +
                                         " exceeds " + std::to_string(config.divergence_factor) +
                                         "x initial " + std::to_string(result.initial_loss);
                result.final_loss = batch_loss;
                return result;
            }
        }
        if (!config.overfit) result.validation_curve.push_back(validate());
        if (config.verbose) {
            std::cout << "epoch " << epoch << " mean loss " << epoch_loss / iters;
            if (!config.overfit) std::cout << " val " << result.validation_curve.back();
            std::cout << std::endl;
        }
    }
    result.final_loss = result.loss_curve.empty() ? 0.0 : result.loss_curve.back();
    return result;
}

}  // namespace segtrack
