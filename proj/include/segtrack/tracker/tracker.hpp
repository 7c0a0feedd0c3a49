#pragma once

#include <optional>
#include <random>
#include <utility>

#include "segtrack/boxfit/boxfit.hpp"
#include "segtrack/core/mask.hpp"
#include "segtrack/gem/dcf.hpp"
#include "segtrack/gim/gim.hpp"
#include "segtrack/network.hpp"

namespace segtrack {

enum class BoxVariant { kIouMod, kMinArea, kMinMax };

struct TrackerConfig {
    int top_k = 3;
    GimCaps gim_caps;
    float dcf_lambda = 1e-2f;
    float dcf_sigma_factor = 0.1f;  // label sigma = factor * target extent in grid cells
    float dcf_update_rate = 0.1f;
    double size_smoothing = 0.4;  // weight of the new size estimate
    BoxVariant box_variant = BoxVariant::kIouMod;
    BoxFitConfig boxfit;
    // ablation toggles
    bool drop_F = false;
    bool drop_P = false;
    bool drop_L = false;
    bool self_update_dcf = false;  // update the DCF at its own argmax
    unsigned seed = 1234;
};

struct FrameResult {
    Mask mask;       // frame-resolution binary mask
    RotatedBox box;  // frame coordinates
    bool lost = false;
};

// Online tracker: one instance per target, state updated once per frame.
class Tracker {
public:
    Tracker(const NetworkWeights& weights, TrackerConfig config = {});

    void initialize(const Tensor<float>& frame, const Mask& ground_truth_mask);
    void initialize(const Tensor<float>& frame, const RotatedBox& ground_truth_box);

    FrameResult track(const Tensor<float>& frame);

    bool initialized() const { return initialized_; }
    bool lost() const { return lost_; }
    double center_x() const { return center_x_; }
    double center_y() const { return center_y_; }
    const GimModel<float>& gim() const { return gim_; }
    const CorrelationFilter<float>& dcf() const { return dcf_; }

    // test seam: forces the segmentation-estimated DCF update position
    std::optional<std::pair<int, int>> test_segmentation_center_override;

private:
    Tensor<float> segment(const ComputedFeatures& features, int loc_row, int loc_col);

    const NetworkWeights& weights_;
    TrackerConfig config_;
    std::mt19937 rng_;

    GimModel<float> gim_;
    CorrelationFilter<float> dcf_;
    double center_x_ = 0, center_y_ = 0;
    double size_w_ = 0, size_h_ = 0;
    RotatedBox last_box_;
    bool initialized_ = false;
    bool lost_ = false;
};

// Shrinks/recentres a box so all corners lie within [0,w-1]x[0,h-1].
RotatedBox clamp_box_to_frame(const RotatedBox& box, int frame_w, int frame_h);

}  // namespace segtrack
