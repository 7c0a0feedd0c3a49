#include "segtrack/tracker/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace segtrack {

namespace {

// Inverse warp of a crop-resolution mask back to frame coordinates.
Mask mask_to_frame(const SearchRegion& region, const Mask& crop_mask) {
    Mask out = Mask::Zero(region.frame_h, region.frame_w);
    const int S = static_cast<int>(crop_mask.rows());
    const int x0 = std::max(0, static_cast<int>(std::floor(region.frame_x(0))));
    const int x1 = std::min(region.frame_w - 1, static_cast<int>(std::ceil(region.frame_x(S - 1))));
    const int y0 = std::max(0, static_cast<int>(std::floor(region.frame_y(0))));
    const int y1 = std::min(region.frame_h - 1, static_cast<int>(std::ceil(region.frame_y(S - 1))));
    for (int fy = y0; fy <= y1; ++fy)
        for (int fx = x0; fx <= x1; ++fx) {
            const int u = static_cast<int>(std::lround(region.crop_u(fx + 0.5)));
            const int v = static_cast<int>(std::lround(region.crop_v(fy + 0.5)));
            if (u >= 0 && u < S && v >= 0 && v < S && crop_mask(v, u)) out(fy, fx) = 1;
        }
    return out;
}

std::pair<int, int> grid_centroid(const Mask& grid_mask) {
    double sy = 0, sx = 0;
    long n = 0;
    for (int y = 0; y < grid_mask.rows(); ++y)
        for (int x = 0; x < grid_mask.cols(); ++x)
            if (grid_mask(y, x)) {
                sy += y;
                sx += x;
                ++n;
            }
    if (n == 0) return {static_cast<int>(grid_mask.rows()) / 2, static_cast<int>(grid_mask.cols()) / 2};
    return {static_cast<int>(std::lround(sy / n)), static_cast<int>(std::lround(sx / n))};
}

RotatedBox box_from_mask_bounds(const Mask& mask) { return min_max_box(mask); }

}  // namespace

RotatedBox clamp_box_to_frame(const RotatedBox& box, int frame_w, int frame_h) {
    RotatedBox b = box;
    b.cx = std::clamp(b.cx, 0.0, static_cast<double>(frame_w - 1));
    b.cy = std::clamp(b.cy, 0.0, static_cast<double>(frame_h - 1));
    double scale = 1.0;
    for (const auto& corner : b.corners()) {
        const Eigen::Vector2d o = corner - Eigen::Vector2d(b.cx, b.cy);
        for (int k = 0; k < 2; ++k) {
            const double lo = 0.0, hi = k == 0 ? frame_w - 1 : frame_h - 1;
            const double c = k == 0 ? b.cx : b.cy;
            if (o[k] > 1e-12) scale = std::min(scale, (hi - c) / o[k]);
            if (o[k] < -1e-12) scale = std::min(scale, (lo - c) / o[k]);
        }
    }
    scale = std::max(scale, 0.0);
    b.s_major *= scale;
    b.s_minor *= scale;
    return b;
}

Tracker::Tracker(const NetworkWeights& weights, TrackerConfig config)
    : weights_(weights), config_(config), rng_(config.seed) {}

Tensor<float> Tracker::segment(const ComputedFeatures& features, int loc_row, int loc_col) {
    auto channels = similarity_channels(features.match_features, gim_);
    Tensor<float> L = location_channel<float>(loc_row, loc_col, kGridSize, kGridSize);
    if (config_.drop_L) L.set_zero();
    if (config_.drop_F) channels.F.set_zero();
    if (config_.drop_P) channels.P.set_zero();
    return refine_forward(L, channels.F, channels.P, features.pyramid.levels[1],
                          features.pyramid.levels[0], weights_.refine);
}

void Tracker::initialize(const Tensor<float>& frame, const Mask& ground_truth_mask) {
    if (foreground_count(ground_truth_mask) == 0)
        throw std::invalid_argument("Tracker::initialize: empty ground-truth mask");
    // the mask is approximated by its tight axis-aligned rectangle
    const RotatedBox bounds = box_from_mask_bounds(ground_truth_mask);
    center_x_ = bounds.cx;
    center_y_ = bounds.cy;
    size_w_ = std::max(1.0, bounds.angle == 0.0 ? bounds.s_major : bounds.s_minor);
    size_h_ = std::max(1.0, bounds.angle == 0.0 ? bounds.s_minor : bounds.s_major);

    const SearchRegion region = extract_search_region(frame, center_x_, center_y_, size_w_, size_h_);
    const ComputedFeatures features = compute_feature_pyramid(region, weights_.adjust);
    const Mask grid_mask =
        downsample_mask_majority(warp_mask_to_crop(region, ground_truth_mask), kModelStride);
    if (foreground_count(grid_mask) == 0)
        throw std::runtime_error("Tracker::initialize: target vanishes at model resolution");

    gim_ = build_gim_model(features.match_features, grid_mask, config_.top_k, config_.gim_caps,
                           rng_);
    DcfConfig<float> dcf_cfg;
    dcf_cfg.lambda = config_.dcf_lambda;
    const double extent_cells = std::sqrt(size_w_ * size_h_) / region.scale / kModelStride;
    dcf_cfg.label_sigma = std::max(0.5f, config_.dcf_sigma_factor * static_cast<float>(extent_cells));
    dcf_cfg.update_rate = config_.dcf_update_rate;
    const auto [cy, cx] = grid_centroid(grid_mask);
    dcf_ = train_dcf(features.reduced, cy, cx, dcf_cfg);

    last_box_ = bounds;
    initialized_ = true;
    lost_ = false;
}

void Tracker::initialize(const Tensor<float>& frame, const RotatedBox& ground_truth_box) {
    if (!(ground_truth_box.s_major > 0) || !(ground_truth_box.s_minor > 0))
        throw std::invalid_argument("Tracker::initialize: degenerate box");
    // rasterize the box as a provisional mask, run one segmentation pass on
    // the initialization region to infer a proxy mask, then rebuild the model
    const int H = frame.dim(1), W = frame.dim(2);
    Mask boot = Mask::Zero(H, W);
    {
        const Eigen::Vector2d c(ground_truth_box.cx, ground_truth_box.cy);
        const Eigen::Vector2d u(std::cos(ground_truth_box.angle), std::sin(ground_truth_box.angle));
        const Eigen::Vector2d v(-u.y(), u.x());
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const Eigen::Vector2d p = Eigen::Vector2d(x, y) - c;
                if (std::abs(p.dot(u)) <= ground_truth_box.s_major / 2 &&
                    std::abs(p.dot(v)) <= ground_truth_box.s_minor / 2)
                    boot(y, x) = 1;
            }
    }
    if (foreground_count(boot) == 0)
        throw std::invalid_argument("Tracker::initialize: box outside frame");
    initialize(frame, boot);  // bootstrap GIM/DCF from the in-box mask

    // one proxy-mask iteration
    const SearchRegion region = extract_search_region(frame, center_x_, center_y_, size_w_, size_h_);
    const ComputedFeatures features = compute_feature_pyramid(region, weights_.adjust);
    const auto response = apply_dcf(dcf_, features.reduced);
    const Tensor<float> prob = segment(features, response.argmax_row, response.argmax_col);
    if (const auto crop_mask = binarize_largest_component(prob)) {
        const Mask grid_mask = downsample_mask_majority(*crop_mask, kModelStride);
        if (foreground_count(grid_mask) > 0 &&
            foreground_count(grid_mask) < grid_mask.size()) {
            gim_ = build_gim_model(features.match_features, grid_mask, config_.top_k,
                                   config_.gim_caps, rng_);
        }
    }
}

FrameResult Tracker::track(const Tensor<float>& frame) {
    if (!initialized_) throw std::logic_error("Tracker::track: not initialized");
    const SearchRegion region = extract_search_region(frame, center_x_, center_y_, size_w_, size_h_);
    const ComputedFeatures features = compute_feature_pyramid(region, weights_.adjust);
    const auto response = apply_dcf(dcf_, features.reduced);
    const Tensor<float> prob = segment(features, response.argmax_row, response.argmax_col);

    FrameResult result;
    const auto crop_mask = binarize_largest_component(prob);
    if (!crop_mask) {
        lost_ = true;
        result.lost = true;
        result.mask = Mask::Zero(frame.dim(1), frame.dim(2));
        result.box = last_box_;
        return result;
    }
    lost_ = false;

    RotatedBox crop_box;
    switch (config_.box_variant) {
        case BoxVariant::kIouMod: crop_box = fit_rotated_box(*crop_mask, config_.boxfit); break;
        case BoxVariant::kMinArea: crop_box = min_area_box(*crop_mask); break;
        case BoxVariant::kMinMax: crop_box = min_max_box(*crop_mask); break;
    }

    // back to frame coordinates
    result.mask = mask_to_frame(region, *crop_mask);
    RotatedBox frame_box = crop_box;
    frame_box.cx = region.frame_x(crop_box.cx);
    frame_box.cy = region.frame_y(crop_box.cy);
    frame_box.s_major = crop_box.s_major * region.scale;
    frame_box.s_minor = crop_box.s_minor * region.scale;
    frame_box = clamp_box_to_frame(frame_box, region.frame_w, region.frame_h);
    result.box = frame_box;

    // state update
    center_x_ = frame_box.cx;
    center_y_ = frame_box.cy;
    const double w_new = std::max(4.0, frame_box.s_major);
    const double h_new = std::max(4.0, frame_box.s_minor);
    const double s = config_.size_smoothing;
    size_w_ = (1 - s) * size_w_ + s * w_new;
    size_h_ = (1 - s) * size_h_ + s * h_new;

    // DCF update at the position estimated from the final segmentation
    std::pair<int, int> update_pos;
    if (config_.self_update_dcf) {
        update_pos = {response.argmax_row, response.argmax_col};
    } else if (test_segmentation_center_override) {
        update_pos = *test_segmentation_center_override;
    } else {
        update_pos = grid_centroid(downsample_mask_majority(*crop_mask, kModelStride));
    }
    update_dcf(dcf_, features.reduced, update_pos.first, update_pos.second,
               config_.dcf_update_rate);

    last_box_ = frame_box;
    return result;
}

}  // namespace segtrack
