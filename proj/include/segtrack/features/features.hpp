#pragma once

#include <string>
#include <vector>

#include "segtrack/core/mask.hpp"
#include "segtrack/core/tensor.hpp"
#include "segtrack/nn/layers.hpp"

namespace segtrack {

inline constexpr int kCropSize = 384;
inline constexpr int kModelStride = 8;
inline constexpr int kGridSize = kCropSize / kModelStride;  // 48
inline constexpr int kBaseChannels = 13;  // RGB, gx, gy, 8 orientation bins
inline constexpr int kReducedChannels = 64;

// Square crop around the target, resampled to kCropSize with edge
// replication. Records the crop-to-frame mapping.
struct SearchRegion {
    Tensor<float> crop;  // [3, kCropSize, kCropSize]
    double center_x = 0, center_y = 0;  // frame pixels
    double scale = 1;                   // frame pixels per crop pixel
    int frame_w = 0, frame_h = 0;

    // crop pixel-center (u,v) -> frame coordinates
    double frame_x(double u) const { return center_x + (u + 0.5 - crop.dim(2) / 2.0) * scale; }
    double frame_y(double v) const { return center_y + (v + 0.5 - crop.dim(1) / 2.0) * scale; }
    // frame coordinates -> crop pixel coordinates
    double crop_u(double fx) const { return (fx - center_x) / scale + crop.dim(2) / 2.0 - 0.5; }
    double crop_v(double fy) const { return (fy - center_y) / scale + crop.dim(1) / 2.0 - 0.5; }
};

// Crop side in frame pixels is 4*sqrt(w*h).
SearchRegion extract_search_region(const Tensor<float>& frame, double center_x, double center_y,
                                   double target_w, double target_h, int crop_size = kCropSize);

// Nearest-neighbor warp of a frame-resolution mask into crop coordinates.
Mask warp_mask_to_crop(const SearchRegion& region, const Mask& frame_mask);

// Hand-crafted per-pixel channels: RGB, grayscale gradients gx/gy and an
// 8-bin soft gradient-orientation histogram (magnitude weighted).
Tensor<float> base_channels(const Tensor<float>& image);

struct FeaturePyramid {
    std::vector<Tensor<float>> levels;  // strides 2, 4, 8 relative to the crop
    std::vector<int> strides{2, 4, 8};
};

FeaturePyramid compute_pyramid_levels(const Tensor<float>& base);

// Trainable feature adjustment: 1x1 reduction to 64 channels shared by both
// pathways, then the 3x3 layer feeding the matching branch.
struct FeatureAdjustLayers {
    LayerParams<float> reduce1x1 = LayerParams<float>::conv(kReducedChannels, kBaseChannels, 1);
    LayerParams<float> match3x3 = LayerParams<float>::conv(kReducedChannels, kReducedChannels, 3);
};

struct ComputedFeatures {
    FeaturePyramid pyramid;
    Tensor<float> reduced;        // [64,48,48] after 1x1 + ReLU
    Tensor<float> match_features;  // [64,48,48] after 3x3 + ReLU
    // pre-activation caches for the training backward pass
    Tensor<float> stride8_base;
    Tensor<float> pre_relu_reduced;
    Tensor<float> pre_relu_match;
};

ComputedFeatures compute_feature_pyramid(const SearchRegion& region,
                                         const FeatureAdjustLayers& layers);

// Backward through the 3x3/1x1 adjustment stack; accumulates layer gradients.
void feature_adjust_backward(const ComputedFeatures& cache, const Tensor<float>& grad_match_features,
                             FeatureAdjustLayers& layers);

// Precomputed-feature ingestion: each file is a single-entry container in the
// checkpoint byte layout holding one pyramid level.
FeaturePyramid load_pyramid_from_files(const std::vector<std::string>& level_paths);

}  // namespace segtrack
