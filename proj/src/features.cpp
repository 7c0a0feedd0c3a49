#include "segtrack/features/features.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "segtrack/core/checkpoint.hpp"

namespace segtrack {

namespace {

float sample_bilinear_clamped(const Tensor<float>& img, int c, double y, double x) {
    const int H = img.dim(1), W = img.dim(2);
    const auto clampi = [](int v, int hi) { return v < 0 ? 0 : (v > hi ? hi : v); };
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const double wx = x - x0, wy = y - y0;
    const int xa = clampi(x0, W - 1), xb = clampi(x0 + 1, W - 1);
    const int ya = clampi(y0, H - 1), yb = clampi(y0 + 1, H - 1);
    return static_cast<float>((1 - wy) * ((1 - wx) * img(c, ya, xa) + wx * img(c, ya, xb)) +
                              wy * ((1 - wx) * img(c, yb, xa) + wx * img(c, yb, xb)));
}

Tensor<float> average_pool(const Tensor<float>& input, int stride) {
    const int C = input.dim(0), H = input.dim(1), W = input.dim(2);
    const int oh = H / stride, ow = W / stride;
    Tensor<float> out({C, oh, ow});
    const float inv = 1.0f / static_cast<float>(stride * stride);
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                float s = 0;
                for (int dy = 0; dy < stride; ++dy)
                    for (int dx = 0; dx < stride; ++dx)
                        s += input(c, y * stride + dy, x * stride + dx);
                out(c, y, x) = s * inv;
            }
    return out;
}

}  // namespace

SearchRegion extract_search_region(const Tensor<float>& frame, double center_x, double center_y,
                                   double target_w, double target_h, int crop_size) {
    if (!(target_w > 0) || !(target_h > 0))
        throw std::invalid_argument("extract_search_region: degenerate target size");
    const double side = 4.0 * std::sqrt(target_w * target_h);
    SearchRegion region;
    region.center_x = center_x;
    region.center_y = center_y;
    region.scale = side / crop_size;
    region.frame_w = frame.dim(2);
    region.frame_h = frame.dim(1);
    region.crop = Tensor<float>({3, crop_size, crop_size});
    for (int v = 0; v < crop_size; ++v) {
        const double fy = region.frame_y(v) - 0.5;  // pixel-center to array coords
        for (int u = 0; u < crop_size; ++u) {
            const double fx = region.frame_x(u) - 0.5;
            for (int c = 0; c < 3; ++c)
                region.crop(c, v, u) = sample_bilinear_clamped(frame, c, fy, fx);
        }
    }
    return region;
}

Mask warp_mask_to_crop(const SearchRegion& region, const Mask& frame_mask) {
    const int S = region.crop.dim(1);
    Mask out(S, S);
    for (int v = 0; v < S; ++v)
        for (int u = 0; u < S; ++u) {
            const int fx = static_cast<int>(std::lround(region.frame_x(u) - 0.5));
            const int fy = static_cast<int>(std::lround(region.frame_y(v) - 0.5));
            out(v, u) = (fx >= 0 && fx < frame_mask.cols() && fy >= 0 && fy < frame_mask.rows() &&
                         frame_mask(fy, fx))
                            ? 1
                            : 0;
        }
    return out;
}

Tensor<float> base_channels(const Tensor<float>& image) {
    const int H = image.dim(1), W = image.dim(2);
    Tensor<float> out({kBaseChannels, H, W});
    for (int c = 0; c < 3; ++c) out.channel(c) = image.channel(c);

    Eigen::MatrixXf gray =
        ((image.channel(0) + image.channel(1) + image.channel(2)) / 3.0f).eval();
    constexpr int kBins = 8;
    constexpr float kTwoPi = 2.0f * std::numbers::pi_v<float>;
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const int xm = x > 0 ? x - 1 : 0, xp = x < W - 1 ? x + 1 : W - 1;
            const int ym = y > 0 ? y - 1 : 0, yp = y < H - 1 ? y + 1 : H - 1;
            const float gx = 0.5f * (gray(y, xp) - gray(y, xm));
            const float gy = 0.5f * (gray(yp, x) - gray(ym, x));
            out(3, y, x) = gx;
            out(4, y, x) = gy;
            const float mag = std::sqrt(gx * gx + gy * gy);
            if (mag > 1e-8f) {
                float angle = std::atan2(gy, gx);
                if (angle < 0) angle += kTwoPi;
                const float pos = angle / kTwoPi * kBins;
                const int b0 = static_cast<int>(pos) % kBins;
                const int b1 = (b0 + 1) % kBins;
                const float w1 = pos - std::floor(pos);
                out(5 + b0, y, x) += mag * (1.0f - w1);
                out(5 + b1, y, x) += mag * w1;
            }
        }
    }
    return out;
}

FeaturePyramid compute_pyramid_levels(const Tensor<float>& base) {
    FeaturePyramid pyr;
    for (int stride : pyr.strides) pyr.levels.push_back(average_pool(base, stride));
    return pyr;
}

ComputedFeatures compute_feature_pyramid(const SearchRegion& region,
                                         const FeatureAdjustLayers& layers) {
    ComputedFeatures f;
    const Tensor<float> base = base_channels(region.crop);
    f.pyramid = compute_pyramid_levels(base);
    f.stride8_base = f.pyramid.levels.back();
    f.pre_relu_reduced = conv2d(f.stride8_base, layers.reduce1x1);
    f.reduced = relu(f.pre_relu_reduced);
    f.pre_relu_match = conv2d(f.reduced, layers.match3x3);
    f.match_features = relu(f.pre_relu_match);
    return f;
}

void feature_adjust_backward(const ComputedFeatures& cache, const Tensor<float>& grad_match_features,
                             FeatureAdjustLayers& layers) {
    Tensor<float> g = relu_backward(cache.pre_relu_match, grad_match_features);
    g = conv2d_backward(cache.reduced, g, layers.match3x3);
    g = relu_backward(cache.pre_relu_reduced, g);
    conv2d_backward(cache.stride8_base, g, layers.reduce1x1);
}

FeaturePyramid load_pyramid_from_files(const std::vector<std::string>& level_paths) {
    FeaturePyramid pyr;
    pyr.strides.clear();
    for (const auto& path : level_paths) {
        const auto entries = read_checkpoint(path);
        if (entries.size() != 1)
            throw std::runtime_error("feature file must hold exactly one tensor: " + path);
        pyr.levels.push_back(from_entry<float>(entries.front()));
        pyr.strides.push_back(kCropSize / pyr.levels.back().dim(1));
    }
    return pyr;
}

}  // namespace segtrack
