#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <stdexcept>
#include <vector>

#include "segtrack/core/tensor.hpp"

namespace segtrack {

// Trainable convolution parameters with their gradient buffers.
// Weights are laid out [C_out, C_in, k, k], bias [C_out].
template <typename Scalar>
struct LayerParams {
    Tensor<Scalar> weights;
    Tensor<Scalar> bias;
    Tensor<Scalar> grad_weights;
    Tensor<Scalar> grad_bias;

    static LayerParams conv(int out_channels, int in_channels, int kernel_size) {
        LayerParams p;
        p.weights = Tensor<Scalar>({out_channels, in_channels, kernel_size, kernel_size});
        p.bias = Tensor<Scalar>({out_channels});
        p.grad_weights = Tensor<Scalar>(p.weights.shape());
        p.grad_bias = Tensor<Scalar>(p.bias.shape());
        return p;
    }

    int out_channels() const { return weights.dim(0); }
    int in_channels() const { return weights.dim(1); }
    int kernel_size() const { return weights.dim(2); }

    void zero_grad() {
        grad_weights.set_zero();
        grad_bias.set_zero();
    }
};

// Kaiming fan-in initialization, zero bias.
template <typename Scalar, typename Rng>
void kaiming_init(LayerParams<Scalar>& p, Rng& rng) {
    const int fan_in = p.in_channels() * p.kernel_size() * p.kernel_size();
    const double stddev = std::sqrt(2.0 / fan_in);
    std::normal_distribution<double> dist(0.0, stddev);
    for (Eigen::Index i = 0; i < p.weights.size(); ++i)
        p.weights[i] = static_cast<Scalar>(dist(rng));
    p.bias.set_zero();
}

namespace detail {

// Fills `cols` (C_in*k*k x band_h*W) with the im2col patch matrix for output
// rows [y0, y0+band_h) of a zero-padded stride-1 convolution.
template <typename Scalar>
void im2col_band(const Tensor<Scalar>& input, int k, int y0, int band_h,
                 Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>& cols) {
    const int C = input.dim(0), H = input.dim(1), W = input.dim(2);
    const int pad = k / 2;
    cols.setZero(C * k * k, static_cast<Eigen::Index>(band_h) * W);
    for (int c = 0; c < C; ++c) {
        for (int dy = 0; dy < k; ++dy) {
            for (int dx = 0; dx < k; ++dx) {
                const int row = (c * k + dy) * k + dx;
                Scalar* dst_base = cols.data() + static_cast<Eigen::Index>(row) * band_h * W;
                for (int y = 0; y < band_h; ++y) {
                    const int sy = y0 + y + dy - pad;
                    if (sy < 0 || sy >= H) continue;
                    // destination x range where sx = x + dx - pad is valid
                    const int x_lo = std::max(0, pad - dx);
                    const int x_hi = std::min(W, W + pad - dx);
                    if (x_lo >= x_hi) continue;
                    const Scalar* src = &input(c, sy, x_lo + dx - pad);
                    std::memcpy(dst_base + static_cast<Eigen::Index>(y) * W + x_lo, src,
                                sizeof(Scalar) * (x_hi - x_lo));
                }
            }
        }
    }
}

// Scatter-adds a patch-matrix gradient back to the input gradient (col2im).
template <typename Scalar>
void col2im_band(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>& cols,
                 int k, int y0, int band_h, Tensor<Scalar>& grad_input) {
    const int C = grad_input.dim(0), H = grad_input.dim(1), W = grad_input.dim(2);
    const int pad = k / 2;
    for (int c = 0; c < C; ++c) {
        for (int dy = 0; dy < k; ++dy) {
            for (int dx = 0; dx < k; ++dx) {
                const int row = (c * k + dy) * k + dx;
                const Scalar* src_base = cols.data() + static_cast<Eigen::Index>(row) * band_h * W;
                for (int y = 0; y < band_h; ++y) {
                    const int sy = y0 + y + dy - pad;
                    if (sy < 0 || sy >= H) continue;
                    const int x_lo = std::max(0, pad - dx);
                    const int x_hi = std::min(W, W + pad - dx);
                    Scalar* dst = &grad_input(c, sy, x_lo + dx - pad);
                    const Scalar* src = src_base + static_cast<Eigen::Index>(y) * W + x_lo;
                    for (int x = 0; x < x_hi - x_lo; ++x) dst[x] += src[x];
                }
            }
        }
    }
}

inline int conv_band_rows(int W, int patch_rows, int scalar_bytes) {
    // keep the im2col buffer around 2 MB so it stays cache-friendly
    const long bytes_per_row = static_cast<long>(W) * patch_rows * scalar_bytes;
    return std::max(1, static_cast<int>((2L << 20) / std::max(1L, bytes_per_row)));
}

}  // namespace detail

// Stride-1 same-size convolution (zero padding k/2). kernel_size 1 or 3.
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& input, const LayerParams<Scalar>& params) {
    const int C = input.dim(0), H = input.dim(1), W = input.dim(2);
    const int k = params.kernel_size();
    if (C != params.in_channels())
        throw std::invalid_argument("conv2d: input channels do not match weights");
    const int C_out = params.out_channels();
    Tensor<Scalar> out({C_out, H, W});
    Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> wmat(
        params.weights.data(), C_out, static_cast<Eigen::Index>(C) * k * k);

    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> cols;
    const int band = detail::conv_band_rows(W, C * k * k, sizeof(Scalar));
    for (int y0 = 0; y0 < H; y0 += band) {
        const int bh = std::min(band, H - y0);
        detail::im2col_band(input, k, y0, bh, cols);
        Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>,
                   Eigen::Unaligned, Eigen::OuterStride<>>
            out_block(out.data() + static_cast<Eigen::Index>(y0) * W, C_out,
                      static_cast<Eigen::Index>(bh) * W,
                      Eigen::OuterStride<>(static_cast<Eigen::Index>(H) * W));
        out_block.noalias() = wmat * cols;
    }
    for (int co = 0; co < C_out; ++co)
        out.channel(co).array() += params.bias[co];
    return out;
}

// Backward pass: accumulates grad_weights/grad_bias in `params`, returns the
// gradient with respect to the input.
template <typename Scalar>
Tensor<Scalar> conv2d_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& grad_output,
                               LayerParams<Scalar>& params) {
    const int C = input.dim(0), H = input.dim(1), W = input.dim(2);
    const int k = params.kernel_size();
    const int C_out = params.out_channels();
    Tensor<Scalar> grad_input(input.shape());
    Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> wmat(
        params.weights.data(), C_out, static_cast<Eigen::Index>(C) * k * k);
    Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> gwmat(
        params.grad_weights.data(), C_out, static_cast<Eigen::Index>(C) * k * k);

    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> cols, col_grad;
    const int band = detail::conv_band_rows(W, C * k * k, sizeof(Scalar));
    for (int y0 = 0; y0 < H; y0 += band) {
        const int bh = std::min(band, H - y0);
        Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>,
                   Eigen::Unaligned, Eigen::OuterStride<>>
            go_block(grad_output.data() + static_cast<Eigen::Index>(y0) * W, C_out,
                     static_cast<Eigen::Index>(bh) * W,
                     Eigen::OuterStride<>(static_cast<Eigen::Index>(H) * W));
        detail::im2col_band(input, k, y0, bh, cols);
        gwmat.noalias() += go_block * cols.transpose();
        col_grad.noalias() = wmat.transpose() * go_block;
        detail::col2im_band(col_grad, k, y0, bh, grad_input);
    }
    for (int co = 0; co < C_out; ++co)
        params.grad_bias[co] += grad_output.channel(co).sum();
    return grad_input;
}

// ---- activations ----

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& input) {
    Tensor<Scalar> out(input.shape());
    out.array() = input.array().max(Scalar(0));
    return out;
}

template <typename Scalar>
Tensor<Scalar> relu_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& grad_output) {
    Tensor<Scalar> g(input.shape());
    g.array() = (input.array() > Scalar(0)).template cast<Scalar>() * grad_output.array();
    return g;
}

// PeLU: (a/b)*x for x >= 0, a*(exp(x/b) - 1) for x < 0.
template <typename Scalar>
struct PeluParams {
    Scalar a = Scalar(1);
    Scalar b = Scalar(1);
};

template <typename Scalar>
Tensor<Scalar> pelu(const Tensor<Scalar>& input, PeluParams<Scalar> p = {}) {
    if (!(p.a > Scalar(0)) || !(p.b > Scalar(0)))
        throw std::invalid_argument("pelu: parameters must be positive");
    Tensor<Scalar> out(input.shape());
    const Scalar slope = p.a / p.b;
    for (Eigen::Index i = 0; i < input.size(); ++i) {
        const Scalar x = input[i];
        out[i] = x >= Scalar(0) ? slope * x : p.a * (std::exp(x / p.b) - Scalar(1));
    }
    return out;
}

template <typename Scalar>
Tensor<Scalar> pelu_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& grad_output,
                             PeluParams<Scalar> p = {}) {
    Tensor<Scalar> g(input.shape());
    const Scalar slope = p.a / p.b;
    for (Eigen::Index i = 0; i < input.size(); ++i) {
        const Scalar x = input[i];
        const Scalar d = x >= Scalar(0) ? slope : slope * std::exp(x / p.b);
        g[i] = d * grad_output[i];
    }
    return g;
}

// Per-pixel softmax over the channel dimension, stabilized by max subtraction.
template <typename Scalar>
Tensor<Scalar> softmax_channels(const Tensor<Scalar>& input) {
    const int C = input.dim(0), H = input.dim(1), W = input.dim(2);
    if (C < 2) throw std::invalid_argument("softmax_channels: need at least 2 channels");
    Tensor<Scalar> out(input.shape());
    const Eigen::Index plane = static_cast<Eigen::Index>(H) * W;
    for (Eigen::Index i = 0; i < plane; ++i) {
        Scalar mx = input[i];
        for (int c = 1; c < C; ++c) mx = std::max(mx, input[c * plane + i]);
        Scalar sum = 0;
        for (int c = 0; c < C; ++c) {
            const Scalar e = std::exp(input[c * plane + i] - mx);
            out[c * plane + i] = e;
            sum += e;
        }
        for (int c = 0; c < C; ++c) out[c * plane + i] /= sum;
    }
    return out;
}

// ---- resolution doubling ----

enum class UpsampleMode { kNearest, kBilinear };

namespace detail {

// Source coordinate and interpolation weights for 2x upsampling, half-pixel
// centers, clamped at the borders.
inline void up2_coords(int out_i, int in_extent, int& i0, int& i1, double& w1) {
    const double src = (out_i + 0.5) / 2.0 - 0.5;
    double f = std::floor(src);
    i0 = static_cast<int>(f);
    w1 = src - f;
    i1 = i0 + 1;
    if (i0 < 0) { i0 = 0; i1 = 0; w1 = 0.0; }
    if (i1 > in_extent - 1) { i1 = in_extent - 1; i0 = in_extent - 1; w1 = 0.0; }
}

}  // namespace detail

template <typename Scalar>
Tensor<Scalar> upsample2x(const Tensor<Scalar>& input, UpsampleMode mode = UpsampleMode::kBilinear) {
    const int C = input.dim(0), H = input.dim(1), W = input.dim(2);
    Tensor<Scalar> out({C, 2 * H, 2 * W});
    if (mode == UpsampleMode::kNearest) {
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < 2 * H; ++y)
                for (int x = 0; x < 2 * W; ++x) out(c, y, x) = input(c, y / 2, x / 2);
        return out;
    }
    std::vector<int> xs0(static_cast<size_t>(2 * W)), xs1(static_cast<size_t>(2 * W));
    std::vector<Scalar> wxs(static_cast<size_t>(2 * W));
    for (int x = 0; x < 2 * W; ++x) {
        double wx;
        detail::up2_coords(x, W, xs0[static_cast<size_t>(x)], xs1[static_cast<size_t>(x)], wx);
        wxs[static_cast<size_t>(x)] = static_cast<Scalar>(wx);
    }
    for (int c = 0; c < C; ++c) {
        for (int y = 0; y < 2 * H; ++y) {
            int y0, y1;
            double wy_d;
            detail::up2_coords(y, H, y0, y1, wy_d);
            const Scalar wy = static_cast<Scalar>(wy_d);
            const Scalar* r0 = &input(c, y0, 0);
            const Scalar* r1 = &input(c, y1, 0);
            Scalar* dst = &out(c, y, 0);
            for (int x = 0; x < 2 * W; ++x) {
                const int x0 = xs0[static_cast<size_t>(x)], x1 = xs1[static_cast<size_t>(x)];
                const Scalar wx = wxs[static_cast<size_t>(x)];
                dst[x] = (1 - wy) * ((1 - wx) * r0[x0] + wx * r0[x1]) +
                         wy * ((1 - wx) * r1[x0] + wx * r1[x1]);
            }
        }
    }
    return out;
}

template <typename Scalar>
Tensor<Scalar> upsample2x_backward(const Tensor<Scalar>& grad_output, int in_h, int in_w,
                                   UpsampleMode mode = UpsampleMode::kBilinear) {
    const int C = grad_output.dim(0);
    Tensor<Scalar> g({C, in_h, in_w});
    if (mode == UpsampleMode::kNearest) {
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < 2 * in_h; ++y)
                for (int x = 0; x < 2 * in_w; ++x) g(c, y / 2, x / 2) += grad_output(c, y, x);
        return g;
    }
    std::vector<int> xs0(static_cast<size_t>(2 * in_w)), xs1(static_cast<size_t>(2 * in_w));
    std::vector<Scalar> wxs(static_cast<size_t>(2 * in_w));
    for (int x = 0; x < 2 * in_w; ++x) {
        double wx;
        detail::up2_coords(x, in_w, xs0[static_cast<size_t>(x)], xs1[static_cast<size_t>(x)], wx);
        wxs[static_cast<size_t>(x)] = static_cast<Scalar>(wx);
    }
    for (int c = 0; c < C; ++c) {
        for (int y = 0; y < 2 * in_h; ++y) {
            int y0, y1;
            double wy_d;
            detail::up2_coords(y, in_h, y0, y1, wy_d);
            const Scalar wy = static_cast<Scalar>(wy_d);
            const Scalar* src = &grad_output(c, y, 0);
            Scalar* g0 = &g(c, y0, 0);
            Scalar* g1 = &g(c, y1, 0);
            for (int x = 0; x < 2 * in_w; ++x) {
                const int x0 = xs0[static_cast<size_t>(x)], x1 = xs1[static_cast<size_t>(x)];
                const Scalar wx = wxs[static_cast<size_t>(x)];
                const Scalar go = src[x];
                g0[x0] += (1 - wy) * (1 - wx) * go;
                g0[x1] += (1 - wy) * wx * go;
                g1[x0] += wy * (1 - wx) * go;
                g1[x1] += wy * wx * go;
            }
        }
    }
    return g;
}

// ---- loss ----

// Mean two-class negative log-likelihood over pixels. `prediction` is the
// post-softmax probability map, `target` holds labels in {0,1} as H*W values.
// Returns the loss; `grad_logits` receives the gradient with respect to the
// pre-softmax logits.
template <typename Scalar>
double crossentropy_loss(const Tensor<Scalar>& prediction,
                         const Eigen::Array<uint8_t, Eigen::Dynamic, Eigen::Dynamic>& target,
                         Tensor<Scalar>* grad_logits = nullptr) {
    const int H = prediction.dim(1), W = prediction.dim(2);
    if (prediction.dim(0) != 2 || target.rows() != H || target.cols() != W)
        throw std::invalid_argument("crossentropy_loss: shape mismatch");
    constexpr double kProbFloor = 1e-7;
    const Eigen::Index plane = static_cast<Eigen::Index>(H) * W;
    const double inv_n = 1.0 / static_cast<double>(plane);
    double loss = 0.0;
    if (grad_logits) *grad_logits = Tensor<Scalar>({2, H, W});
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const int label = target(y, x) ? 1 : 0;
            const double p = std::max<double>(prediction(label, y, x), kProbFloor);
            loss -= std::log(p) * inv_n;
            if (grad_logits) {
                (*grad_logits)(0, y, x) =
                    static_cast<Scalar>((prediction(0, y, x) - (label == 0 ? 1.0 : 0.0)) * inv_n);
                (*grad_logits)(1, y, x) =
                    static_cast<Scalar>((prediction(1, y, x) - (label == 1 ? 1.0 : 0.0)) * inv_n);
            }
        }
    }
    return loss;
}

}  // namespace segtrack
