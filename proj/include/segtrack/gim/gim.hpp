#pragma once

#include <algorithm>
#include <random>
#include <stdexcept>
#include <vector>

#include "segtrack/core/mask.hpp"
#include "segtrack/core/tensor.hpp"

namespace segtrack {

// Unordered foreground/background feature-vector sets matched by normalized
// dot product. Columns are stored L2-normalized; an all-zero vector stays
// zero and matches everything with similarity 0.
template <typename Scalar>
struct GimModel {
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> foreground;  // D x N_F
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> background;  // D x N_B
    int top_k = 3;
};

struct GimCaps {
    int max_foreground = 1000;
    int max_background = 2000;
};

// Majority vote over each stride x stride cell.
inline Mask downsample_mask_majority(const Mask& mask, int stride) {
    const int oh = static_cast<int>(mask.rows()) / stride;
    const int ow = static_cast<int>(mask.cols()) / stride;
    Mask out(oh, ow);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            int count = 0;
            for (int dy = 0; dy < stride; ++dy)
                for (int dx = 0; dx < stride; ++dx)
                    count += mask(y * stride + dy, x * stride + dx) ? 1 : 0;
            out(y, x) = count * 2 > stride * stride ? 1 : 0;
        }
    return out;
}

namespace detail {

template <typename Scalar>
void normalize_columns(Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        const Scalar n = m.col(j).norm();
        if (n > Scalar(0)) m.col(j) /= n;
    }
}

}  // namespace detail

// Builds the model from grid-aligned features and a grid-resolution mask.
// Cells inside the mask feed the foreground set, the rest of the region the
// background set; each set is uniformly subsampled down to its cap.
template <typename Scalar, typename Rng>
GimModel<Scalar> build_gim_model(const Tensor<Scalar>& features, const Mask& grid_mask,
                                 int top_k, const GimCaps& caps, Rng& rng) {
    const int D = features.dim(0), H = features.dim(1), W = features.dim(2);
    if (static_cast<int>(grid_mask.rows()) != H || static_cast<int>(grid_mask.cols()) != W)
        throw std::invalid_argument("build_gim_model: mask not aligned to feature grid");
    std::vector<int> fg_cells, bg_cells;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            (grid_mask(y, x) ? fg_cells : bg_cells).push_back(y * W + x);
    if (fg_cells.empty())
        throw std::runtime_error("build_gim_model: empty foreground after downsampling");
    if (bg_cells.empty())
        throw std::runtime_error("build_gim_model: no background cells in region");

    const auto subsample = [&rng](std::vector<int>& cells, int cap) {
        if (static_cast<int>(cells.size()) <= cap) return;
        std::vector<int> picked;
        picked.reserve(static_cast<size_t>(cap));
        std::sample(cells.begin(), cells.end(), std::back_inserter(picked),
                    static_cast<size_t>(cap), rng);
        cells = std::move(picked);
    };
    subsample(fg_cells, caps.max_foreground);
    subsample(bg_cells, caps.max_background);

    GimModel<Scalar> model;
    model.top_k = top_k;
    const auto gather = [&](const std::vector<int>& cells) {
        Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> m(D, cells.size());
        const Eigen::Index plane = static_cast<Eigen::Index>(H) * W;
        for (size_t j = 0; j < cells.size(); ++j)
            for (int d = 0; d < D; ++d) m(d, static_cast<Eigen::Index>(j)) = features[d * plane + cells[j]];
        detail::normalize_columns(m);
        return m;
    };
    model.foreground = gather(fg_cells);
    model.background = gather(bg_cells);
    return model;
}

// Similarity channels plus the caches needed for the training backward pass.
template <typename Scalar>
struct GimChannels {
    Tensor<Scalar> F, B, P;  // each [1,H,W]
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> y_normalized;  // D x H*W
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> y_norm;                     // H*W
    std::vector<std::vector<int>> topk_fg, topk_bg;                      // per pixel
};

namespace detail {

// Average of the K largest values of column `col` of S; fills `indices` with
// the chosen rows. K larger than the set size falls back to the full mean.
template <typename Scalar>
Scalar topk_mean(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& S, Eigen::Index col,
                 int k, std::vector<int>& indices) {
    const int n = static_cast<int>(S.rows());
    const int kk = std::min(k, n);
    indices.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) indices[static_cast<size_t>(i)] = i;
    std::partial_sort(indices.begin(), indices.begin() + kk, indices.end(),
                      [&](int a, int b) { return S(a, col) > S(b, col); });
    indices.resize(static_cast<size_t>(kk));
    Scalar sum = 0;
    for (int i : indices) sum += S(i, col);
    return sum / static_cast<Scalar>(kk);
}

}  // namespace detail

// Per-pixel foreground/background similarity via top-K averaged normalized
// dot products, and the posterior P = softmax(F, B).
template <typename Scalar>
GimChannels<Scalar> similarity_channels(const Tensor<Scalar>& features,
                                        const GimModel<Scalar>& model) {
    const int D = features.dim(0), H = features.dim(1), W = features.dim(2);
    if (model.foreground.cols() == 0 || model.background.cols() == 0)
        throw std::invalid_argument("similarity_channels: empty model");
    const Eigen::Index P = static_cast<Eigen::Index>(H) * W;
    GimChannels<Scalar> ch;
    ch.F = Tensor<Scalar>({1, H, W});
    ch.B = Tensor<Scalar>({1, H, W});
    ch.P = Tensor<Scalar>({1, H, W});
    ch.y_normalized = features.as_channel_matrix();
    ch.y_norm.resize(P);
    for (Eigen::Index i = 0; i < P; ++i) {
        const Scalar n = ch.y_normalized.col(i).norm();
        ch.y_norm[i] = n;
        if (n > Scalar(0)) ch.y_normalized.col(i) /= n;
    }
    (void)D;
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> sim_fg =
        model.foreground.transpose() * ch.y_normalized;
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> sim_bg =
        model.background.transpose() * ch.y_normalized;
    ch.topk_fg.resize(static_cast<size_t>(P));
    ch.topk_bg.resize(static_cast<size_t>(P));
    for (Eigen::Index i = 0; i < P; ++i) {
        ch.F[i] = detail::topk_mean(sim_fg, i, model.top_k, ch.topk_fg[static_cast<size_t>(i)]);
        ch.B[i] = detail::topk_mean(sim_bg, i, model.top_k, ch.topk_bg[static_cast<size_t>(i)]);
        // P = exp(F)/(exp(F)+exp(B)), computed as a stable sigmoid
        ch.P[i] = Scalar(1) / (Scalar(1) + std::exp(-(ch.F[i] - ch.B[i])));
    }
    return ch;
}

template <typename Scalar>
Tensor<Scalar> posterior_channel(const Tensor<Scalar>& F, const Tensor<Scalar>& B) {
    if (!F.same_shape(B)) throw std::invalid_argument("posterior_channel: shape mismatch");
    Tensor<Scalar> P(F.shape());
    for (Eigen::Index i = 0; i < F.size(); ++i)
        P[i] = Scalar(1) / (Scalar(1) + std::exp(-(F[i] - B[i])));
    return P;
}

// Gradient with respect to the raw (pre-normalization) input features, given
// gradients on the F and P channels. Model vectors are treated as constants.
template <typename Scalar>
Tensor<Scalar> gim_backward(const GimChannels<Scalar>& ch, const GimModel<Scalar>& model,
                            const Tensor<Scalar>& grad_F, const Tensor<Scalar>& grad_P, int H,
                            int W) {
    const int D = static_cast<int>(model.foreground.rows());
    Tensor<Scalar> grad_features({D, H, W});
    auto gmat = grad_features.as_channel_matrix();
    const Eigen::Index P = static_cast<Eigen::Index>(H) * W;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mean_vec(D), dir(D);
    for (Eigen::Index i = 0; i < P; ++i) {
        if (!(ch.y_norm[i] > Scalar(0))) continue;
        const Scalar p = ch.P[i];
        const Scalar dP = grad_P[i] * p * (Scalar(1) - p);
        const Scalar gF = grad_F[i] + dP;
        const Scalar gB = -dP;
        mean_vec.setZero();
        {
            const auto& idx = ch.topk_fg[static_cast<size_t>(i)];
            for (int j : idx) mean_vec += model.foreground.col(j);
            mean_vec *= gF / static_cast<Scalar>(idx.size());
        }
        {
            const auto& idx = ch.topk_bg[static_cast<size_t>(i)];
            dir.setZero();
            for (int j : idx) dir += model.background.col(j);
            mean_vec += dir * (gB / static_cast<Scalar>(idx.size()));
        }
        // d<y~, m>/dy = (m - y~ <y~, m>) / |y|
        const auto yn = ch.y_normalized.col(i);
        gmat.col(i) = (mean_vec - yn * yn.dot(mean_vec)) / ch.y_norm[i];
    }
    return grad_features;
}

}  // namespace segtrack
