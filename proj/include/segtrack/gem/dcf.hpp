#pragma once

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "segtrack/core/tensor.hpp"
#include "segtrack/nn/layers.hpp"

namespace segtrack {

template <typename Scalar>
using ComplexGrid = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using RealGrid = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

namespace fftops {

template <typename Scalar>
ComplexGrid<Scalar> fft2(const RealGrid<Scalar>& in) {
    Eigen::FFT<Scalar> fft;
    const Eigen::Index rows = in.rows(), cols = in.cols();
    ComplexGrid<Scalar> out(rows, cols);
    Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1> line;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> rline;
    for (Eigen::Index r = 0; r < rows; ++r) {
        rline = in.row(r).transpose();
        fft.fwd(line, rline);
        out.row(r) = line.transpose();
    }
    Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1> cline(rows), cout;
    for (Eigen::Index c = 0; c < cols; ++c) {
        cline = out.col(c);
        fft.fwd(cout, cline);
        out.col(c) = cout;
    }
    return out;
}

template <typename Scalar>
RealGrid<Scalar> ifft2_real(const ComplexGrid<Scalar>& in) {
    Eigen::FFT<Scalar> fft;
    const Eigen::Index rows = in.rows(), cols = in.cols();
    ComplexGrid<Scalar> tmp(rows, cols);
    Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1> line, lout;
    for (Eigen::Index c = 0; c < cols; ++c) {
        line = in.col(c);
        fft.inv(lout, line);
        tmp.col(c) = lout;
    }
    RealGrid<Scalar> out(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        line = tmp.row(r).transpose();
        fft.inv(lout, line);
        out.row(r) = lout.real().transpose();
    }
    return out;
}

}  // namespace fftops

template <typename Scalar>
struct DcfConfig {
    Scalar lambda = Scalar(1e-2);
    Scalar label_sigma = Scalar(1.2);  // grid cells
    Scalar update_rate = Scalar(0.1);
    bool cosine_window = true;
};

// Ridge-regression correlation filter in the Fourier domain, one
// numerator/denominator pair per feature channel.
template <typename Scalar>
struct CorrelationFilter {
    std::vector<ComplexGrid<Scalar>> numerator;    // ghat .* conj(fhat_c)
    std::vector<ComplexGrid<Scalar>> denominator;  // |fhat_c|^2 + lambda
    DcfConfig<Scalar> config;
    int rows = 0, cols = 0;

    int channels() const { return static_cast<int>(numerator.size()); }
};

namespace detail {

template <typename Scalar>
RealGrid<Scalar> cosine_window(int rows, int cols) {
    RealGrid<Scalar> w(rows, cols);
    constexpr Scalar pi = Scalar(3.14159265358979323846);
    for (int r = 0; r < rows; ++r) {
        const Scalar wr = Scalar(0.5) - Scalar(0.5) * std::cos(2 * pi * r / Scalar(rows - 1));
        for (int c = 0; c < cols; ++c) {
            const Scalar wc = Scalar(0.5) - Scalar(0.5) * std::cos(2 * pi * c / Scalar(cols - 1));
            w(r, c) = wr * wc;
        }
    }
    return w;
}

template <typename Scalar>
RealGrid<Scalar> gaussian_label(int rows, int cols, int center_row, int center_col, Scalar sigma) {
    RealGrid<Scalar> g(rows, cols);
    const Scalar inv = Scalar(1) / (2 * sigma * sigma);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            const Scalar dr = Scalar(r - center_row), dc = Scalar(c - center_col);
            g(r, c) = std::exp(-(dr * dr + dc * dc) * inv);
        }
    return g;
}

// FFT of every (optionally windowed) feature channel.
template <typename Scalar>
std::vector<ComplexGrid<Scalar>> channel_spectra(const Tensor<Scalar>& features,
                                                 const DcfConfig<Scalar>& cfg) {
    const int C = features.dim(0), H = features.dim(1), W = features.dim(2);
    RealGrid<Scalar> window;
    if (cfg.cosine_window) window = cosine_window<Scalar>(H, W);
    std::vector<ComplexGrid<Scalar>> spectra;
    spectra.reserve(static_cast<size_t>(C));
    RealGrid<Scalar> plane(H, W);
    for (int c = 0; c < C; ++c) {
        plane = features.channel(c);
        if (cfg.cosine_window) plane.array() *= window.array();
        spectra.push_back(fftops::fft2(plane));
    }
    return spectra;
}

}  // namespace detail

template <typename Scalar>
CorrelationFilter<Scalar> train_dcf(const Tensor<Scalar>& features, int center_row, int center_col,
                                    const DcfConfig<Scalar>& cfg) {
    if (!(cfg.lambda > Scalar(0))) throw std::invalid_argument("train_dcf: lambda must be positive");
    const int H = features.dim(1), W = features.dim(2);
    if (center_row < 0 || center_row >= H || center_col < 0 || center_col >= W)
        throw std::invalid_argument("train_dcf: center outside grid");
    CorrelationFilter<Scalar> filter;
    filter.config = cfg;
    filter.rows = H;
    filter.cols = W;
    const ComplexGrid<Scalar> ghat =
        fftops::fft2(detail::gaussian_label(H, W, center_row, center_col, cfg.label_sigma));
    const auto spectra = detail::channel_spectra(features, cfg);
    for (const auto& fhat : spectra) {
        filter.numerator.push_back(ghat.cwiseProduct(fhat.conjugate()));
        filter.denominator.push_back(
            (fhat.cwiseProduct(fhat.conjugate()).real().array() + cfg.lambda)
                .matrix()
                .template cast<std::complex<Scalar>>());
    }
    return filter;
}

template <typename Scalar>
struct DcfResponse {
    Tensor<Scalar> response;  // [1,H,W], after PeLU
    int argmax_row = 0, argmax_col = 0;
};

template <typename Scalar>
DcfResponse<Scalar> apply_dcf(const CorrelationFilter<Scalar>& filter,
                              const Tensor<Scalar>& features,
                              PeluParams<Scalar> pelu_params = {}) {
    if (features.dim(0) != filter.channels())
        throw std::invalid_argument("apply_dcf: channel count mismatch");
    const int H = filter.rows, W = filter.cols;
    const auto spectra = detail::channel_spectra(features, filter.config);
    ComplexGrid<Scalar> rhat = ComplexGrid<Scalar>::Zero(H, W);
    for (int c = 0; c < filter.channels(); ++c)
        rhat += filter.numerator[static_cast<size_t>(c)]
                    .cwiseQuotient(filter.denominator[static_cast<size_t>(c)])
                    .cwiseProduct(spectra[static_cast<size_t>(c)]);
    const RealGrid<Scalar> raw = fftops::ifft2_real(rhat);

    DcfResponse<Scalar> out;
    out.response = Tensor<Scalar>({1, H, W});
    Scalar best = -std::numeric_limits<Scalar>::infinity();
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) {
            const Scalar x = raw(r, c);
            const Scalar slope = pelu_params.a / pelu_params.b;
            out.response(0, r, c) =
                x >= Scalar(0) ? slope * x : pelu_params.a * (std::exp(x / pelu_params.b) - Scalar(1));
            if (out.response(0, r, c) > best) {  // lexicographic tie-break by construction
                best = out.response(0, r, c);
                out.argmax_row = r;
                out.argmax_col = c;
            }
        }
    return out;
}

// Exponential moving-average update with fresh statistics labelled at
// `new_center`. rate 0 keeps the filter, rate 1 equals retraining.
template <typename Scalar>
void update_dcf(CorrelationFilter<Scalar>& filter, const Tensor<Scalar>& features, int center_row,
                int center_col, Scalar rate) {
    if (rate < Scalar(0) || rate > Scalar(1))
        throw std::invalid_argument("update_dcf: rate must be in [0,1]");
    if (rate == Scalar(0)) return;
    const CorrelationFilter<Scalar> fresh =
        train_dcf(features, center_row, center_col, filter.config);
    for (int c = 0; c < filter.channels(); ++c) {
        filter.numerator[static_cast<size_t>(c)] =
            (Scalar(1) - rate) * filter.numerator[static_cast<size_t>(c)] +
            rate * fresh.numerator[static_cast<size_t>(c)];
        filter.denominator[static_cast<size_t>(c)] =
            (Scalar(1) - rate) * filter.denominator[static_cast<size_t>(c)] +
            rate * fresh.denominator[static_cast<size_t>(c)];
    }
}

// L_i = 1 - d_i / d_diag, maximal at the response peak, 0 at a full diagonal.
template <typename Scalar>
Tensor<Scalar> location_channel(int argmax_row, int argmax_col, int rows, int cols) {
    if (argmax_row < 0 || argmax_row >= rows || argmax_col < 0 || argmax_col >= cols)
        throw std::invalid_argument("location_channel: coords outside grid");
    Tensor<Scalar> L({1, rows, cols});
    const Scalar diag = std::sqrt(Scalar((rows - 1) * (rows - 1) + (cols - 1) * (cols - 1)));
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            const Scalar d =
                std::sqrt(Scalar((r - argmax_row) * (r - argmax_row) +
                                 (c - argmax_col) * (c - argmax_col)));
            L(0, r, c) = Scalar(1) - d / diag;
        }
    return L;
}

}  // namespace segtrack
