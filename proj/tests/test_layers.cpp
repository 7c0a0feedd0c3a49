#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "segtrack/core/mask.hpp"
#include "segtrack/nn/adam.hpp"
#include "segtrack/nn/layers.hpp"

using namespace segtrack;
using testutil::fill_uniform;
using testutil::rel_err;

namespace {

// weight layout [C_out, C_in, k, k]
template <typename Scalar>
Eigen::Index widx(const LayerParams<Scalar>& p, int co, int c, int dy, int dx) {
    const int C = p.in_channels(), k = p.kernel_size();
    return ((static_cast<Eigen::Index>(co) * C + c) * k + dy) * k + dx;
}

// Direct zero-padded stride-1 convolution used as an oracle.
template <typename Scalar>
Tensor<Scalar> naive_conv(const Tensor<Scalar>& in, const LayerParams<Scalar>& p) {
    const int C = in.dim(0), H = in.dim(1), W = in.dim(2);
    const int k = p.kernel_size(), pad = k / 2, Co = p.out_channels();
    Tensor<Scalar> out({Co, H, W});
    for (int co = 0; co < Co; ++co)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                double acc = p.bias[co];
                for (int c = 0; c < C; ++c)
                    for (int dy = 0; dy < k; ++dy)
                        for (int dx = 0; dx < k; ++dx) {
                            const int sy = y + dy - pad, sx = x + dx - pad;
                            if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
                            acc += static_cast<double>(p.weights[widx(p, co, c, dy, dx)]) *
                                   in(c, sy, sx);
                        }
                out(co, y, x) = static_cast<Scalar>(acc);
            }
    return out;
}

double conv_loss(const Tensor<double>& in, const LayerParams<double>& p) {
    const Tensor<double> out = conv2d(in, p);
    double s = 0;
    for (Eigen::Index i = 0; i < out.size(); ++i) s += 0.5 * out[i] * out[i];
    return s;
}

}  // namespace

TEST_CASE("identity kernel passes input through") {
    LayerParams<float> p = LayerParams<float>::conv(2, 2, 3);
    p.weights[widx(p, 0, 0, 1, 1)] = 1.0f;  // channel 0 -> channel 0
    p.weights[widx(p, 1, 1, 1, 1)] = 1.0f;  // channel 1 -> channel 1
    Tensor<float> in({2, 5, 7});
    std::mt19937 rng(1);
    fill_uniform(in, rng);
    const Tensor<float> out = conv2d(in, p);
    for (Eigen::Index i = 0; i < in.size(); ++i) CHECK(out[i] == doctest::Approx(in[i]));
}

TEST_CASE("zero weights give bias planes") {
    LayerParams<float> p = LayerParams<float>::conv(3, 2, 1);
    p.bias[0] = 0.5f;
    p.bias[1] = -1.0f;
    p.bias[2] = 2.0f;
    Tensor<float> in({2, 4, 4});
    std::mt19937 rng(2);
    fill_uniform(in, rng);
    const Tensor<float> out = conv2d(in, p);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x) CHECK(out(c, y, x) == doctest::Approx(p.bias[c]));
}

TEST_CASE("conv2d matches the direct-sum oracle") {
    std::mt19937 rng(3);
    for (int k : {1, 3, 5}) {
        LayerParams<double> p = LayerParams<double>::conv(3, 4, k);
        fill_uniform(p.weights, rng);
        fill_uniform(p.bias, rng);
        Tensor<double> in({4, 9, 11});
        fill_uniform(in, rng);
        const Tensor<double> fast = conv2d(in, p);
        const Tensor<double> slow = naive_conv(in, p);
        for (Eigen::Index i = 0; i < fast.size(); ++i)
            CHECK(std::abs(fast[i] - slow[i]) < 1e-10);
    }
}

TEST_CASE("conv2d is linear in its input") {
    std::mt19937 rng(4);
    LayerParams<double> p = LayerParams<double>::conv(2, 3, 3);
    fill_uniform(p.weights, rng);
    Tensor<double> a({3, 6, 6}), b({3, 6, 6});
    fill_uniform(a, rng);
    fill_uniform(b, rng);
    Tensor<double> sum({3, 6, 6});
    sum.array() = 2.0 * a.array() + 3.0 * b.array();
    const Tensor<double> oa = conv2d(a, p), ob = conv2d(b, p), os = conv2d(sum, p);
    for (Eigen::Index i = 0; i < os.size(); ++i)
        CHECK(os[i] == doctest::Approx(2.0 * oa[i] + 3.0 * ob[i]).epsilon(1e-12));
}

TEST_CASE("conv2d rejects channel mismatch") {
    LayerParams<float> p = LayerParams<float>::conv(2, 3, 3);
    Tensor<float> in({4, 5, 5});
    CHECK_THROWS_AS(conv2d(in, p), std::invalid_argument);
}

TEST_CASE("conv2d_backward gradients agree with finite differences") {
    std::mt19937 rng(5);
    LayerParams<double> p = LayerParams<double>::conv(2, 3, 3);
    fill_uniform(p.weights, rng, -0.5, 0.5);
    fill_uniform(p.bias, rng, -0.5, 0.5);
    Tensor<double> in({3, 5, 6});
    fill_uniform(in, rng);

    const Tensor<double> out = conv2d(in, p);
    Tensor<double> grad_out(out.shape());
    grad_out.vec() = out.vec();  // dL/dout for L = 0.5*sum(out^2)
    p.zero_grad();
    const Tensor<double> grad_in = conv2d_backward(in, grad_out, p);

    const double h = 1e-6;
    for (Eigen::Index i = 0; i < p.weights.size(); i += 7) {
        const double fd =
            testutil::central_diff(p.weights[i], h, [&] { return conv_loss(in, p); });
        CHECK(rel_err(fd, p.grad_weights[i]) < 1e-4);
    }
    for (Eigen::Index i = 0; i < p.bias.size(); ++i) {
        const double fd = testutil::central_diff(p.bias[i], h, [&] { return conv_loss(in, p); });
        CHECK(rel_err(fd, p.grad_bias[i]) < 1e-4);
    }
    for (Eigen::Index i = 0; i < in.size(); i += 11) {
        const double fd = testutil::central_diff(in[i], h, [&] { return conv_loss(in, p); });
        CHECK(rel_err(fd, grad_in[i]) < 1e-4);
    }
}

TEST_CASE("relu and its backward") {
    Tensor<double> in({1, 1, 4});
    in[0] = -2;
    in[1] = -0.5;
    in[2] = 0.5;
    in[3] = 3;
    const Tensor<double> out = relu(in);
    CHECK(out[0] == 0);
    CHECK(out[1] == 0);
    CHECK(out[2] == 0.5);
    CHECK(out[3] == 3);
    Tensor<double> g(in.shape());
    g.array() = 1.0;
    const Tensor<double> gin = relu_backward(in, g);
    CHECK(gin[0] == 0);
    CHECK(gin[1] == 0);
    CHECK(gin[2] == 1);
    CHECK(gin[3] == 1);
}

TEST_CASE("pelu is continuous at zero and matches its branches") {
    PeluParams<double> p;  // a = b = 1
    Tensor<double> in({1, 1, 3});
    in[0] = -1e-9;
    in[1] = 0.0;
    in[2] = 1e-9;
    const Tensor<double> out = pelu(in, p);
    CHECK(std::abs(out[0] - out[1]) < 1e-8);
    CHECK(std::abs(out[2] - out[1]) < 1e-8);

    Tensor<double> x({1, 1, 2});
    x[0] = 0.37;
    x[1] = -0.37;
    const Tensor<double> y = pelu(x, p);
    CHECK(y[0] == doctest::Approx(0.37));
    CHECK(y[1] == doctest::Approx(std::exp(-0.37) - 1.0));
}

TEST_CASE("pelu_backward matches finite differences") {
    PeluParams<double> pp{1.3, 0.8};
    Tensor<double> in({1, 1, 4});
    in[0] = 0.37;
    in[1] = -0.37;
    in[2] = 1.7;
    in[3] = -2.2;
    Tensor<double> ones(in.shape());
    ones.array() = 1.0;
    const Tensor<double> g = pelu_backward(in, ones, pp);
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < in.size(); ++i) {
        const double fd = testutil::central_diff(in[i], h, [&] {
            double s = 0;
            const Tensor<double> y = pelu(in, pp);
            for (Eigen::Index j = 0; j < y.size(); ++j) s += y[j];
            return s;
        });
        CHECK(rel_err(fd, g[i]) < 1e-5);
    }
}

TEST_CASE("pelu rejects non-positive parameters") {
    Tensor<double> in({1, 1, 1});
    CHECK_THROWS_AS(pelu(in, PeluParams<double>{0.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(pelu(in, PeluParams<double>{1.0, -1.0}), std::invalid_argument);
}

TEST_CASE("softmax known values and invariances") {
    Tensor<double> in({2, 1, 1});
    in[0] = 0.0;
    in[1] = std::log(3.0);
    const Tensor<double> out = softmax_channels(in);
    CHECK(out[0] == doctest::Approx(0.25));
    CHECK(out[1] == doctest::Approx(0.75));

    std::mt19937 rng(6);
    Tensor<double> x({3, 4, 5});
    fill_uniform(x, rng, -5, 5);
    const Tensor<double> s = softmax_channels(x);
    const Eigen::Index plane = 20;
    for (Eigen::Index i = 0; i < plane; ++i) {
        double sum = 0;
        for (int c = 0; c < 3; ++c) {
            CHECK(s[c * plane + i] > 0.0);
            sum += s[c * plane + i];
        }
        CHECK(sum == doctest::Approx(1.0));
    }
    // shifting all channels by a constant leaves the result unchanged
    Tensor<double> shifted(x.shape());
    shifted.array() = x.array() + 7.5;
    const Tensor<double> s2 = softmax_channels(shifted);
    for (Eigen::Index i = 0; i < s.size(); ++i) CHECK(s[i] == doctest::Approx(s2[i]));

    Tensor<double> one({1, 2, 2});
    CHECK_THROWS_AS(softmax_channels(one), std::invalid_argument);
}

TEST_CASE("nearest upsampling duplicates pixels") {
    Tensor<double> in({1, 2, 2});
    in[0] = 1;
    in[1] = 2;
    in[2] = 3;
    in[3] = 4;
    const Tensor<double> out = upsample2x(in, UpsampleMode::kNearest);
    CHECK(out.dim(1) == 4);
    CHECK(out.dim(2) == 4);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) CHECK(out(0, y, x) == in(0, y / 2, x / 2));
}

TEST_CASE("bilinear upsampling matches the half-pixel oracle") {
    // 1-d profile [p, q]: outputs p, 0.75p + 0.25q, 0.25p + 0.75q, q
    Tensor<double> in({1, 1, 2});
    const double p = 2.0, q = 10.0;
    in[0] = p;
    in[1] = q;
    Tensor<double> row({1, 2, 2});
    row(0, 0, 0) = p;
    row(0, 0, 1) = q;
    row(0, 1, 0) = p;
    row(0, 1, 1) = q;
    const Tensor<double> out = upsample2x(row, UpsampleMode::kBilinear);
    for (int y = 0; y < 4; ++y) {
        CHECK(out(0, y, 0) == doctest::Approx(p));
        CHECK(out(0, y, 1) == doctest::Approx(0.75 * p + 0.25 * q));
        CHECK(out(0, y, 2) == doctest::Approx(0.25 * p + 0.75 * q));
        CHECK(out(0, y, 3) == doctest::Approx(q));
    }
}

TEST_CASE("bilinear upsampling preserves constants and the mean") {
    Tensor<double> c({2, 3, 5});
    c.array() = 4.25;
    const Tensor<double> out = upsample2x(c, UpsampleMode::kBilinear);
    for (Eigen::Index i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx(4.25));

    std::mt19937 rng(7);
    Tensor<double> x({1, 6, 6});
    fill_uniform(x, rng);
    const Tensor<double> up = upsample2x(x, UpsampleMode::kBilinear);
    // interior rows/cols average back exactly; border clamping keeps the
    // global mean within a loose bound
    CHECK(std::abs(up.vec().mean() - x.vec().mean()) < 0.2);
}

TEST_CASE("upsample backward is the adjoint of forward") {
    std::mt19937 rng(8);
    for (UpsampleMode mode : {UpsampleMode::kNearest, UpsampleMode::kBilinear}) {
        Tensor<double> x({2, 5, 7}), y({2, 10, 14});
        fill_uniform(x, rng);
        fill_uniform(y, rng);
        const Tensor<double> fx = upsample2x(x, mode);
        const Tensor<double> by = upsample2x_backward(y, 5, 7, mode);
        const double lhs = fx.vec().dot(y.vec());
        const double rhs = x.vec().dot(by.vec());
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
}

TEST_CASE("crossentropy of the uniform prediction is log 2") {
    Tensor<double> pred({2, 4, 4});
    pred.array() = 0.5;
    Mask target(4, 4);
    target.setZero();
    target(1, 2) = 1;
    CHECK(crossentropy_loss(pred, target) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("crossentropy is near zero for a confident correct prediction") {
    Tensor<double> pred({2, 2, 2});
    Mask target(2, 2);
    target.setZero();
    target(0, 0) = 1;
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x) {
            const bool fg = target(y, x) != 0;
            pred(1, y, x) = fg ? 1.0 - 1e-9 : 1e-9;
            pred(0, y, x) = fg ? 1e-9 : 1.0 - 1e-9;
        }
    CHECK(crossentropy_loss(pred, target) < 1e-6);
    CHECK(crossentropy_loss(pred, target) > 0.0);
}

TEST_CASE("crossentropy gradient matches finite differences through softmax") {
    std::mt19937 rng(9);
    Tensor<double> logits({2, 3, 3});
    fill_uniform(logits, rng, -2, 2);
    Mask target(3, 3);
    target.setZero();
    target(0, 1) = 1;
    target(2, 2) = 1;

    Tensor<double> grad;
    crossentropy_loss(softmax_channels(logits), target, &grad);
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
        const double fd = testutil::central_diff(logits[i], h, [&] {
            return crossentropy_loss(softmax_channels(logits), target);
        });
        CHECK(rel_err(fd, grad[i]) < 1e-5);
    }
}

TEST_CASE("crossentropy rejects shape mismatches") {
    Tensor<double> pred3({3, 2, 2});
    Mask t(2, 2);
    t.setZero();
    CHECK_THROWS_AS(crossentropy_loss(pred3, t), std::invalid_argument);
    Tensor<double> pred({2, 2, 2});
    Mask wrong(3, 2);
    wrong.setZero();
    CHECK_THROWS_AS(crossentropy_loss(pred, wrong), std::invalid_argument);
}

TEST_CASE("adam leaves parameters untouched on zero gradients") {
    LayerParams<double> p = LayerParams<double>::conv(2, 2, 1);
    std::mt19937 rng(10);
    fill_uniform(p.weights, rng);
    const Tensor<double> before = p.weights;
    AdamState<double> st = AdamState<double>::for_params(p);
    AdamConfig<double> cfg;
    p.zero_grad();
    adam_step(p, st, cfg, cfg.learning_rate);
    for (Eigen::Index i = 0; i < p.weights.size(); ++i)
        CHECK(p.weights[i] == doctest::Approx(before[i]));
}

TEST_CASE("first adam step moves by about the learning rate") {
    LayerParams<double> p = LayerParams<double>::conv(1, 1, 1);
    p.weights[0] = 0.0;
    p.grad_weights[0] = 3.7;  // any nonzero gradient
    AdamState<double> st = AdamState<double>::for_params(p);
    AdamConfig<double> cfg;
    adam_step(p, st, cfg, cfg.learning_rate);
    CHECK(p.weights[0] == doctest::Approx(-cfg.learning_rate).epsilon(1e-5));
}

TEST_CASE("learning-rate schedule decays by the configured factor") {
    AdamConfig<double> cfg;
    cfg.learning_rate = 1e-3;
    cfg.decay_factor = 0.2;
    cfg.decay_interval_epochs = 15;
    AdamOptimizer<double> opt(cfg);
    opt.set_epoch(0);
    CHECK(opt.effective_learning_rate() == doctest::Approx(1e-3));
    opt.set_epoch(14);
    CHECK(opt.effective_learning_rate() == doctest::Approx(1e-3));
    opt.set_epoch(15);
    CHECK(opt.effective_learning_rate() == doctest::Approx(2e-4));
    opt.set_epoch(30);
    CHECK(opt.effective_learning_rate() == doctest::Approx(4e-5));
}

TEST_CASE("adam drives a quadratic toward its minimum") {
    LayerParams<double> p = LayerParams<double>::conv(2, 2, 1);
    std::mt19937 rng(11);
    fill_uniform(p.weights, rng, -1, 1);
    fill_uniform(p.bias, rng, -1, 1);
    AdamConfig<double> cfg;
    cfg.learning_rate = 0.05;
    AdamOptimizer<double> opt(cfg);
    opt.attach(&p);
    const auto loss = [&] { return p.weights.vec().squaredNorm() + p.bias.vec().squaredNorm(); };
    const double initial = loss();
    for (int i = 0; i < 200; ++i) {
        opt.zero_grad();
        p.grad_weights.vec() = 2.0 * p.weights.vec();
        p.grad_bias.vec() = 2.0 * p.bias.vec();
        opt.step();
    }
    CHECK(loss() < 1e-4 * initial);
}

TEST_CASE("kaiming init has roughly the expected scale") {
    LayerParams<double> p = LayerParams<double>::conv(64, 64, 3);
    std::mt19937 rng(12);
    kaiming_init(p, rng);
    const double var = p.weights.vec().squaredNorm() / static_cast<double>(p.weights.size());
    const double expected = 2.0 / (64 * 9);
    CHECK(rel_err(var, expected) < 0.1);
    for (Eigen::Index i = 0; i < p.bias.size(); ++i) CHECK(p.bias[i] == 0.0);
}
