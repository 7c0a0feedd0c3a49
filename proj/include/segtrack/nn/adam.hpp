#pragma once

#include <cmath>
#include <vector>

#include "segtrack/nn/layers.hpp"

namespace segtrack {

template <typename Scalar>
struct AdamConfig {
    Scalar learning_rate = Scalar(1e-3);
    Scalar beta1 = Scalar(0.9);
    Scalar beta2 = Scalar(0.999);
    Scalar epsilon = Scalar(1e-8);
    Scalar decay_factor = Scalar(0.2);
    int decay_interval_epochs = 15;
};

// Per-layer ADAM state (first/second moments for weights and bias).
template <typename Scalar>
struct AdamState {
    long step_count = 0;
    Tensor<Scalar> m_weights, v_weights;
    Tensor<Scalar> m_bias, v_bias;

    static AdamState for_params(const LayerParams<Scalar>& p) {
        AdamState s;
        s.m_weights = Tensor<Scalar>(p.weights.shape());
        s.v_weights = Tensor<Scalar>(p.weights.shape());
        s.m_bias = Tensor<Scalar>(p.bias.shape());
        s.v_bias = Tensor<Scalar>(p.bias.shape());
        return s;
    }
};

namespace detail {

template <typename Scalar>
void adam_update(Tensor<Scalar>& param, const Tensor<Scalar>& grad, Tensor<Scalar>& m,
                 Tensor<Scalar>& v, long t, Scalar lr, const AdamConfig<Scalar>& cfg) {
    const Scalar bc1 = Scalar(1) - std::pow(cfg.beta1, Scalar(t));
    const Scalar bc2 = Scalar(1) - std::pow(cfg.beta2, Scalar(t));
    m.array() = cfg.beta1 * m.array() + (Scalar(1) - cfg.beta1) * grad.array();
    v.array() = cfg.beta2 * v.array() + (Scalar(1) - cfg.beta2) * grad.array().square();
    param.array() -=
        lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.epsilon);
}

}  // namespace detail

// One bias-corrected ADAM step using the gradients stored in `params`.
// `learning_rate` is the effective (possibly decayed) rate.
template <typename Scalar>
void adam_step(LayerParams<Scalar>& params, AdamState<Scalar>& state,
               const AdamConfig<Scalar>& cfg, Scalar learning_rate) {
    ++state.step_count;
    detail::adam_update(params.weights, params.grad_weights, state.m_weights, state.v_weights,
                        state.step_count, learning_rate, cfg);
    detail::adam_update(params.bias, params.grad_bias, state.m_bias, state.v_bias,
                        state.step_count, learning_rate, cfg);
}

// Steps a set of layers with a shared schedule. The learning rate is decayed
// by decay_factor once per decay interval.
template <typename Scalar>
class AdamOptimizer {
public:
    explicit AdamOptimizer(AdamConfig<Scalar> cfg = {}) : cfg_(cfg) {}

    void attach(LayerParams<Scalar>* params) {
        layers_.push_back(params);
        states_.push_back(AdamState<Scalar>::for_params(*params));
    }

    void set_epoch(int epoch) {
        const int n = cfg_.decay_interval_epochs > 0 ? epoch / cfg_.decay_interval_epochs : 0;
        lr_ = cfg_.learning_rate * static_cast<Scalar>(std::pow(cfg_.decay_factor, n));
    }

    Scalar effective_learning_rate() const { return lr_ < Scalar(0) ? cfg_.learning_rate : lr_; }

    void step() {
        const Scalar lr = effective_learning_rate();
        for (size_t i = 0; i < layers_.size(); ++i) adam_step(*layers_[i], states_[i], cfg_, lr);
    }

    void zero_grad() {
        for (auto* l : layers_) l->zero_grad();
    }

private:
    AdamConfig<Scalar> cfg_;
    Scalar lr_ = Scalar(-1);
    std::vector<LayerParams<Scalar>*> layers_;
    std::vector<AdamState<Scalar>> states_;
};

}  // namespace segtrack
