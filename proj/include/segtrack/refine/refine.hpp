#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "segtrack/core/tensor.hpp"
#include "segtrack/nn/layers.hpp"

namespace segtrack {

// One x2 upscaling stage: resolution doubling, two 3x3 convs with ReLU, plus
// a 3x3-adjusted skip from the matching pyramid level.
template <typename Scalar>
struct RefineStage {
    LayerParams<Scalar> conv_a, conv_b;
    LayerParams<Scalar> skip_adjust;
};

// Fusion of the L/F/P channels followed by three upscaling stages; the last
// stage has a single conv, no skip, and feeds a two-class softmax.
template <typename Scalar>
struct RefineNet {
    LayerParams<Scalar> fusion;  // 3 -> trunk
    RefineStage<Scalar> stage1, stage2;
    LayerParams<Scalar> head;  // trunk -> 2
    UpsampleMode upsample_mode = UpsampleMode::kBilinear;

    static RefineNet create(int trunk_channels = 64, int pyramid_channels = 13) {
        RefineNet net;
        net.fusion = LayerParams<Scalar>::conv(trunk_channels, 3, 3);
        for (RefineStage<Scalar>* st : {&net.stage1, &net.stage2}) {
            st->conv_a = LayerParams<Scalar>::conv(trunk_channels, trunk_channels, 3);
            st->conv_b = LayerParams<Scalar>::conv(trunk_channels, trunk_channels, 3);
            st->skip_adjust = LayerParams<Scalar>::conv(trunk_channels, pyramid_channels, 3);
        }
        net.head = LayerParams<Scalar>::conv(2, trunk_channels, 3);
        return net;
    }

    template <typename Rng>
    void init(Rng& rng) {
        for (auto& [name, p] : layers()) {
            (void)name;
            kaiming_init(*p, rng);
        }
    }

    std::vector<std::pair<std::string, LayerParams<Scalar>*>> layers() {
        return {{"refine.fusion", &fusion},
                {"refine.stage1.conv_a", &stage1.conv_a},
                {"refine.stage1.conv_b", &stage1.conv_b},
                {"refine.stage1.skip", &stage1.skip_adjust},
                {"refine.stage2.conv_a", &stage2.conv_a},
                {"refine.stage2.conv_b", &stage2.conv_b},
                {"refine.stage2.skip", &stage2.skip_adjust},
                {"refine.head", &head}};
    }
};

template <typename Scalar>
struct RefineStageCache {
    Tensor<Scalar> input, upsampled;
    Tensor<Scalar> pre_a, post_a, pre_b;
    Tensor<Scalar> skip, pre_skip;
};

template <typename Scalar>
struct RefineCache {
    Tensor<Scalar> fused_input;  // [3,h,w]
    Tensor<Scalar> pre_fusion;
    Tensor<Scalar> trunk0;
    RefineStageCache<Scalar> s1, s2;
    Tensor<Scalar> trunk2, up3, logits, prob;
};

namespace detail {

template <typename Scalar>
Tensor<Scalar> run_stage(const Tensor<Scalar>& input, const Tensor<Scalar>* skip,
                         const RefineStage<Scalar>& stage, UpsampleMode mode,
                         RefineStageCache<Scalar>* cache) {
    Tensor<Scalar> up = upsample2x(input, mode);
    Tensor<Scalar> pre_a = conv2d(up, stage.conv_a);
    Tensor<Scalar> post_a = relu(pre_a);
    Tensor<Scalar> pre_b = conv2d(post_a, stage.conv_b);
    Tensor<Scalar> out = relu(pre_b);
    if (skip) {
        if (skip->dim(1) != out.dim(1) || skip->dim(2) != out.dim(2))
            throw std::invalid_argument("upscale_stage: skip shape mismatch");
        Tensor<Scalar> pre_skip = conv2d(*skip, stage.skip_adjust);
        Tensor<Scalar> adj = relu(pre_skip);
        out.array() += adj.array();
        if (cache) {
            cache->skip = *skip;
            cache->pre_skip = std::move(pre_skip);
        }
    }
    if (cache) {
        cache->input = input;
        cache->upsampled = std::move(up);
        cache->pre_a = std::move(pre_a);
        cache->post_a = std::move(post_a);
        cache->pre_b = std::move(pre_b);
    }
    return out;
}

}  // namespace detail

// Standalone upscaling stage (skip optional; the UP* head path passes none
// and is handled inside refine_forward).
template <typename Scalar>
Tensor<Scalar> upscale_stage(const Tensor<Scalar>& input, const Tensor<Scalar>* skip,
                             const RefineStage<Scalar>& stage,
                             UpsampleMode mode = UpsampleMode::kBilinear) {
    return detail::run_stage(input, skip, stage, mode, static_cast<RefineStageCache<Scalar>*>(nullptr));
}

// Full pathway: concat(L,F,P) -> conv+ReLU -> two skip stages -> UP* ->
// softmax. `skip_stride4` and `skip_stride2` are the pyramid levels at twice
// and four times the model resolution.
template <typename Scalar>
Tensor<Scalar> refine_forward(const Tensor<Scalar>& L, const Tensor<Scalar>& F,
                              const Tensor<Scalar>& P, const Tensor<Scalar>& skip_stride4,
                              const Tensor<Scalar>& skip_stride2, const RefineNet<Scalar>& net,
                              RefineCache<Scalar>* cache = nullptr) {
    const int h = L.dim(1), w = L.dim(2);
    Tensor<Scalar> x({3, h, w});
    x.channel(0) = L.channel(0);
    x.channel(1) = F.channel(0);
    x.channel(2) = P.channel(0);

    Tensor<Scalar> pre_fusion = conv2d(x, net.fusion);
    Tensor<Scalar> trunk0 = relu(pre_fusion);
    Tensor<Scalar> trunk1 = detail::run_stage(trunk0, &skip_stride4, net.stage1, net.upsample_mode,
                                              cache ? &cache->s1 : nullptr);
    Tensor<Scalar> trunk2 = detail::run_stage(trunk1, &skip_stride2, net.stage2, net.upsample_mode,
                                              cache ? &cache->s2 : nullptr);
    Tensor<Scalar> up3 = upsample2x(trunk2, net.upsample_mode);
    Tensor<Scalar> logits = conv2d(up3, net.head);
    Tensor<Scalar> prob = softmax_channels(logits);
    if (cache) {
        cache->fused_input = std::move(x);
        cache->pre_fusion = std::move(pre_fusion);
        cache->trunk0 = std::move(trunk0);
        cache->trunk2 = std::move(trunk2);
        cache->up3 = std::move(up3);
        cache->logits = std::move(logits);
        cache->prob = prob;
    }
    return prob;
}

template <typename Scalar>
struct RefineInputGrads {
    Tensor<Scalar> grad_L, grad_F, grad_P;
};

namespace detail {

template <typename Scalar>
Tensor<Scalar> stage_backward(const RefineStageCache<Scalar>& cache, const Tensor<Scalar>& grad_out,
                              RefineStage<Scalar>& stage, UpsampleMode mode) {
    if (cache.skip.size() > 0) {
        Tensor<Scalar> g_skip = relu_backward(cache.pre_skip, grad_out);
        conv2d_backward(cache.skip, g_skip, stage.skip_adjust);
    }
    Tensor<Scalar> g = relu_backward(cache.pre_b, grad_out);
    g = conv2d_backward(cache.post_a, g, stage.conv_b);
    g = relu_backward(cache.pre_a, g);
    g = conv2d_backward(cache.upsampled, g, stage.conv_a);
    return upsample2x_backward(g, cache.input.dim(1), cache.input.dim(2), mode);
}

}  // namespace detail

// Backward from pre-softmax logit gradients; accumulates parameter gradients
// and returns the gradients on the fused input channels.
template <typename Scalar>
RefineInputGrads<Scalar> refine_backward(const RefineCache<Scalar>& cache,
                                         const Tensor<Scalar>& grad_logits,
                                         RefineNet<Scalar>& net) {
    Tensor<Scalar> g = conv2d_backward(cache.up3, grad_logits, net.head);
    g = upsample2x_backward(g, cache.trunk2.dim(1), cache.trunk2.dim(2), net.upsample_mode);
    g = detail::stage_backward(cache.s2, g, net.stage2, net.upsample_mode);
    g = detail::stage_backward(cache.s1, g, net.stage1, net.upsample_mode);
    g = relu_backward(cache.pre_fusion, g);
    g = conv2d_backward(cache.fused_input, g, net.fusion);

    const int h = g.dim(1), w = g.dim(2);
    RefineInputGrads<Scalar> grads;
    grads.grad_L = Tensor<Scalar>({1, h, w});
    grads.grad_F = Tensor<Scalar>({1, h, w});
    grads.grad_P = Tensor<Scalar>({1, h, w});
    grads.grad_L.channel(0) = g.channel(0);
    grads.grad_F.channel(0) = g.channel(1);
    grads.grad_P.channel(0) = g.channel(2);
    return grads;
}

}  // namespace segtrack
