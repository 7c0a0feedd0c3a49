#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "segtrack/core/tensor.hpp"

namespace testutil {

template <typename Scalar>
void fill_uniform(segtrack::Tensor<Scalar>& t, std::mt19937& rng, double lo = -1.0,
                  double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = static_cast<Scalar>(dist(rng));
}

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max(std::abs(a) + std::abs(b), 1e-6);
}

// Central finite difference of a scalar functional with respect to one entry.
template <typename Fn>
double central_diff(double& slot, double h, Fn&& eval) {
    const double saved = slot;
    slot = saved + h;
    const double fp = eval();
    slot = saved - h;
    const double fm = eval();
    slot = saved;
    return (fp - fm) / (2 * h);
}

}  // namespace testutil
