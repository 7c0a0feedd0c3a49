#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace segtrack {

// Binary segmentation mask, rows = image height, cols = width, values {0,1}.
using Mask = Eigen::Array<uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

inline long foreground_count(const Mask& m) {
    return (m != 0).count();
}

}  // namespace segtrack
