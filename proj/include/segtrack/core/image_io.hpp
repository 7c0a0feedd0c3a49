#pragma once

#include <string>

#include "segtrack/core/mask.hpp"
#include "segtrack/core/tensor.hpp"

namespace segtrack {

// 8-bit PNG I/O. Images are [3,H,W] tensors with values in [0,1].
Tensor<float> read_image_png(const std::string& path);
void write_image_png(const std::string& path, const Tensor<float>& image);

// Masks are single-channel, 0 background / 255 foreground on disk.
Mask read_mask_png(const std::string& path);
void write_mask_png(const std::string& path, const Mask& mask);

}  // namespace segtrack
