#include "segtrack/core/image_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <stdexcept>
#include <vector>

namespace segtrack {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// Reads any 8/16-bit PNG as 8-bit RGB rows.
std::vector<std::vector<png_byte>> read_png_rgb(const std::string& path, int& width, int& height) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("cannot open image: " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("failed to decode PNG: " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    width = static_cast<int>(png_get_image_width(png, info));
    height = static_cast<int>(png_get_image_height(png, info));
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);
    std::vector<std::vector<png_byte>> rows(static_cast<size_t>(height));
    std::vector<png_bytep> row_ptrs(static_cast<size_t>(height));
    for (int y = 0; y < height; ++y) {
        rows[static_cast<size_t>(y)].resize(static_cast<size_t>(width) * 3);
        row_ptrs[static_cast<size_t>(y)] = rows[static_cast<size_t>(y)].data();
    }
    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return rows;
}

void write_png(const std::string& path, int width, int height, int channels,
               const std::vector<png_byte>& pixels) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("cannot open for writing: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("failed to encode PNG: " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> row_ptrs(static_cast<size_t>(height));
    for (int y = 0; y < height; ++y)
        row_ptrs[static_cast<size_t>(y)] =
            const_cast<png_bytep>(pixels.data() + static_cast<size_t>(y) * width * channels);
    png_write_image(png, row_ptrs.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

png_byte to_byte(float v) {
    const float s = v * 255.0f + 0.5f;
    return static_cast<png_byte>(s < 0 ? 0 : (s > 255 ? 255 : s));
}

}  // namespace

Tensor<float> read_image_png(const std::string& path) {
    int w = 0, h = 0;
    const auto rows = read_png_rgb(path, w, h);
    Tensor<float> img({3, h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img(c, y, x) = rows[static_cast<size_t>(y)][static_cast<size_t>(x) * 3 + c] / 255.0f;
    return img;
}

void write_image_png(const std::string& path, const Tensor<float>& image) {
    const int C = image.dim(0), H = image.dim(1), W = image.dim(2);
    if (C != 1 && C != 3) throw std::invalid_argument("write_image_png: need 1 or 3 channels");
    std::vector<png_byte> pixels(static_cast<size_t>(H) * W * C);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < C; ++c)
                pixels[(static_cast<size_t>(y) * W + x) * C + c] = to_byte(image(c, y, x));
    write_png(path, W, H, C, pixels);
}

Mask read_mask_png(const std::string& path) {
    int w = 0, h = 0;
    const auto rows = read_png_rgb(path, w, h);
    Mask m(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            m(y, x) = rows[static_cast<size_t>(y)][static_cast<size_t>(x) * 3] >= 128 ? 1 : 0;
    return m;
}

void write_mask_png(const std::string& path, const Mask& mask) {
    const int H = static_cast<int>(mask.rows()), W = static_cast<int>(mask.cols());
    std::vector<png_byte> pixels(static_cast<size_t>(H) * W);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            pixels[static_cast<size_t>(y) * W + x] = mask(y, x) ? 255 : 0;
    write_png(path, W, H, 1, pixels);
}

}  // namespace segtrack
