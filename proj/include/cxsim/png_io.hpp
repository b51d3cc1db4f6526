#pragma once

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "cxsim/tensor.hpp"

namespace cxsim {

// 8-bit grayscale or RGB PNG, scaled to [0,1] by division by 255.
inline ImageGrid load_png(const std::string& path) {
    std::unique_ptr<std::FILE, detail::FileCloser> fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("cannot open file: " + path);

    unsigned char sig[8];
    if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw std::invalid_argument(path + " is not a PNG file");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("png_create_info_struct failed");
    }
    std::vector<unsigned char> interleaved;
    std::vector<png_bytep> row_ptrs;
    png_uint_32 width = 0, height = 0;
    int bit_depth = 0, color_type = 0;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("libpng failed to decode " + path);
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    png_get_IHDR(png, info, &width, &height, &bit_depth, &color_type, nullptr, nullptr, nullptr);
    if (bit_depth != 8 || (color_type != PNG_COLOR_TYPE_GRAY && color_type != PNG_COLOR_TYPE_RGB)) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::invalid_argument(path + ": only 8-bit grayscale or RGB PNG is supported (got depth " +
                                    std::to_string(bit_depth) + ", color type " +
                                    std::to_string(color_type) + ")");
    }
    const std::size_t channels = color_type == PNG_COLOR_TYPE_GRAY ? 1 : 3;
    interleaved.resize(static_cast<std::size_t>(width) * height * channels);
    row_ptrs.resize(height);
    for (png_uint_32 r = 0; r < height; ++r)
        row_ptrs[r] = interleaved.data() + static_cast<std::size_t>(r) * width * channels;
    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    std::vector<double> values(interleaved.size());
    for (std::size_t i = 0; i < interleaved.size(); ++i)
        values[i] = static_cast<double>(interleaved[i]) / 255.0;
    return ImageGrid(height, width, channels, std::move(values));
}

// Quantizes with round(v*255); round-trip error is at most 1/(2*255).
inline void save_png(const ImageGrid& image, const std::string& path) {
    std::unique_ptr<std::FILE, detail::FileCloser> fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("cannot open file for writing: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("png_create_info_struct failed");
    }
    std::vector<unsigned char> interleaved(image.pixel_count());
    std::vector<png_bytep> row_ptrs(image.height);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng failed to encode " + path);
    }
    png_init_io(png, fp.get());
    const int color_type = image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
                 static_cast<png_uint_32>(image.height), 8, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t i = 0; i < image.data.size(); ++i)
        interleaved[i] = static_cast<unsigned char>(std::lround(image.data[i] * 255.0));
    for (std::size_t r = 0; r < image.height; ++r)
        row_ptrs[r] = interleaved.data() + r * image.width * image.channels;
    png_write_image(png, row_ptrs.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    if (std::fflush(fp.get()) != 0) throw std::runtime_error("write error: " + path);
}

}  // namespace cxsim
