#pragma once

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <png.h>

#include "sefusion/errors.hpp"
#include "sefusion/tensor.hpp"

namespace sefusion {

/// 8-bit RGB raster, row-major, 3 bytes per pixel.
struct Image8 {
    int64_t h = 0;
    int64_t w = 0;
    std::vector<uint8_t> rgb;

    uint8_t& at(int64_t y, int64_t x, int64_t c) {
        return rgb[static_cast<size_t>((y * w + x) * 3 + c)];
    }
    uint8_t at(int64_t y, int64_t x, int64_t c) const {
        return rgb[static_cast<size_t>((y * w + x) * 3 + c)];
    }
};

namespace image {

// ---------------------------------------------------------------------------
// PPM (binary P6, maxval 255)

inline Image8 decode_ppm(const std::string& bytes, const std::string& origin) {
    size_t pos = 0;
    auto skip_space = [&] {
        while (pos < bytes.size()) {
            if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
                ++pos;
            } else if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else {
                break;
            }
        }
    };
    auto read_int = [&]() -> int64_t {
        skip_space();
        if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos])))
            throw FormatError(origin + ": malformed PPM header");
        int64_t v = 0;
        while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos])))
            v = v * 10 + (bytes[pos++] - '0');
        return v;
    };

    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6')
        throw FormatError(origin + ": not a binary P6 PPM");
    pos = 2;
    const int64_t w = read_int();
    const int64_t h = read_int();
    const int64_t maxval = read_int();
    if (w < 1 || h < 1) throw FormatError(origin + ": invalid PPM dimensions");
    if (maxval != 255)
        throw FormatError(origin + ": PPM maxval " + std::to_string(maxval) +
                          " unsupported (must be 8-bit)");
    if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
        throw FormatError(origin + ": malformed PPM header");
    ++pos;  // single whitespace before raster data

    const size_t need = static_cast<size_t>(w * h * 3);
    if (bytes.size() - pos < need) throw FormatError(origin + ": truncated PPM raster");
    Image8 img;
    img.h = h;
    img.w = w;
    img.rgb.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                   bytes.begin() + static_cast<std::ptrdiff_t>(pos + need));
    return img;
}

inline void encode_ppm(const Image8& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "P6\n" << img.w << " " << img.h << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.rgb.data()),
              static_cast<std::streamsize>(img.rgb.size()));
    if (!out) throw IoError("write failed for " + path);
}

// ---------------------------------------------------------------------------
// PNG (8-bit RGB only, via libpng)

inline Image8 decode_png(const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw IoError("cannot open " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        std::fclose(fp);
        throw IoError("libpng initialization failed");
    }

    Image8 img;
    std::vector<png_bytep> rows;
    std::string error;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw FormatError(path + ": PNG decode failed" + (error.empty() ? "" : ": " + error));
    }

    png_init_io(png, fp);
    png_read_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    if (depth != 8 || color != PNG_COLOR_TYPE_RGB) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw FormatError(path + ": must be 8-bit RGB PNG (depth " + std::to_string(depth) +
                          ", color type " + std::to_string(color) + ")");
    }

    const int passes = png_set_interlace_handling(png);
    png_read_update_info(png, info);

    img.h = static_cast<int64_t>(h);
    img.w = static_cast<int64_t>(w);
    img.rgb.resize(static_cast<size_t>(img.h * img.w * 3));
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y)
        rows[y] = reinterpret_cast<png_bytep>(&img.rgb[static_cast<size_t>(y) * w * 3]);
    for (int p = 0; p < passes; ++p)
        for (png_uint_32 y = 0; y < h; ++y) png_read_row(png, rows[y], nullptr);
    png_read_end(png, nullptr);

    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return img;
}

inline void encode_png(const Image8& img, const std::string& path) {
    if (img.h < 1 || img.w < 1 ||
        img.rgb.size() != static_cast<size_t>(img.h * img.w * 3))
        throw ContractError("encode_png: inconsistent image buffer");

    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw IoError("cannot open " + path + " for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        std::fclose(fp);
        throw IoError("libpng initialization failed");
    }

    std::vector<png_bytep> rows(static_cast<size_t>(img.h));
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw IoError(path + ": PNG encode failed");
    }

    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.w), static_cast<png_uint_32>(img.h), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int64_t y = 0; y < img.h; ++y)
        rows[static_cast<size_t>(y)] =
            const_cast<png_bytep>(&img.rgb[static_cast<size_t>(y * img.w * 3)]);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);

    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

}  // namespace image

/// Decode an 8-bit RGB image, dispatching on content magic (PNG signature
/// or "P6").
inline Image8 decode_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), "\x89PNG\r\n\x1a\n", 8) == 0)
        return image::decode_png(path);
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6')
        return image::decode_ppm(bytes, path);
    throw FormatError(path + ": unsupported image format (need 8-bit RGB PNG or P6 PPM)");
}

/// x / 255 into [0,1].
template <typename T>
Tensor<T> normalize(const Image8& img) {
    Tensor<T> t = Tensor<T>::zeros(Shape{img.h, img.w, 3});
    for (size_t i = 0; i < img.rgb.size(); ++i)
        t.v[i] = static_cast<T>(img.rgb[i]) / T(255);
    return t;
}

/// Quantize a [0,1] tensor back to 8 bits, round half up.
template <typename T>
Image8 quantize_u8(const Tensor<T>& t) {
    if (t.shape.rank() != 3 || t.shape.dim(2) != 3)
        throw ShapeError("quantize_u8 expects [H,W,3], got " + t.shape.str());
    Image8 img;
    img.h = t.shape.dim(0);
    img.w = t.shape.dim(1);
    img.rgb.resize(t.v.size());
    for (size_t i = 0; i < t.v.size(); ++i) {
        const T scaled = t.v[i] * T(255) + T(0.5);
        const T clamped = std::min(std::max(scaled, T(0)), T(255));
        img.rgb[i] = static_cast<uint8_t>(std::floor(clamped));
    }
    return img;
}

}  // namespace sefusion
