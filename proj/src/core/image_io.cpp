// Copyright Contributors to the sixdgs project
// SPDX-License-Identifier: Apache-2.0

#include "sixdgs/io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <system_error>

namespace sixdgs {

void write_file_atomic(const std::filesystem::path &path, const std::string &data) {
    std::random_device rd;
    std::filesystem::path tmp = path;
    tmp += ".tmp" + std::to_string(rd());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out.write(data.data(), static_cast<std::streamsize>(data.size()));
        out.flush();
        if (!out) {
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw IoError("write failed for " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::error_code ignored;
        std::filesystem::remove(tmp, ignored);
        throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
    }
}

Image quantize8(const Image &image) {
    Image out = image;
    for (double &v : out.rgb) v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
    return out;
}

Image read_image(const std::filesystem::path &path, const Vec3 &background) {
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.string().c_str())) {
        const std::string msg = png.message;
        png_image_free(&png);
        throw IoError("cannot decode " + path.string() + ": " + msg);
    }
    png.format = PNG_FORMAT_RGBA;
    std::vector<unsigned char> pixels(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, pixels.data(), 0, nullptr)) {
        const std::string msg = png.message;
        png_image_free(&png);
        throw IoError("cannot decode " + path.string() + ": " + msg);
    }
    Image img(static_cast<int>(png.width), static_cast<int>(png.height));
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
    for (std::size_t p = 0; p < n; ++p) {
        const double a = pixels[4 * p + 3] / 255.0;
        for (int c = 0; c < 3; ++c) {
            const double v  = pixels[4 * p + c] / 255.0;
            img.rgb[3 * p + c] = a == 1.0 ? v : v * a + background[c] * (1.0 - a);
        }
    }
    return img;
}

void write_image(const std::filesystem::path &path, const Image &image) {
    if (image.width < 1 || image.height < 1) throw ValidationError("write_image: empty image");
    std::vector<unsigned char> pixels(image.sample_count());
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        pixels[i] =
            static_cast<unsigned char>(std::lround(std::clamp(image.rgb[i], 0.0, 1.0) * 255.0));
    }
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    png.width   = static_cast<png_uint_32>(image.width);
    png.height  = static_cast<png_uint_32>(image.height);
    png.format  = PNG_FORMAT_RGB;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&png, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
        throw IoError("cannot encode " + path.string() + ": " + png.message);
    }
    std::string encoded(size, '\0');
    if (!png_image_write_to_memory(&png, encoded.data(), &size, 0, pixels.data(), 0, nullptr)) {
        throw IoError("cannot encode " + path.string() + ": " + png.message);
    }
    encoded.resize(size);
    write_file_atomic(path, encoded);
}

} // namespace sixdgs
