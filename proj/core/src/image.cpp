#include "gravekit/image.hpp"

#include "gravekit/error.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

namespace gravekit {

GrayImage::GrayImage(int width, int height, std::uint8_t fill)
    : width_(width), height_(height),
      pixels_(static_cast<std::size_t>(std::max(width, 0)) * static_cast<std::size_t>(std::max(height, 0)),
              fill) {}

std::uint8_t luminance(std::uint8_t r, std::uint8_t g, std::uint8_t b) noexcept {
    return static_cast<std::uint8_t>((299u * r + 587u * g + 114u * b + 500u) / 1000u);
}

GrayImage to_gray(const RgbImage& image) {
    GrayImage out(image.width, image.height);
    auto dst = out.pixels();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] = luminance(image.rgb[3 * i], image.rgb[3 * i + 1], image.rgb[3 * i + 2]);
    }
    return out;
}

GrayImage crop(const GrayImage& image, PixelRect rect) {
    rect.x0 = std::clamp(rect.x0, 0, image.width());
    rect.x1 = std::clamp(rect.x1, 0, image.width());
    rect.y0 = std::clamp(rect.y0, 0, image.height());
    rect.y1 = std::clamp(rect.y1, 0, image.height());
    if (rect.empty()) return {};
    GrayImage out(rect.width(), rect.height());
    for (int y = 0; y < rect.height(); ++y) {
        for (int x = 0; x < rect.width(); ++x) out.at(x, y) = image.at(rect.x0 + x, rect.y0 + y);
    }
    return out;
}

PixelRect covering_rect(double x_min, double y_min, double x_max, double y_max, int width,
                        int height) noexcept {
    PixelRect r;
    r.x0 = std::clamp(static_cast<int>(std::floor(x_min)), 0, width);
    r.y0 = std::clamp(static_cast<int>(std::floor(y_min)), 0, height);
    r.x1 = std::clamp(static_cast<int>(std::ceil(x_max)), 0, width);
    r.y1 = std::clamp(static_cast<int>(std::ceil(y_max)), 0, height);
    return r;
}

DecodedPng decode_png(std::span<const std::uint8_t> bytes) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (bytes.empty() || !png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
        throw Error(ErrorCode::UndecodableRaster, bytes.empty() ? "empty buffer" : img.message);
    }
    const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
    img.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    DecodedPng out;
    out.width = static_cast<int>(img.width);
    out.height = static_cast<int>(img.height);
    out.channels = color ? 3 : 1;
    out.data.resize(PNG_IMAGE_SIZE(img));
    // Composite any alpha onto white, the colour of paper.
    png_color background{255, 255, 255};
    if (!png_image_finish_read(&img, &background, out.data.data(), 0, nullptr)) {
        std::string message = img.message;
        png_image_free(&img);
        throw Error(ErrorCode::UndecodableRaster, message);
    }
    return out;
}

GrayImage decode_png_gray(std::span<const std::uint8_t> bytes) {
    DecodedPng png = decode_png(bytes);
    if (png.channels == 3) {
        return to_gray(RgbImage{png.width, png.height, std::move(png.data)});
    }
    GrayImage out(png.width, png.height);
    std::copy(png.data.begin(), png.data.end(), out.pixels().begin());
    return out;
}

namespace {

std::vector<std::uint8_t> encode(int width, int height, std::uint32_t format, const std::uint8_t* data) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(width);
    img.height = static_cast<png_uint_32>(height);
    img.format = format;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&img, nullptr, &size, 0, data, 0, nullptr)) {
        throw Error(ErrorCode::StorageFailure, std::string("png sizing failed: ") + img.message);
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&img, out.data(), &size, 0, data, 0, nullptr)) {
        throw Error(ErrorCode::StorageFailure, std::string("png encoding failed: ") + img.message);
    }
    out.resize(size);
    return out;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const GrayImage& image) {
    return encode(image.width(), image.height(), PNG_FORMAT_GRAY, image.pixels().data());
}

std::vector<std::uint8_t> encode_png(const RgbImage& image) {
    return encode(image.width, image.height, PNG_FORMAT_RGB, image.rgb.data());
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::UndecodableRaster, "cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::StorageFailure, "cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace gravekit
