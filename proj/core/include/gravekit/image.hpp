#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gravekit {

/// 8-bit single channel raster, row-major, origin top-left.
class GrayImage {
public:
    GrayImage() = default;
    GrayImage(int width, int height, std::uint8_t fill = 0);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    bool empty() const noexcept { return width_ == 0 || height_ == 0; }

    std::uint8_t at(int x, int y) const { return pixels_[index(x, y)]; }
    std::uint8_t& at(int x, int y) { return pixels_[index(x, y)]; }

    std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }
    std::span<std::uint8_t> pixels() noexcept { return pixels_; }

    bool operator==(const GrayImage&) const = default;

private:
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> pixels_;
};

/// Interleaved 8-bit RGB raster.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;
};

/// ITU-R BT.601 luma, rounded to nearest.
std::uint8_t luminance(std::uint8_t r, std::uint8_t g, std::uint8_t b) noexcept;
GrayImage to_gray(const RgbImage& image);

/// Integer pixel rectangle [x0, x1) x [y0, y1).
struct PixelRect {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    int width() const noexcept { return x1 - x0; }
    int height() const noexcept { return y1 - y0; }
    bool empty() const noexcept { return x1 <= x0 || y1 <= y0; }
};

/// Copies the part of `rect` that lies inside the image. The result may be
/// empty when the rectangle is entirely outside.
GrayImage crop(const GrayImage& image, PixelRect rect);

/// Smallest integer rectangle covering a real-valued box, clipped to the image.
PixelRect covering_rect(double x_min, double y_min, double x_max, double y_max, int width,
                        int height) noexcept;

// PNG codec (libpng). Decoding accepts gray, gray+alpha, RGB, RGBA and
// palette images of any bit depth; everything is reduced to 8-bit.
struct DecodedPng {
    int width = 0;
    int height = 0;
    int channels = 0;  // 1 or 3 after reduction
    std::vector<std::uint8_t> data;
};

DecodedPng decode_png(std::span<const std::uint8_t> bytes);
GrayImage decode_png_gray(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(const GrayImage& image);
std::vector<std::uint8_t> encode_png(const RgbImage& image);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace gravekit
