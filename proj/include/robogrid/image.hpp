#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "robogrid/error.hpp"

namespace robogrid {

inline constexpr int kChannels = 3;

struct Size {
  int height = 0;
  int width = 0;

  friend bool operator==(const Size&, const Size&) = default;
};

inline std::string to_string(Size s) {
  return std::to_string(s.width) + "x" + std::to_string(s.height);
}

// Pixel coordinate: x is the column, y is the row.
struct Point {
  int x = 0;
  int y = 0;

  friend bool operator==(const Point&, const Point&) = default;
};

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

// An 8-bit RGB raster. Pixels are stored row-major with interleaved channels,
// which is also the byte order PNG uses for 8-bit RGB.
class Frame {
 public:
  Frame(int height, int width, Rgb fill = {}) : height_(height), width_(width) {
    check_dims(height, width);
    pixels_.resize(static_cast<std::size_t>(height) * width * kChannels);
    for (std::size_t i = 0; i < pixels_.size(); i += kChannels) {
      pixels_[i] = fill.r;
      pixels_[i + 1] = fill.g;
      pixels_[i + 2] = fill.b;
    }
  }

  Frame(int height, int width, std::vector<std::uint8_t> pixels)
      : height_(height), width_(width), pixels_(std::move(pixels)) {
    check_dims(height, width);
    if (pixels_.size() != static_cast<std::size_t>(height) * width * kChannels) {
      throw InvalidInput("pixel buffer holds " + std::to_string(pixels_.size()) +
                         " bytes, expected " +
                         std::to_string(static_cast<std::size_t>(height) * width * kChannels));
    }
  }

  int height() const { return height_; }
  int width() const { return width_; }
  Size size() const { return {height_, width_}; }

  std::span<const std::uint8_t> pixels() const { return pixels_; }
  std::span<std::uint8_t> pixels() { return pixels_; }

  bool contains(Point p) const { return p.x >= 0 && p.y >= 0 && p.x < width_ && p.y < height_; }

  Rgb at(int row, int col) const {
    const std::size_t i = offset(row, col);
    return {pixels_[i], pixels_[i + 1], pixels_[i + 2]};
  }

  void set(int row, int col, Rgb c) {
    const std::size_t i = offset(row, col);
    pixels_[i] = c.r;
    pixels_[i + 1] = c.g;
    pixels_[i + 2] = c.b;
  }

  // Byte span of one row (width * 3 bytes).
  std::span<const std::uint8_t> row(int r) const {
    return std::span<const std::uint8_t>(pixels_).subspan(offset(r, 0),
                                                          static_cast<std::size_t>(width_) * kChannels);
  }
  std::span<std::uint8_t> row(int r) {
    return std::span<std::uint8_t>(pixels_).subspan(offset(r, 0),
                                                    static_cast<std::size_t>(width_) * kChannels);
  }

  friend bool operator==(const Frame&, const Frame&) = default;

 private:
  static void check_dims(int height, int width) {
    if (height < 1 || width < 1) {
      throw InvalidInput("frame dimensions must be positive, got " + std::to_string(width) + "x" +
                         std::to_string(height));
    }
  }

  std::size_t offset(int row, int col) const {
    return (static_cast<std::size_t>(row) * width_ + col) * kChannels;
  }

  int height_;
  int width_;
  std::vector<std::uint8_t> pixels_;
};

// Single-channel real-valued image, used for luma/SSIM.
struct GrayImage {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  GrayImage(int h, int w, double fill = 0.0)
      : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {
    if (h < 1 || w < 1) throw InvalidInput("gray image dimensions must be positive");
  }

  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * width + c]; }
  double& at(int r, int c) { return values[static_cast<std::size_t>(r) * width + c]; }
};

}  // namespace robogrid
