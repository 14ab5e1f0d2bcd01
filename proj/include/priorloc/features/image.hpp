#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace priorloc {

/// 8-bit single-channel image, row-major.
class Image {
 public:
  Image() = default;
  Image(int width, int height, std::uint8_t fill = 0);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }
  std::uint8_t& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  std::uint8_t at(int x, int y) const {
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  const std::vector<std::uint8_t>& data() const { return data_; }
  std::vector<std::uint8_t>& data() { return data_; }

  bool operator==(const Image&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Float image used by the pyramid-based algorithms.
struct FloatImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  float at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  /// Bilinear sample with clamped borders.
  float sample(double x, double y) const;
};

FloatImage to_float(const Image& img);
/// Gaussian-smoothed 2x downsample.
FloatImage pyr_down(const FloatImage& img);

/// PGM (P2/P5, maxval <= 255) or PNG (gray, gray+alpha, RGB, RGBA; converted
/// to gray) by content. Throws Io for unreadable files, Corrupt for bad data.
Image read_image(const std::string& path);
void write_pgm(const std::string& path, const Image& img);
void write_png(const std::string& path, const Image& img);

}  // namespace priorloc
