#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "graspforge/errors.hpp"

namespace graspforge {

// Row-major image, pixel (u, v) = column u, row v. Pixel centres sit at
// integer coordinates.
template <typename T>
class Image
{
public:
  Image() = default;
  Image(int width, int height, const T& fill = T{})
      : width_(width), height_(height),
        pixels_(static_cast<std::size_t>(checked_area(width, height)), fill)
  {
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return pixels_.size(); }
  bool empty() const { return pixels_.empty(); }

  bool contains(int u, int v) const
  {
    return u >= 0 && v >= 0 && u < width_ && v < height_;
  }

  T& at(int u, int v) { return pixels_[index(u, v)]; }
  const T& at(int u, int v) const { return pixels_[index(u, v)]; }

  std::span<T> pixels() { return pixels_; }
  std::span<const T> pixels() const { return pixels_; }

  bool same_shape(int width, int height) const
  {
    return width_ == width && height_ == height;
  }
  template <typename U>
  bool same_shape(const Image<U>& other) const
  {
    return same_shape(other.width(), other.height());
  }

  friend bool operator==(const Image&, const Image&) = default;

private:
  static long checked_area(int width, int height)
  {
    if (width < 0 || height < 0)
      throw InvalidArgument("image dimensions must be non-negative");
    return static_cast<long>(width) * height;
  }
  std::size_t index(int u, int v) const
  {
    return static_cast<std::size_t>(v) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(u);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> pixels_;
};

struct Rgb8
{
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  friend bool operator==(const Rgb8&, const Rgb8&) = default;
};

// Depth along the optical axis in metres; 0.0 marks a pixel with no surface.
using DepthImage = Image<double>;
using RgbImage = Image<Rgb8>;
// Binary mask, 0 or 1.
using Mask = Image<std::uint8_t>;

inline bool is_valid_depth(double d) { return d > 0.0; }

struct QuantizedDepthImage
{
  int width = 0;
  int height = 0;
  double z_near = 0.0;
  double z_far = 0.0;
  int bit_depth = 16;
  std::vector<std::uint16_t> codes;
  std::vector<std::uint8_t> valid;  // 1 where the pixel carries a depth

  std::uint16_t max_code() const
  {
    return static_cast<std::uint16_t>((1u << bit_depth) - 1u);
  }
  friend bool operator==(const QuantizedDepthImage&,
                         const QuantizedDepthImage&) = default;
};

}  // namespace graspforge
