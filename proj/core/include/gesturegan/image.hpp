#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "gesturegan/conditioning.hpp"
#include "gesturegan/tensor.hpp"

namespace gesturegan {

class ImageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// 8-bit interleaved image (row-major, channels innermost).
struct Image8 {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;

  Image8() = default;
  Image8(int w, int h, int c, std::uint8_t fill = 0)
      : width(w), height(h), channels(c),
        pixels(static_cast<std::size_t>(w) * h * c, fill) {}

  std::uint8_t& at(int x, int y, int ch) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + ch];
  }
  std::uint8_t at(int x, int y, int ch) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + ch];
  }

  friend bool operator==(const Image8&, const Image8&) = default;
};

// PNG I/O (gray, gray+alpha, RGB, RGBA, palette; 8-bit output). Alpha is
// dropped and palettes are expanded on read.
Image8 read_png(const std::filesystem::path& path);
// Atomic write (temporary sibling file, then rename).
void write_png(const std::filesystem::path& path, const Image8& image);

Image8 to_rgb(const Image8& image);
Image8 mirror_horizontal(const Image8& image);

// Area-average resampling: each output pixel is the overlap-weighted mean of
// the source pixels its footprint covers. Rounds to nearest on output.
Image8 resize_area(const Image8& image, int width, int height);

// 8-bit [0,255] -> [-1,1] float tensor {1,C,H,W}.
nn::Tensor image_to_tensor(const Image8& image);
// [-1,1] tensor sample -> 8-bit image; values are clamped then rounded.
Image8 tensor_to_image(const nn::Tensor& tensor, int sample = 0);
// Map values in [0,1] -> tensor {1,1,H,W} (same range).
nn::Tensor map_to_tensor(const ConditioningMap& map);
// round(255 * value) grayscale export.
Image8 map_to_image(const ConditioningMap& map);

// Places images left to right (heights must match; grayscale is expanded to RGB).
Image8 side_by_side(const std::vector<Image8>& images);

}  // namespace gesturegan
