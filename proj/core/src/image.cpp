#include "gesturegan/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>

namespace gesturegan {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

Image8 read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) {
    throw ImageError("cannot open image: " + path.string());
  }
  png_byte header[8];
  if (std::fread(header, 1, 8, file.get()) != 8 || png_sig_cmp(header, 0, 8) != 0) {
    throw ImageError("not a PNG file: " + path.string());
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageError("libpng initialisation failed");
  }
  Image8 img;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageError("corrupt PNG file: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) {
    png_set_strip_alpha(png);
  }
  png_read_update_info(png, info);
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.channels = png_get_channels(png, info);
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height * img.channels);
  rows.resize(static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) {
    rows[static_cast<std::size_t>(y)] =
        img.pixels.data() + static_cast<std::size_t>(y) * img.width * img.channels;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  if (img.channels != 1 && img.channels != 3) {
    throw ImageError("unsupported PNG channel layout in " + path.string());
  }
  return img;
}

void write_png(const std::filesystem::path& path, const Image8& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw ImageError("write_png: only gray and RGB images are supported");
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    FilePtr file(std::fopen(tmp.c_str(), "wb"));
    if (!file) {
      throw ImageError("cannot open for writing: " + tmp.string());
    }
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
      png_destroy_write_struct(&png, &info);
      throw ImageError("libpng initialisation failed");
    }
    std::vector<png_bytep> rows(static_cast<std::size_t>(image.height));
    if (setjmp(png_jmpbuf(png))) {
      png_destroy_write_struct(&png, &info);
      file.reset();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw ImageError("failed writing PNG: " + path.string());
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
                 static_cast<png_uint_32>(image.height), 8,
                 image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < image.height; ++y) {
      rows[static_cast<std::size_t>(y)] = const_cast<png_bytep>(
          image.pixels.data() + static_cast<std::size_t>(y) * image.width * image.channels);
    }
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
  }
  std::filesystem::rename(tmp, path);
}

Image8 to_rgb(const Image8& image) {
  if (image.channels == 3) return image;
  Image8 out(image.width, image.height, 3);
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    for (int c = 0; c < 3; ++c) out.pixels[i * 3 + c] = image.pixels[i];
  }
  return out;
}

Image8 mirror_horizontal(const Image8& image) {
  Image8 out = image;
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < image.channels; ++c) {
        out.at(x, y, c) = image.at(image.width - 1 - x, y, c);
      }
    }
  }
  return out;
}

Image8 resize_area(const Image8& image, int width, int height) {
  if (width <= 0 || height <= 0) {
    throw ImageError("resize_area: target size must be positive");
  }
  if (width == image.width && height == image.height) return image;
  // Separable box filter: per-axis lists of (source index, weight).
  auto weights = [](int src, int dst) {
    std::vector<std::vector<std::pair<int, double>>> out(static_cast<std::size_t>(dst));
    const double scale = static_cast<double>(src) / dst;
    for (int o = 0; o < dst; ++o) {
      const double lo = o * scale;
      const double hi = (o + 1) * scale;
      for (int s = static_cast<int>(std::floor(lo)); s < static_cast<int>(std::ceil(hi)) && s < src;
           ++s) {
        const double overlap = std::min<double>(hi, s + 1) - std::max<double>(lo, s);
        if (overlap > 0.0) out[static_cast<std::size_t>(o)].emplace_back(s, overlap / scale);
      }
    }
    return out;
  };
  const auto wx = weights(image.width, width);
  const auto wy = weights(image.height, height);
  Image8 out(width, height, image.channels);
  std::vector<double> acc(static_cast<std::size_t>(image.channels));
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (const auto& [sy, fy] : wy[static_cast<std::size_t>(y)]) {
        for (const auto& [sx, fx] : wx[static_cast<std::size_t>(x)]) {
          for (int c = 0; c < image.channels; ++c) {
            acc[static_cast<std::size_t>(c)] += fy * fx * image.at(sx, sy, c);
          }
        }
      }
      for (int c = 0; c < image.channels; ++c) out.at(x, y, c) = to_byte(acc[static_cast<std::size_t>(c)]);
    }
  }
  return out;
}

nn::Tensor image_to_tensor(const Image8& image) {
  nn::Tensor t({1, image.channels, image.height, image.width});
  for (int c = 0; c < image.channels; ++c) {
    for (int y = 0; y < image.height; ++y) {
      for (int x = 0; x < image.width; ++x) {
        t.at(0, c, y, x) = static_cast<float>(image.at(x, y, c) / 127.5 - 1.0);
      }
    }
  }
  return t;
}

Image8 tensor_to_image(const nn::Tensor& tensor, int sample) {
  const nn::Shape s = tensor.shape();
  if (s.c != 1 && s.c != 3) {
    throw ImageError("tensor_to_image: expected 1 or 3 channels, got " + s.str());
  }
  Image8 out(s.w, s.h, s.c);
  for (int c = 0; c < s.c; ++c) {
    for (int y = 0; y < s.h; ++y) {
      for (int x = 0; x < s.w; ++x) {
        const double v = std::clamp<double>(tensor.at(sample, c, y, x), -1.0, 1.0);
        out.at(x, y, c) = to_byte((v + 1.0) * 127.5);
      }
    }
  }
  return out;
}

nn::Tensor map_to_tensor(const ConditioningMap& map) {
  return nn::Tensor({1, 1, map.height, map.width}, map.pixels);
}

Image8 map_to_image(const ConditioningMap& map) {
  Image8 out(map.width, map.height, 1);
  for (std::size_t i = 0; i < map.pixels.size(); ++i) {
    out.pixels[i] = to_byte(255.0 * map.pixels[i]);
  }
  return out;
}

Image8 side_by_side(const std::vector<Image8>& images) {
  if (images.empty()) throw ImageError("side_by_side: no images");
  int width = 0;
  const int height = images.front().height;
  for (const auto& im : images) {
    if (im.height != height) throw ImageError("side_by_side: heights differ");
    width += im.width;
  }
  Image8 out(width, height, 3);
  int x0 = 0;
  for (const auto& im : images) {
    const Image8 rgb = to_rgb(im);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < rgb.width; ++x) {
        for (int c = 0; c < 3; ++c) out.at(x0 + x, y, c) = rgb.at(x, y, c);
      }
    }
    x0 += rgb.width;
  }
  return out;
}

}  // namespace gesturegan
