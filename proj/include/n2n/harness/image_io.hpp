#pragma once

#include <png.h>

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "n2n/core/array.hpp"

namespace n2n::io {

/// Reads an 8-bit PNG as a (1, channels, H, W) image in [0,1]. channels: 1 (gray) or 3 (RGB).
inline Array<double> read_png(const std::string& path, int channels = 3) {
  require(channels == 1 || channels == 3, "read_png: channels must be 1 or 3");
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str()))
    throw std::runtime_error("cannot read PNG '" + path + "': " + img.message);
  img.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&img);
    throw std::runtime_error("cannot decode PNG '" + path + "': " + img.message);
  }
  const int h = static_cast<int>(img.height), w = static_cast<int>(img.width);
  Array<double> out({1, channels, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c)
        out.at(0, c, y, x) = buf[(static_cast<std::size_t>(y) * w + x) * channels + c] / 255.0;
  return out;
}

/// Writes image 0 of an NCHW array (1 or 3 channels, values clipped to [0,1]) as 8-bit PNG.
template <class T>
void write_png(const std::string& path, const Array<T>& image) {
  require(image.rank() == 4 && (image.channels() == 1 || image.channels() == 3),
          "write_png: need a 1- or 3-channel NCHW image, got " + shape_string(image.shape()));
  const int h = image.height(), w = image.width(), ch = image.channels();
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(h) * w * ch);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c) {
        const double v = std::clamp(static_cast<double>(image.at(0, c, y, x)), 0.0, 1.0);
        buf[(static_cast<std::size_t>(y) * w + x) * ch + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(w);
  img.height = static_cast<png_uint_32>(h);
  img.format = ch == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr))
    throw std::runtime_error("cannot write PNG '" + path + "': " + img.message);
}

inline constexpr std::array<char, 4> kRawMagic = {'N', '2', 'N', 'F'};

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("raw float file truncated");
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f32(std::ostream& os, float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  put_u32(os, u);
}

inline float get_f32(std::istream& is) {
  const std::uint32_t u = get_u32(is);
  float f;
  std::memcpy(&f, &u, 4);
  return f;
}

}  // namespace detail

/// Raw float image: "N2NF", u32 height, u32 width, u32 channels (little-endian), then
/// height*width*channels little-endian float32 values in row-major (y, x, c) order.
template <class T>
void write_raw(const std::string& path, const Array<T>& image) {
  require(image.rank() == 4 && image.batch() == 1, "write_raw: need a single NCHW image, got " + shape_string(image.shape()));
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  os.write(kRawMagic.data(), 4);
  detail::put_u32(os, static_cast<std::uint32_t>(image.height()));
  detail::put_u32(os, static_cast<std::uint32_t>(image.width()));
  detail::put_u32(os, static_cast<std::uint32_t>(image.channels()));
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x)
      for (int c = 0; c < image.channels(); ++c) detail::put_f32(os, static_cast<float>(image.at(0, c, y, x)));
}

inline Array<double> read_raw(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  std::array<char, 4> magic{};
  is.read(magic.data(), 4);
  if (!is || magic != kRawMagic) throw std::runtime_error("'" + path + "' is not an N2NF raw float file");
  const int h = static_cast<int>(detail::get_u32(is));
  const int w = static_cast<int>(detail::get_u32(is));
  const int c = static_cast<int>(detail::get_u32(is));
  Array<double> out({1, c, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int k = 0; k < c; ++k) out.at(0, k, y, x) = detail::get_f32(is);
  return out;
}

}  // namespace n2n::io
