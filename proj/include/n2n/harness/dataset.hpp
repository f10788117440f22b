#pragma once

#include <cmath>
#include <filesystem>
#include <iostream>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "n2n/core/rng.hpp"
#include "n2n/harness/image_io.hpp"
#include "n2n/mri/spectral.hpp"

namespace n2n::harness {

inline constexpr const char* kSyntheticTag = "synthetic";
inline constexpr const char* kPhantomTag = "phantom";

/// Procedural RGB-or-gray image in [0,1]: a gradient background, flat and textured shapes.
inline Array<double> synthetic_image(int size, int channels, Rng& rng) {
  Array<double> img({1, channels, size, size});
  auto color = [&] {
    std::vector<double> c(channels);
    for (auto& v : c) v = uniform01(rng);
    return c;
  };
  const auto c0 = color(), c1 = color();
  const double ang = 2.0 * std::numbers::pi * uniform01(rng);
  const double ca = std::cos(ang), sa = std::sin(ang);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double t = std::clamp(0.5 + ((x - size / 2.0) * ca + (y - size / 2.0) * sa) / size, 0.0, 1.0);
      for (int c = 0; c < channels; ++c) img.at(0, c, y, x) = (1 - t) * c0[c] + t * c1[c];
    }
  const int shapes = std::uniform_int_distribution<int>(3, 8)(rng);
  for (int s = 0; s < shapes; ++s) {
    const int kind = std::uniform_int_distribution<int>(0, 2)(rng);
    const auto fg = color(), fg2 = color();
    const double cx = size * uniform01(rng), cy = size * uniform01(rng);
    const double rx = size * (0.08 + 0.3 * uniform01(rng)), ry = size * (0.08 + 0.3 * uniform01(rng));
    const double period = 3.0 + 10.0 * uniform01(rng), phase = 2.0 * std::numbers::pi * uniform01(rng);
    const double dir = std::numbers::pi * uniform01(rng);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const double dx = (x + 0.5 - cx) / rx, dy = (y + 0.5 - cy) / ry;
        const bool inside = kind == 0 ? dx * dx + dy * dy <= 1.0 : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
        if (!inside) continue;
        double t = 0.0;
        if (kind == 2) t = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * (x * std::cos(dir) + y * std::sin(dir)) / period + phase);
        for (int c = 0; c < channels; ++c) img.at(0, c, y, x) = (1 - t) * fg[c] + t * fg2[c];
      }
  }
  return img;
}

/// Random-access source of clean crops in [0,1]; crop(i) is deterministic in (seed, i).
class ImageSource {
 public:
  virtual ~ImageSource() = default;
  virtual Array<double> crop(std::uint64_t index) const = 0;
  virtual int channels() const = 0;
  virtual int crop_size() const = 0;
};

class SyntheticSource final : public ImageSource {
 public:
  SyntheticSource(int crop, int channels, std::uint64_t seed) : crop_(crop), channels_(channels), seed_(seed) {}
  Array<double> crop(std::uint64_t index) const override {
    Rng rng = make_stream(seed_, index, StreamRole::clean);
    return synthetic_image(crop_, channels_, rng);
  }
  int channels() const override { return channels_; }
  int crop_size() const override { return crop_; }

 private:
  int crop_, channels_;
  std::uint64_t seed_;
};

/// Randomly jittered Shepp-Logan phantoms (single channel).
class PhantomSource final : public ImageSource {
 public:
  PhantomSource(int size, std::uint64_t seed) : size_(size), seed_(seed) {}
  Array<double> crop(std::uint64_t index) const override {
    Rng rng = make_stream(seed_, index, StreamRole::clean);
    return mri::random_phantom(size_, rng);
  }
  int channels() const override { return 1; }
  int crop_size() const override { return size_; }

 private:
  int size_;
  std::uint64_t seed_;
};

/// Random crops from a directory of PNG files. Unreadable or too-small files are skipped
/// with a warning; an empty result is fatal.
class PngDirectorySource final : public ImageSource {
 public:
  PngDirectorySource(const std::string& dir, int crop, int channels, std::uint64_t seed, std::ostream& log = std::cerr)
      : crop_(crop), channels_(channels), seed_(seed) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw ConfigError("dataset path '" + dir + "' is not a directory");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      try {
        Array<double> img = io::read_png(f.string(), channels);
        if (img.height() < crop || img.width() < crop) {
          log << "warning: skipping " << f.string() << " (smaller than crop " << crop << ")\n";
          continue;
        }
        images_.push_back(std::move(img));
      } catch (const std::exception& e) {
        log << "warning: skipping " << f.string() << ": " << e.what() << "\n";
      }
    }
    if (images_.empty()) throw ConfigError("dataset '" + dir + "' contains no usable images");
  }

  Array<double> crop(std::uint64_t index) const override {
    Rng rng = make_stream(seed_, index, StreamRole::clean);
    const Array<double>& img = images_[std::uniform_int_distribution<std::size_t>(0, images_.size() - 1)(rng)];
    const int y0 = std::uniform_int_distribution<int>(0, img.height() - crop_)(rng);
    const int x0 = std::uniform_int_distribution<int>(0, img.width() - crop_)(rng);
    Array<double> out({1, channels_, crop_, crop_});
    for (int c = 0; c < channels_; ++c)
      for (int y = 0; y < crop_; ++y)
        for (int x = 0; x < crop_; ++x) out.at(0, c, y, x) = img.at(0, c, y0 + y, x0 + x);
    return out;
  }
  int channels() const override { return channels_; }
  int crop_size() const override { return crop_; }
  std::size_t image_count() const { return images_.size(); }

 private:
  int crop_, channels_;
  std::uint64_t seed_;
  std::vector<Array<double>> images_;
};

/// `path` is a PNG directory or one of the built-in tags "synthetic" / "phantom".
inline std::shared_ptr<ImageSource> make_source(const std::string& path, int crop, int channels, std::uint64_t seed,
                                                std::ostream& log = std::cerr) {
  if (crop <= 0) throw ConfigError("crop size must be positive");
  if (path == kSyntheticTag) return std::make_shared<SyntheticSource>(crop, channels, seed);
  if (path == kPhantomTag) {
    if (channels != 1) throw ConfigError("phantom dataset is single-channel");
    return std::make_shared<PhantomSource>(crop, seed);
  }
  return std::make_shared<PngDirectorySource>(path, crop, channels, seed, log);
}

/// Sequential view over an ImageSource: the stream of crops for one seed.
class CropStream {
 public:
  explicit CropStream(std::shared_ptr<const ImageSource> src) : src_(std::move(src)) {}
  Array<double> next() { return src_->crop(next_++); }

 private:
  std::shared_ptr<const ImageSource> src_;
  std::uint64_t next_ = 0;
};

inline CropStream load_dataset(const std::string& path, int crop, Rng& rng, int channels = 3) {
  return CropStream(make_source(path, crop, channels, rng()));
}

}  // namespace n2n::harness
