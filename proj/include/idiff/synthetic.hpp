#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <random>
#include <string>
#include <vector>

#include "idiff/answer_model.hpp"
#include "idiff/codec.hpp"
#include "idiff/features.hpp"
#include "idiff/image.hpp"
#include "idiff/manifest.hpp"
#include "idiff/rationale.hpp"

namespace idiff::synthetic {

/// Portable RNG wrapper: the std distributions are implementation-defined, these are not.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int integer(int lo, int hi) { return lo + static_cast<int>(engine_() % static_cast<std::uint64_t>(hi - lo + 1)); }

  double gaussian() {
    if (spare_) {
      const double v = *spare_;
      spare_.reset();
      return v;
    }
    double u1 = uniform();
    while (u1 <= 0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2 * std::numbers::pi * u2);
    return r * std::cos(2 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

inline std::uint8_t clamp_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

/// Mean over a (2r+1)^2 window with replicate padding; r = 0 returns a copy.
inline ImageBuffer box_blur(const ImageBuffer& img, int radius) {
  if (radius <= 0) return img;
  ImageBuffer out(img.width(), img.height(), img.channels());
  const int w = img.width(), h = img.height(), ch = img.channels();
  const double area = (2.0 * radius + 1) * (2.0 * radius + 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        int acc = 0;
        for (int dy = -radius; dy <= radius; ++dy) {
          const int yy = std::clamp(y + dy, 0, h - 1);
          for (int dx = -radius; dx <= radius; ++dx) acc += img.at(std::clamp(x + dx, 0, w - 1), yy, c);
        }
        out.at(x, y, c) = clamp_u8(acc / area);
      }
    }
  }
  return out;
}

/// Adds i.i.d. Gaussian noise (same draw to every channel of a pixel when luma_only).
inline ImageBuffer add_gaussian_noise(const ImageBuffer& img, double sigma, Rng& rng, bool luma_only = false) {
  ImageBuffer out = img;
  const int ch = img.channels();
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    const double shared = luma_only ? sigma * rng.gaussian() : 0.0;
    for (int c = 0; c < ch; ++c) {
      const double n = luma_only ? shared : sigma * rng.gaussian();
      out.pixels()[i * ch + c] = clamp_u8(img.pixels()[i * ch + c] + n);
    }
  }
  return out;
}

/// 2x2 average downsampling.
inline ImageBuffer downsample2(const ImageBuffer& img) {
  ImageBuffer out(img.width() / 2, img.height() / 2, img.channels());
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        const int s = img.at(2 * x, 2 * y, c) + img.at(2 * x + 1, 2 * y, c) + img.at(2 * x, 2 * y + 1, c) +
                      img.at(2 * x + 1, 2 * y + 1, c);
        out.at(x, y, c) = clamp_u8(s / 4.0);
      }
    }
  }
  return out;
}

inline ImageBuffer crop(const ImageBuffer& img, int x0, int y0, int w, int h) {
  ImageBuffer out(w, h, img.channels());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < img.channels(); ++c) out.at(x, y, c) = img.at(x0 + x, y0 + y, c);
    }
  }
  return out;
}

/// Procedural photo-like RGB content: shaded background, blobs and rectangles, and fine texture.
inline ImageBuffer natural_image(int size, ContentDomain domain, Rng& rng) {
  ImageBuffer img(size, size, 3);
  std::vector<double> plane(static_cast<std::size_t>(size) * size * 3);
  const double base[3] = {rng.uniform(60, 190), rng.uniform(60, 190), rng.uniform(60, 190)};
  const double gx = rng.uniform(-0.6, 0.6), gy = rng.uniform(-0.6, 0.6);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      for (int c = 0; c < 3; ++c) plane[(static_cast<std::size_t>(y) * size + x) * 3 + c] = base[c] + gx * x + gy * y;

  auto paint = [&](auto inside, const double* color) {
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x)
        if (inside(x, y))
          for (int c = 0; c < 3; ++c) plane[(static_cast<std::size_t>(y) * size + x) * 3 + c] = color[c];
  };

  if (domain == ContentDomain::Person) {
    // Face-like ellipse with hair-like stripes above it.
    const double cx = rng.uniform(0.4, 0.6) * size, cy = rng.uniform(0.45, 0.6) * size;
    const double rx = rng.uniform(0.18, 0.26) * size, ry = rng.uniform(0.24, 0.32) * size;
    const double skin[3] = {rng.uniform(170, 230), rng.uniform(120, 170), rng.uniform(90, 140)};
    paint([&](int x, int y) { return std::pow((x - cx) / rx, 2) + std::pow((y - cy) / ry, 2) <= 1.0; }, skin);
    const double hair[3] = {rng.uniform(20, 70), rng.uniform(15, 50), rng.uniform(10, 40)};
    const double period = rng.uniform(2.5, 4.0);
    paint([&](int x, int y) {
      return y < cy - 0.6 * ry && std::abs(x - cx) < 1.2 * rx && std::fmod(x + 0.3 * y, period) < period / 2;
    }, hair);
  } else {
    // Building-like rectangles with window grids.
    const int n = rng.integer(3, 6);
    for (int k = 0; k < n; ++k) {
      const int x0 = rng.integer(0, size - 8), y0 = rng.integer(size / 4, size - 8);
      const int w = rng.integer(6, size / 2), h = rng.integer(8, size / 2);
      const double col[3] = {rng.uniform(40, 220), rng.uniform(40, 220), rng.uniform(40, 220)};
      const double win[3] = {col[0] * 0.5, col[1] * 0.5, col[2] * 0.6};
      paint([&](int x, int y) { return x >= x0 && x < x0 + w && y >= y0 && y < y0 + h; }, col);
      paint([&](int x, int y) {
        return x >= x0 + 1 && x < x0 + w - 1 && y >= y0 + 1 && y < y0 + h - 1 && (x - x0) % 4 == 1 && (y - y0) % 5 == 1;
      }, win);
    }
  }

  // Fine texture: a few oriented sinusoids plus mild grain.
  const int waves = 3;
  for (int k = 0; k < waves; ++k) {
    const double fx = rng.uniform(0.15, 0.9), fy = rng.uniform(0.15, 0.9), amp = rng.uniform(4, 10), ph = rng.uniform(0, 6.28);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x)
        for (int c = 0; c < 3; ++c) plane[(static_cast<std::size_t>(y) * size + x) * 3 + c] += amp * std::sin(fx * x + fy * y + ph);
  }
  for (std::size_t i = 0; i < plane.size(); ++i) img.pixels()[i] = clamp_u8(plane[i] + 2.0 * rng.gaussian());
  return img;
}

struct Degradation {
  int blur_radius = 1;
  double blur_mix = 1.0;  // blend weight of the blurred image
  double noise_sigma = 5;
};

/// degraded = (1 - mix) * img + mix * box_blur(img, r), then additive Gaussian noise.
inline ImageBuffer degrade(const ImageBuffer& img, const Degradation& d, Rng& rng) {
  const auto blurred = box_blur(img, d.blur_radius);
  ImageBuffer mixed(img.width(), img.height(), img.channels());
  for (std::size_t i = 0; i < img.pixels().size(); ++i) {
    mixed.pixels()[i] = clamp_u8((1 - d.blur_mix) * img.pixels()[i] + d.blur_mix * blurred.pixels()[i]);
  }
  return add_gaussian_noise(mixed, d.noise_sigma, rng);
}

/// Strengths drawn per pair. Person pairs are dominated by blur, scene pairs by noise.
inline Degradation draw_degradation(ContentDomain d, Rng& rng) {
  if (d == ContentDomain::Person) return {1, rng.uniform(0.2, 0.7), rng.uniform(0.5, 2.0)};
  return {1, rng.uniform(0.0, 0.2), rng.uniform(2.0, 6.0)};
}

struct BenchmarkOptions {
  std::size_t pairs = 200;
  std::uint64_t seed = 7;
  int native_size = 96;  // global views are downsampled to half this; crops keep native resolution
  double person_fraction = 0.5;
  bool with_rationales = true;
};

/// Labelled pairs where one side is the clean render and the other its degraded copy.
inline std::vector<PairSample> make_benchmark(const BenchmarkOptions& opt) {
  Rng rng(opt.seed);
  std::vector<PairSample> out;
  out.reserve(opt.pairs);
  const int half = opt.native_size / 2;
  for (std::size_t i = 0; i < opt.pairs; ++i) {
    PairSample s;
    s.domain = rng.uniform() < opt.person_fraction ? ContentDomain::Person : ContentDomain::Scene;
    char id[32];
    std::snprintf(id, sizeof id, "syn%04zu", i);
    s.id = id;
    const auto clean = natural_image(opt.native_size, s.domain, rng);
    const auto degraded = degrade(clean, draw_degradation(s.domain, rng), rng);
    const int cx = rng.integer(0, opt.native_size - half), cy = rng.integer(0, opt.native_size - half);
    const bool clean_left = rng.uniform() < 0.5;
    const auto& left = clean_left ? clean : degraded;
    const auto& right = clean_left ? degraded : clean;
    s.global_pair = hconcat(downsample2(left), downsample2(right));
    s.crop_pair = hconcat(crop(left, cx, cy, half, half), crop(right, cx, cy, half, half));
    s.label = clean_left ? Preference::A : Preference::B;
    if (opt.with_rationales) {
      const auto features = extract_all(decompose(s));
      s.reference_rationale = render_reference_rationale(features, *s.label, select_template(s.domain, TemplateStyle::DomainSpecific));
    }
    out.push_back(std::move(s));
  }
  return out;
}

/// Writes PNGs under dir/images and a manifest at dir/manifest.jsonl; returns the manifest path.
inline std::filesystem::path write_benchmark(const std::filesystem::path& dir, const std::vector<PairSample>& samples) {
  std::filesystem::create_directories(dir / "images");
  const auto manifest = dir / "manifest.jsonl";
  std::ofstream out(manifest, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write manifest: " + manifest.string());
  for (const auto& s : samples) {
    const std::string g = "images/" + s.id + "_global.png";
    const std::string c = "images/" + s.id + "_crop.png";
    save_png(dir / g, s.global_pair);
    save_png(dir / c, s.crop_pair);
    out << manifest_record(s, g, c).dump() << '\n';
  }
  return manifest;
}

}  // namespace idiff::synthetic
