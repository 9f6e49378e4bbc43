#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "idiff/image.hpp"

namespace idiff {

/// Ten per-view statistics (the two exposure ratios count as one named feature family).
struct FeatureVector {
  static constexpr std::size_t kSize = 10;
  static constexpr std::array<std::string_view, kSize> kNames = {
      "laplacian_var", "tenengrad",  "noise_std",           "high_freq_ratio",    "edge_density",
      "entropy",       "under_exposure_ratio", "over_exposure_ratio", "colorfulness", "mean_brightness"};

  double laplacian_var = 0;
  double tenengrad = 0;
  double noise_std = 0;
  double high_freq_ratio = 0;
  double edge_density = 0;
  double entropy = 0;
  double under_exposure_ratio = 0;
  double over_exposure_ratio = 0;
  double colorfulness = 0;
  double mean_brightness = 0;

  std::array<double, kSize> values() const {
    return {laplacian_var, tenengrad,           noise_std,           high_freq_ratio, edge_density,
            entropy,       under_exposure_ratio, over_exposure_ratio, colorfulness,    mean_brightness};
  }

  static FeatureVector from_values(const std::array<double, kSize>& v) {
    return {v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9]};
  }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

/// Feature vectors for the four views of one sample.
struct PairFeatures {
  FeatureVector a_global;
  FeatureVector a_crop;
  FeatureVector b_global;
  FeatureVector b_crop;

  const FeatureVector& view(ViewRole r) const {
    switch (r) {
      case ViewRole::AGlobal: return a_global;
      case ViewRole::ACrop: return a_crop;
      case ViewRole::BGlobal: return b_global;
      case ViewRole::BCrop: return b_crop;
    }
    throw std::invalid_argument("unknown view role");
  }
  FeatureVector& view(ViewRole r) { return const_cast<FeatureVector&>(std::as_const(*this).view(r)); }

  PairFeatures swapped() const { return {b_global, b_crop, a_global, a_crop}; }

  friend bool operator==(const PairFeatures&, const PairFeatures&) = default;
};

class FeatureError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline void require_luma(const ImageBuffer& img, int min_dim, const char* what) {
  if (img.channels() != 1) throw FeatureError(std::string(what) + ": expected a single-channel image");
  if (img.width() < min_dim || img.height() < min_dim) {
    throw FeatureError(std::string(what) + ": image smaller than " + std::to_string(min_dim) + "x" +
                       std::to_string(min_dim));
  }
}

// 3x3 correlation with replicate-padded borders; one response per pixel.
inline std::vector<double> filter3x3(const ImageBuffer& luma, const std::array<int, 9>& k) {
  const int w = luma.width();
  const int h = luma.height();
  std::vector<double> out(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int acc = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        const int yy = std::clamp(y + dy, 0, h - 1);
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = std::clamp(x + dx, 0, w - 1);
          acc += k[(dy + 1) * 3 + (dx + 1)] * luma.at(xx, yy);
        }
      }
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  return out;
}

inline constexpr std::array<int, 9> kLaplacian = {0, 1, 0, 1, -4, 1, 0, 1, 0};
inline constexpr std::array<int, 9> kSobelX = {-1, 0, 1, -2, 0, 2, -1, 0, 1};
inline constexpr std::array<int, 9> kSobelY = {-1, -2, -1, 0, 0, 0, 1, 2, 1};

inline std::array<std::size_t, 256> histogram(const ImageBuffer& luma) {
  std::array<std::size_t, 256> hist{};
  for (auto v : luma.pixels()) ++hist[v];
  return hist;
}

}  // namespace detail

/// BT.601 luma, rounded to nearest.
inline ImageBuffer to_luma(const ImageBuffer& rgb) {
  if (rgb.channels() != 3) throw FeatureError("to_luma: expected a 3-channel image");
  ImageBuffer out(rgb.width(), rgb.height(), 1);
  const auto& p = rgb.pixels();
  for (std::size_t i = 0; i < rgb.pixel_count(); ++i) {
    const double y = 0.299 * p[3 * i] + 0.587 * p[3 * i + 1] + 0.114 * p[3 * i + 2];
    out.pixels()[i] = static_cast<std::uint8_t>(std::clamp<long>(std::lround(y), 0, 255));
  }
  return out;
}

/// Population variance of the 4-neighbour Laplacian response.
inline double laplacian_var(const ImageBuffer& luma) {
  detail::require_luma(luma, 3, "laplacian_var");
  const auto r = detail::filter3x3(luma, detail::kLaplacian);
  double mean = 0;
  for (double v : r) mean += v;
  mean /= static_cast<double>(r.size());
  double var = 0;
  for (double v : r) var += (v - mean) * (v - mean);
  return var / static_cast<double>(r.size());
}

/// Mean of Gx^2 + Gy^2 over all pixels (3x3 Sobel).
inline double tenengrad(const ImageBuffer& luma) {
  detail::require_luma(luma, 3, "tenengrad");
  const auto gx = detail::filter3x3(luma, detail::kSobelX);
  const auto gy = detail::filter3x3(luma, detail::kSobelY);
  double acc = 0;
  for (std::size_t i = 0; i < gx.size(); ++i) acc += gx[i] * gx[i] + gy[i] * gy[i];
  return acc / static_cast<double>(gx.size());
}

/// Immerkaer's fast noise estimate over interior pixels.
inline double noise_std(const ImageBuffer& luma) {
  detail::require_luma(luma, 3, "noise_std");
  const int w = luma.width();
  const int h = luma.height();
  double acc = 0;
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      const int r = luma.at(x - 1, y - 1) - 2 * luma.at(x, y - 1) + luma.at(x + 1, y - 1)
                    - 2 * luma.at(x - 1, y) + 4 * luma.at(x, y) - 2 * luma.at(x + 1, y)
                    + luma.at(x - 1, y + 1) - 2 * luma.at(x, y + 1) + luma.at(x + 1, y + 1);
      acc += std::abs(r);
    }
  }
  const double interior = static_cast<double>(w - 2) * (h - 2);
  return std::sqrt(std::numbers::pi / 2.0) * (acc / interior) / 6.0;
}

/// Share of AC spectral energy at normalized radial frequency >= 0.25 (1.0 = Nyquist).
inline double high_freq_ratio(const ImageBuffer& luma) {
  detail::require_luma(luma, 8, "high_freq_ratio");
  const int w = luma.width();
  const int h = luma.height();
  double mean = 0;
  for (auto v : luma.pixels()) mean += v;
  mean /= static_cast<double>(luma.pixel_count());

  using cd = std::complex<double>;
  std::vector<cd> grid(luma.pixel_count());
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = luma.pixels()[i] - mean;

  Eigen::FFT<double> fft;
  std::vector<cd> in;
  std::vector<cd> out;
  in.resize(static_cast<std::size_t>(w));
  for (int y = 0; y < h; ++y) {
    std::copy_n(grid.begin() + static_cast<std::ptrdiff_t>(y) * w, w, in.begin());
    fft.fwd(out, in);
    std::copy(out.begin(), out.end(), grid.begin() + static_cast<std::ptrdiff_t>(y) * w);
  }
  in.resize(static_cast<std::size_t>(h));
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) in[y] = grid[static_cast<std::size_t>(y) * w + x];
    fft.fwd(out, in);
    for (int y = 0; y < h; ++y) grid[static_cast<std::size_t>(y) * w + x] = out[y];
  }

  auto normalized = [](int k, int n) {
    const int signed_k = k <= n / 2 ? k : k - n;
    return 2.0 * signed_k / n;
  };
  double total = 0;
  double high = 0;
  for (int v = 0; v < h; ++v) {
    const double fy = normalized(v, h);
    for (int u = 0; u < w; ++u) {
      if (u == 0 && v == 0) continue;
      const double fx = normalized(u, w);
      const double e = std::norm(grid[static_cast<std::size_t>(v) * w + u]);
      total += e;
      if (std::sqrt(fx * fx + fy * fy) >= 0.25) high += e;
    }
  }
  // Mean removal leaves round-off-level AC energy on constant images.
  if (total <= 1e-9 * static_cast<double>(luma.pixel_count())) return 0.0;
  return high / total;
}

/// Fraction of pixels whose Sobel magnitude exceeds twice the mean magnitude.
inline double edge_density(const ImageBuffer& luma) {
  detail::require_luma(luma, 3, "edge_density");
  const auto gx = detail::filter3x3(luma, detail::kSobelX);
  const auto gy = detail::filter3x3(luma, detail::kSobelY);
  std::vector<double> mag(gx.size());
  double mean = 0;
  for (std::size_t i = 0; i < gx.size(); ++i) {
    mag[i] = std::sqrt(gx[i] * gx[i] + gy[i] * gy[i]);
    mean += mag[i];
  }
  mean /= static_cast<double>(mag.size());
  if (mean == 0) return 0.0;
  std::size_t count = 0;
  for (double m : mag) count += m > 2.0 * mean ? 1 : 0;
  return static_cast<double>(count) / static_cast<double>(mag.size());
}

/// Shannon entropy (bits) of the 256-bin histogram.
inline double entropy(const ImageBuffer& luma) {
  detail::require_luma(luma, 1, "entropy");
  const auto hist = detail::histogram(luma);
  const double n = static_cast<double>(luma.pixel_count());
  double h = 0;
  for (auto c : hist) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return h;
}

struct ExposureRatios {
  double under = 0;
  double over = 0;
};

inline ExposureRatios exposure_ratios(const ImageBuffer& luma) {
  detail::require_luma(luma, 1, "exposure_ratios");
  std::size_t under = 0;
  std::size_t over = 0;
  for (auto v : luma.pixels()) {
    under += v < 10 ? 1 : 0;
    over += v > 245 ? 1 : 0;
  }
  const double n = static_cast<double>(luma.pixel_count());
  return {static_cast<double>(under) / n, static_cast<double>(over) / n};
}

/// Hasler-Suesstrunk colorfulness over the opponent channels rg and yb.
inline double colorfulness(const ImageBuffer& rgb) {
  if (rgb.channels() != 3) throw FeatureError("colorfulness: expected a 3-channel image");
  const auto& p = rgb.pixels();
  const double n = static_cast<double>(rgb.pixel_count());
  double sum_rg = 0, sum_yb = 0;
  for (std::size_t i = 0; i < rgb.pixel_count(); ++i) {
    const double r = p[3 * i], g = p[3 * i + 1], b = p[3 * i + 2];
    sum_rg += r - g;
    sum_yb += 0.5 * (r + g) - b;
  }
  const double mu_rg = sum_rg / n;
  const double mu_yb = sum_yb / n;
  double var_rg = 0, var_yb = 0;
  for (std::size_t i = 0; i < rgb.pixel_count(); ++i) {
    const double r = p[3 * i], g = p[3 * i + 1], b = p[3 * i + 2];
    const double drg = (r - g) - mu_rg;
    const double dyb = (0.5 * (r + g) - b) - mu_yb;
    var_rg += drg * drg;
    var_yb += dyb * dyb;
  }
  var_rg /= n;
  var_yb /= n;
  return std::sqrt(var_rg + var_yb) + 0.3 * std::sqrt(mu_rg * mu_rg + mu_yb * mu_yb);
}

inline double mean_brightness(const ImageBuffer& luma) {
  detail::require_luma(luma, 1, "mean_brightness");
  double acc = 0;
  for (auto v : luma.pixels()) acc += v;
  return acc / static_cast<double>(luma.pixel_count());
}

/// All ten statistics for one RGB view.
inline FeatureVector extract_features(const ImageBuffer& rgb) {
  const auto luma = to_luma(rgb);
  FeatureVector f;
  f.laplacian_var = laplacian_var(luma);
  f.tenengrad = tenengrad(luma);
  f.noise_std = noise_std(luma);
  f.high_freq_ratio = high_freq_ratio(luma);
  f.edge_density = edge_density(luma);
  f.entropy = entropy(luma);
  const auto exposure = exposure_ratios(luma);
  f.under_exposure_ratio = exposure.under;
  f.over_exposure_ratio = exposure.over;
  f.colorfulness = colorfulness(rgb);
  f.mean_brightness = mean_brightness(luma);
  return f;
}

inline PairFeatures extract_all(const ViewSet& views) {
  return {extract_features(views.a_global), extract_features(views.a_crop), extract_features(views.b_global),
          extract_features(views.b_crop)};
}

}  // namespace idiff
