#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace idiff {

/// Raised when an image or view set violates a size/layout invariant.
class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Row-major interleaved 8-bit image.
class ImageBuffer {
 public:
  ImageBuffer() = default;

  ImageBuffer(int width, int height, int channels, std::uint8_t fill = 0)
      : width_(width), height_(height), channels_(channels) {
    check_shape(width, height, channels);
    pixels_.assign(static_cast<std::size_t>(width) * height * channels, fill);
  }

  ImageBuffer(int width, int height, int channels, std::vector<std::uint8_t> pixels)
      : width_(width), height_(height), channels_(channels), pixels_(std::move(pixels)) {
    check_shape(width, height, channels);
    if (pixels_.size() != static_cast<std::size_t>(width) * height * channels) {
      throw ImageError("pixel buffer length does not match width*height*channels");
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  bool empty() const noexcept { return pixels_.empty(); }
  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }

  const std::vector<std::uint8_t>& pixels() const noexcept { return pixels_; }
  std::vector<std::uint8_t>& pixels() noexcept { return pixels_; }

  std::uint8_t at(int x, int y, int c = 0) const {
    return pixels_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  std::uint8_t& at(int x, int y, int c = 0) {
    return pixels_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  /// Copy of columns [x0, x0 + w), all rows.
  ImageBuffer columns(int x0, int w) const {
    if (x0 < 0 || w < 1 || x0 + w > width_) throw ImageError("column range out of bounds");
    ImageBuffer out(w, height_, channels_);
    const std::size_t row_bytes = static_cast<std::size_t>(w) * channels_;
    for (int y = 0; y < height_; ++y) {
      const auto* src = pixels_.data() + (static_cast<std::size_t>(y) * width_ + x0) * channels_;
      auto* dst = out.pixels_.data() + static_cast<std::size_t>(y) * row_bytes;
      std::copy(src, src + row_bytes, dst);
    }
    return out;
  }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

 private:
  static void check_shape(int width, int height, int channels) {
    if (width < 1 || height < 1) throw ImageError("image dimensions must be >= 1");
    if (channels != 1 && channels != 3) throw ImageError("image must have 1 or 3 channels");
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<std::uint8_t> pixels_;
};

/// Left | right horizontal concatenation.
inline ImageBuffer hconcat(const ImageBuffer& left, const ImageBuffer& right) {
  if (left.height() != right.height()) throw ImageError("cannot concatenate images of differing heights");
  if (left.channels() != right.channels()) throw ImageError("cannot concatenate images of differing channel counts");
  const int w = left.width() + right.width();
  ImageBuffer out(w, left.height(), left.channels());
  const std::size_t lrow = static_cast<std::size_t>(left.width()) * left.channels();
  const std::size_t rrow = static_cast<std::size_t>(right.width()) * right.channels();
  for (int y = 0; y < left.height(); ++y) {
    auto* dst = out.pixels().data() + static_cast<std::size_t>(y) * (lrow + rrow);
    const auto* l = left.pixels().data() + static_cast<std::size_t>(y) * lrow;
    const auto* r = right.pixels().data() + static_cast<std::size_t>(y) * rrow;
    std::copy(l, l + lrow, dst);
    std::copy(r, r + rrow, dst + lrow);
  }
  return out;
}

inline ImageBuffer gray_to_rgb(const ImageBuffer& gray) {
  if (gray.channels() == 3) return gray;
  ImageBuffer out(gray.width(), gray.height(), 3);
  for (std::size_t i = 0; i < gray.pixel_count(); ++i) {
    const auto v = gray.pixels()[i];
    out.pixels()[3 * i] = v;
    out.pixels()[3 * i + 1] = v;
    out.pixels()[3 * i + 2] = v;
  }
  return out;
}

enum class ContentDomain { Person, Scene };

/// A = left image preferred, B = right image preferred.
enum class Preference { A, B };

inline Preference flip(Preference p) noexcept { return p == Preference::A ? Preference::B : Preference::A; }

inline std::string_view to_string(ContentDomain d) noexcept {
  return d == ContentDomain::Person ? "person" : "scene";
}

inline std::string_view to_string(Preference p) noexcept { return p == Preference::A ? "A" : "B"; }

inline std::optional<ContentDomain> parse_domain(std::string_view s) noexcept {
  if (s == "person") return ContentDomain::Person;
  if (s == "scene") return ContentDomain::Scene;
  return std::nullopt;
}

inline std::optional<Preference> parse_preference(std::string_view s) noexcept {
  if (s == "A") return Preference::A;
  if (s == "B") return Preference::B;
  return std::nullopt;
}

/// One challenge item: the two concatenated pair images plus annotations.
struct PairSample {
  std::string id;
  ContentDomain domain = ContentDomain::Person;
  ImageBuffer global_pair;
  ImageBuffer crop_pair;
  std::optional<Preference> label;
  std::optional<std::string> reference_rationale;
};

enum class ViewRole { AGlobal, ACrop, BGlobal, BCrop };

inline constexpr ViewRole kViewRoles[] = {ViewRole::AGlobal, ViewRole::ACrop, ViewRole::BGlobal, ViewRole::BCrop};

inline std::string_view to_string(ViewRole r) noexcept {
  switch (r) {
    case ViewRole::AGlobal: return "a_global";
    case ViewRole::ACrop: return "a_crop";
    case ViewRole::BGlobal: return "b_global";
    case ViewRole::BCrop: return "b_crop";
  }
  return "";
}

inline std::optional<ViewRole> parse_view_role(std::string_view s) noexcept {
  for (auto r : kViewRoles) {
    if (to_string(r) == s) return r;
  }
  return std::nullopt;
}

/// The four aligned views: global and crop for each of the left (A) and right (B) candidates.
struct ViewSet {
  ImageBuffer a_global;
  ImageBuffer a_crop;
  ImageBuffer b_global;
  ImageBuffer b_crop;

  const ImageBuffer& view(ViewRole r) const {
    switch (r) {
      case ViewRole::AGlobal: return a_global;
      case ViewRole::ACrop: return a_crop;
      case ViewRole::BGlobal: return b_global;
      case ViewRole::BCrop: return b_crop;
    }
    throw ImageError("unknown view role");
  }

  /// The same views with the A and B candidates exchanged.
  ViewSet swapped() const { return ViewSet{b_global, b_crop, a_global, a_crop}; }

  friend bool operator==(const ViewSet&, const ViewSet&) = default;
};

/// Splits a concatenated pair image into its left and right halves.
inline std::pair<ImageBuffer, ImageBuffer> split_halves(const ImageBuffer& pair) {
  if (pair.width() % 2 != 0) {
    throw ImageError("pair image width " + std::to_string(pair.width()) + " is odd");
  }
  const int half = pair.width() / 2;
  return {pair.columns(0, half), pair.columns(half, half)};
}

inline ViewSet decompose(const PairSample& sample) {
  auto [ag, bg] = split_halves(sample.global_pair);
  auto [ac, bc] = split_halves(sample.crop_pair);
  return ViewSet{std::move(ag), std::move(ac), std::move(bg), std::move(bc)};
}

/// Inverse of decompose: returns (global_pair, crop_pair).
inline std::pair<ImageBuffer, ImageBuffer> recompose(const ViewSet& views) {
  auto same_shape = [](const ImageBuffer& a, const ImageBuffer& b) {
    return a.width() == b.width() && a.height() == b.height() && a.channels() == b.channels();
  };
  if (!same_shape(views.a_global, views.b_global)) throw ImageError("global views differ in shape");
  if (!same_shape(views.a_crop, views.b_crop)) throw ImageError("crop views differ in shape");
  return {hconcat(views.a_global, views.b_global), hconcat(views.a_crop, views.b_crop)};
}

}  // namespace idiff
