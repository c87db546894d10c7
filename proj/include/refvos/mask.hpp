// Copyright 2026 The refvos Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Binary masks stored as canonical row-major run-length encodings, plus the
// geometric primitives the rest of the library builds on.
#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "refvos/error.hpp"

namespace refvos {

// A maximal run of foreground pixels, indexed row-major.
struct Run {
  int64_t start = 0;
  int64_t length = 0;

  int64_t end() const { return start + length; }
  friend bool operator==(const Run&, const Run&) = default;
};

// Dense H x W boolean grid. Storage is one byte per pixel.
class BitGrid {
 public:
  BitGrid() = default;
  BitGrid(int height, int width, bool value = false)
      : height_(height),
        width_(width),
        bits_(static_cast<size_t>(height) * width, value ? 1 : 0) {
    if (height < 1 || width < 1) {
      throw ContractError("BitGrid dimensions must be at least 1x1");
    }
  }

  int height() const { return height_; }
  int width() const { return width_; }
  int64_t size() const { return static_cast<int64_t>(bits_.size()); }

  bool at(int x, int y) const { return bits_[Index(x, y)] != 0; }
  void set(int x, int y, bool v = true) { bits_[Index(x, y)] = v ? 1 : 0; }
  bool operator[](int64_t i) const { return bits_[i] != 0; }

  std::span<const uint8_t> bits() const { return bits_; }
  std::span<uint8_t> bits() { return bits_; }

  friend bool operator==(const BitGrid&, const BitGrid&) = default;

 private:
  size_t Index(int x, int y) const {
    return static_cast<size_t>(y) * width_ + x;
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<uint8_t> bits_;
};

// Half-open pixel box: [x0, x1) x [y0, y1).
struct BoundingBox {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool Contains(int x, int y) const {
    return x >= x0 && x < x1 && y >= y0 && y < y1;
  }
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

enum class PointLabel { kPositive, kNegative };

struct PointPrompt {
  int x = 0;
  int y = 0;
  PointLabel label = PointLabel::kPositive;

  friend bool operator==(const PointPrompt&, const PointPrompt&) = default;
};

class Mask {
 public:
  Mask() = default;

  static Mask Empty(int height, int width) {
    CheckDims(height, width);
    Mask m;
    m.height_ = height;
    m.width_ = width;
    return m;
  }

  // Validates that `runs` is canonical: sorted, in bounds, length >= 1,
  // neither overlapping nor touching.
  static Mask FromRuns(int height, int width, std::vector<Run> runs) {
    CheckDims(height, width);
    const int64_t n = static_cast<int64_t>(height) * width;
    int64_t prev_end = -1;
    for (const Run& r : runs) {
      if (r.length < 1) throw CodecError("run length must be >= 1");
      if (r.start < 0 || r.end() > n) throw CodecError("run out of bounds");
      if (prev_end >= 0 && r.start < prev_end) {
        throw CodecError("runs overlap or are unsorted");
      }
      if (prev_end >= 0 && r.start == prev_end) {
        throw CodecError("adjacent runs are not maximal");
      }
      prev_end = r.end();
    }
    Mask m;
    m.height_ = height;
    m.width_ = width;
    m.runs_ = std::move(runs);
    return m;
  }

  int height() const { return height_; }
  int width() const { return width_; }
  int64_t pixel_count() const { return static_cast<int64_t>(height_) * width_; }
  const std::vector<Run>& runs() const { return runs_; }

  bool empty() const { return runs_.empty(); }

  int64_t area() const {
    int64_t a = 0;
    for (const Run& r : runs_) a += r.length;
    return a;
  }

  bool Contains(int x, int y) const {
    if (x < 0 || y < 0 || x >= width_ || y >= height_) return false;
    const int64_t i = static_cast<int64_t>(y) * width_ + x;
    auto it = std::upper_bound(
        runs_.begin(), runs_.end(), i,
        [](int64_t v, const Run& r) { return v < r.start; });
    if (it == runs_.begin()) return false;
    --it;
    return i < it->end();
  }

  bool SameShape(const Mask& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  static void CheckDims(int height, int width) {
    if (height < 1 || width < 1) {
      throw ContractError("mask dimensions must be at least 1x1");
    }
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<Run> runs_;
};

inline Mask Encode(const BitGrid& grid) {
  std::vector<Run> runs;
  const int64_t n = grid.size();
  int64_t i = 0;
  while (i < n) {
    if (!grid[i]) {
      ++i;
      continue;
    }
    int64_t j = i;
    while (j < n && grid[j]) ++j;
    runs.push_back({i, j - i});
    i = j;
  }
  return Mask::FromRuns(grid.height(), grid.width(), std::move(runs));
}

inline BitGrid Decode(const Mask& mask) {
  BitGrid grid(mask.height(), mask.width());
  auto bits = grid.bits();
  for (const Run& r : mask.runs()) {
    std::fill(bits.begin() + r.start, bits.begin() + r.end(), uint8_t{1});
  }
  return grid;
}

// Tightest box around the foreground; nullopt for the empty mask.
inline std::optional<BoundingBox> BBox(const Mask& mask) {
  if (mask.empty()) return std::nullopt;
  const int w = mask.width();
  BoundingBox box;
  box.y0 = static_cast<int>(mask.runs().front().start / w);
  box.y1 = static_cast<int>((mask.runs().back().end() - 1) / w) + 1;
  int xmin = w, xmax = -1;
  for (const Run& r : mask.runs()) {
    const int64_t first = r.start, last = r.end() - 1;
    if (first / w != last / w) {
      // Wraps a row boundary, so it touches both column 0 and column w-1.
      xmin = 0;
      xmax = w - 1;
      break;
    }
    xmin = std::min(xmin, static_cast<int>(first % w));
    xmax = std::max(xmax, static_cast<int>(last % w));
  }
  box.x0 = xmin;
  box.x1 = xmax + 1;
  return box;
}

// Filled rectangle, clipped to the frame.
inline Mask BoxMask(int height, int width, const BoundingBox& box) {
  const int x0 = std::clamp(box.x0, 0, width), x1 = std::clamp(box.x1, 0, width);
  const int y0 = std::clamp(box.y0, 0, height),
            y1 = std::clamp(box.y1, 0, height);
  std::vector<Run> runs;
  if (x0 < x1 && y0 < y1) {
    if (x0 == 0 && x1 == width) {
      runs.push_back({static_cast<int64_t>(y0) * width,
                      static_cast<int64_t>(y1 - y0) * width});
    } else {
      for (int y = y0; y < y1; ++y) {
        runs.push_back({static_cast<int64_t>(y) * width + x0, x1 - x0});
      }
    }
  }
  return Mask::FromRuns(height, width, std::move(runs));
}

// L1 distance from every pixel to the nearest background pixel, where pixels
// outside the frame count as background. Background pixels map to 0.
inline std::vector<int32_t> L1DistanceTransform(const BitGrid& grid) {
  const int h = grid.height(), w = grid.width();
  std::vector<int32_t> d(static_cast<size_t>(h) * w, 0);
  auto at = [&](int x, int y) -> int32_t& {
    return d[static_cast<size_t>(y) * w + x];
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (grid.at(x, y)) {
        at(x, y) = std::min({x + 1, w - x, y + 1, h - y});
      }
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int32_t& v = at(x, y);
      if (v == 0) continue;
      if (x > 0) v = std::min(v, at(x - 1, y) + 1);
      if (y > 0) v = std::min(v, at(x, y - 1) + 1);
    }
  }
  for (int y = h - 1; y >= 0; --y) {
    for (int x = w - 1; x >= 0; --x) {
      int32_t& v = at(x, y);
      if (v == 0) continue;
      if (x + 1 < w) v = std::min(v, at(x + 1, y) + 1);
      if (y + 1 < h) v = std::min(v, at(x, y + 1) + 1);
    }
  }
  return d;
}

// Deepest foreground pixel under the L1 distance transform. Ties go to the
// smallest row-major index.
inline PointPrompt InteriorPoint(const Mask& mask) {
  if (mask.empty()) {
    throw ContractError("InteriorPoint requires a non-empty mask");
  }
  const auto d = L1DistanceTransform(Decode(mask));
  const auto best = std::max_element(d.begin(), d.end());
  const int64_t i = best - d.begin();
  return {static_cast<int>(i % mask.width()), static_cast<int>(i / mask.width()),
          PointLabel::kPositive};
}

inline int64_t IntersectionArea(const Mask& a, const Mask& b) {
  if (!a.SameShape(b)) throw ContractError("mask dimension mismatch");
  const auto& ra = a.runs();
  const auto& rb = b.runs();
  int64_t total = 0;
  size_t i = 0, j = 0;
  while (i < ra.size() && j < rb.size()) {
    const int64_t lo = std::max(ra[i].start, rb[j].start);
    const int64_t hi = std::min(ra[i].end(), rb[j].end());
    if (hi > lo) total += hi - lo;
    if (ra[i].end() < rb[j].end()) {
      ++i;
    } else {
      ++j;
    }
  }
  return total;
}

// |a & b| / |a | b|, and 1.0 when both masks are empty.
inline double IoU(const Mask& a, const Mask& b) {
  const int64_t inter = IntersectionArea(a, b);
  const int64_t uni = a.area() + b.area() - inter;
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

// Foreground pixels with a 4-neighbour that is background or off-frame.
inline Mask BoundaryPixels(const Mask& mask) {
  if (mask.empty()) return mask;
  const BitGrid g = Decode(mask);
  const int h = g.height(), w = g.width();
  BitGrid out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!g.at(x, y)) continue;
      const bool edge = x == 0 || y == 0 || x == w - 1 || y == h - 1 ||
                        !g.at(x - 1, y) || !g.at(x + 1, y) ||
                        !g.at(x, y - 1) || !g.at(x, y + 1);
      if (edge) out.set(x, y);
    }
  }
  return Encode(out);
}

enum class MorphOp { kDilate, kErode };

namespace internal {

// Running-count window max along rows then columns; separable for the square
// structuring element. `outside` is the value assumed beyond the frame.
inline BitGrid SquareFilter(const BitGrid& in, int radius, bool want_any,
                            bool outside) {
  const int h = in.height(), w = in.width();
  auto pass = [&](const BitGrid& src, bool horizontal) {
    BitGrid dst(h, w);
    const int len = horizontal ? w : h;
    const int lines = horizontal ? h : w;
    std::vector<int> prefix(len + 1);
    for (int l = 0; l < lines; ++l) {
      for (int k = 0; k < len; ++k) {
        const bool v = horizontal ? src.at(k, l) : src.at(l, k);
        prefix[k + 1] = prefix[k] + (v ? 1 : 0);
      }
      for (int k = 0; k < len; ++k) {
        const int lo = k - radius, hi = k + radius;
        const int clo = std::max(lo, 0), chi = std::min(hi, len - 1);
        const int ones = prefix[chi + 1] - prefix[clo];
        const int inside = chi - clo + 1;
        const bool clipped = lo < 0 || hi > len - 1;
        bool v;
        if (want_any) {
          v = ones > 0 || (clipped && outside);
        } else {
          v = ones == inside && (!clipped || outside);
        }
        if (horizontal) {
          dst.set(k, l, v);
        } else {
          dst.set(l, k, v);
        }
      }
    }
    return dst;
  };
  return pass(pass(in, true), false);
}

}  // namespace internal

// Square (L-infinity) dilation or erosion. Erosion treats off-frame pixels as
// foreground, so dilate-then-erode always contains the input.
inline Mask Morph(const Mask& mask, MorphOp op, int radius) {
  if (radius < 0) throw ContractError("morphology radius must be >= 0");
  if (radius == 0) return mask;
  const BitGrid g = Decode(mask);
  if (op == MorphOp::kDilate) {
    return Encode(internal::SquareFilter(g, radius, true, false));
  }
  return Encode(internal::SquareFilter(g, radius, false, true));
}

// Pixel-wise helpers used by ensembles and mocks.
inline Mask Subtract(const Mask& a, const Mask& b) {
  if (!a.SameShape(b)) throw ContractError("mask dimension mismatch");
  BitGrid ga = Decode(a);
  const BitGrid gb = Decode(b);
  auto bits = ga.bits();
  for (int64_t i = 0; i < ga.size(); ++i) {
    if (gb[i]) bits[i] = 0;
  }
  return Encode(ga);
}

// ---- Wire form: {"h": int, "w": int, "runs": [[start, len], ...]} ----

inline nlohmann::json ToWire(const Mask& mask) {
  nlohmann::json runs = nlohmann::json::array();
  for (const Run& r : mask.runs()) runs.push_back({r.start, r.length});
  return {{"h", mask.height()}, {"w", mask.width()}, {"runs", std::move(runs)}};
}

inline Mask MaskFromWire(const nlohmann::json& j) {
  if (!j.is_object()) throw CodecError("mask: expected an object");
  for (const char* key : {"h", "w", "runs"}) {
    if (!j.contains(key)) throw CodecError(std::string("mask: missing ") + key);
  }
  if (!j["h"].is_number_integer() || !j["w"].is_number_integer()) {
    throw CodecError("mask: h and w must be integers");
  }
  if (!j["runs"].is_array()) throw CodecError("mask: runs must be an array");
  std::vector<Run> runs;
  runs.reserve(j["runs"].size());
  for (const auto& r : j["runs"]) {
    if (!r.is_array() || r.size() != 2 || !r[0].is_number_integer() ||
        !r[1].is_number_integer()) {
      throw CodecError("mask: each run must be [start, len]");
    }
    runs.push_back({r[0].get<int64_t>(), r[1].get<int64_t>()});
  }
  const int64_t h = j["h"].get<int64_t>(), w = j["w"].get<int64_t>();
  if (h < 1 || w < 1 || h > std::numeric_limits<int>::max() ||
      w > std::numeric_limits<int>::max()) {
    throw CodecError("mask: dimensions out of range");
  }
  return Mask::FromRuns(static_cast<int>(h), static_cast<int>(w),
                        std::move(runs));
}

inline nlohmann::json ToWire(const BoundingBox& b) {
  return nlohmann::json::array({b.x0, b.y0, b.x1, b.y1});
}

inline BoundingBox BoxFromWire(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 4) {
    throw CodecError("box: expected [x0, y0, x1, y1]");
  }
  for (const auto& v : j) {
    if (!v.is_number_integer()) throw CodecError("box: non-integer coordinate");
  }
  BoundingBox b{j[0].get<int>(), j[1].get<int>(), j[2].get<int>(),
                j[3].get<int>()};
  if (b.x0 < 0 || b.y0 < 0 || b.x0 >= b.x1 || b.y0 >= b.y1) {
    throw CodecError("box: degenerate or negative");
  }
  return b;
}

inline nlohmann::json ToWire(const PointPrompt& p) {
  return {{"x", p.x},
          {"y", p.y},
          {"label", p.label == PointLabel::kPositive ? "positive" : "negative"}};
}

inline PointPrompt PointFromWire(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("x") || !j.contains("y") ||
      !j["x"].is_number_integer() || !j["y"].is_number_integer()) {
    throw CodecError("point: expected {x, y, label}");
  }
  PointPrompt p{j["x"].get<int>(), j["y"].get<int>(), PointLabel::kPositive};
  if (j.contains("label")) {
    const auto label = j["label"].get<std::string>();
    if (label == "negative") {
      p.label = PointLabel::kNegative;
    } else if (label != "positive") {
      throw CodecError("point: label must be positive or negative");
    }
  }
  return p;
}

}  // namespace refvos
