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

// Brute-force reference implementations shared by the unit and acceptance
// tests. Deliberately naive: pixel loops and all-pairs searches only, no
// shared code with the library beyond the Mask container.
#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "refvos/mask.hpp"
#include "refvos/trajectory.hpp"

namespace refvos::oracle {

// Row-major bool grid independent of BitGrid.
struct Grid {
  int h = 0;
  int w = 0;
  std::vector<bool> px;

  Grid(int h_, int w_) : h(h_), w(w_), px(static_cast<size_t>(h_) * w_, false) {}
  bool at(int x, int y) const { return px[static_cast<size_t>(y) * w + x]; }
  void set(int x, int y, bool v = true) { px[static_cast<size_t>(y) * w + x] = v; }
  bool in(int x, int y) const { return x >= 0 && y >= 0 && x < w && y < h; }
  int count() const { return static_cast<int>(std::count(px.begin(), px.end(), true)); }
};

inline Grid ToGrid(const Mask& m) {
  Grid g(m.height(), m.width());
  for (int y = 0; y < g.h; ++y) {
    for (int x = 0; x < g.w; ++x) g.set(x, y, m.Contains(x, y));
  }
  return g;
}

// Run list built by scanning pixels one at a time.
inline Mask FromGrid(const Grid& g) {
  std::vector<Run> runs;
  for (int64_t i = 0; i < static_cast<int64_t>(g.px.size()); ++i) {
    if (!g.px[i]) continue;
    if (!runs.empty() && runs.back().end() == i) {
      ++runs.back().length;
    } else {
      runs.push_back({i, 1});
    }
  }
  return Mask::FromRuns(g.h, g.w, std::move(runs));
}

// Mixture of densities and blob structure so that both sparse noise and
// large connected regions are exercised.
inline Grid RandomGrid(std::mt19937_64& rng, int h, int w) {
  Grid g(h, w);
  const int style = static_cast<int>(rng() % 4);
  if (style == 0) {
    const double p = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    std::bernoulli_distribution bit(p);
    for (auto&& v : g.px) v = bit(rng);
  } else {
    const int blobs = 1 + static_cast<int>(rng() % 4);
    for (int b = 0; b < blobs; ++b) {
      const int x0 = static_cast<int>(rng() % w), y0 = static_cast<int>(rng() % h);
      const int x1 = x0 + static_cast<int>(rng() % (w - x0)) + 1;
      const int y1 = y0 + static_cast<int>(rng() % (h - y0)) + 1;
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) g.set(x, y, style != 3 || ((x + y) % 5 != 0));
      }
    }
    if (style == 2) {
      for (int k = 0; k < (h * w) / 10; ++k) {
        g.set(static_cast<int>(rng() % w), static_cast<int>(rng() % h),
              rng() % 2 == 0);
      }
    }
  }
  return g;
}

inline Mask RandomMask(std::mt19937_64& rng, int h, int w) { return FromGrid(RandomGrid(rng, h, w)); }

inline int64_t Intersection(const Grid& a, const Grid& b) {
  int64_t n = 0;
  for (size_t i = 0; i < a.px.size(); ++i) n += (a.px[i] && b.px[i]) ? 1 : 0;
  return n;
}

inline double IoU(const Grid& a, const Grid& b) {
  int64_t inter = 0, uni = 0;
  for (size_t i = 0; i < a.px.size(); ++i) {
    inter += (a.px[i] && b.px[i]) ? 1 : 0;
    uni += (a.px[i] || b.px[i]) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline Grid Boundary(const Grid& g) {
  Grid out(g.h, g.w);
  const int dx[] = {1, -1, 0, 0}, dy[] = {0, 0, 1, -1};
  for (int y = 0; y < g.h; ++y) {
    for (int x = 0; x < g.w; ++x) {
      if (!g.at(x, y)) continue;
      for (int k = 0; k < 4; ++k) {
        const int nx = x + dx[k], ny = y + dy[k];
        if (!g.in(nx, ny) || !g.at(nx, ny)) {
          out.set(x, y);
          break;
        }
      }
    }
  }
  return out;
}

// Square neighbourhood scan. Erosion treats off-frame pixels as foreground.
inline Grid Dilate(const Grid& g, int r) {
  Grid out(g.h, g.w);
  for (int y = 0; y < g.h; ++y) {
    for (int x = 0; x < g.w; ++x) {
      bool any = false;
      for (int yy = y - r; yy <= y + r && !any; ++yy) {
        for (int xx = x - r; xx <= x + r && !any; ++xx) any = g.in(xx, yy) && g.at(xx, yy);
      }
      out.set(x, y, any);
    }
  }
  return out;
}

inline Grid Erode(const Grid& g, int r) {
  Grid out(g.h, g.w);
  for (int y = 0; y < g.h; ++y) {
    for (int x = 0; x < g.w; ++x) {
      bool all = true;
      for (int yy = y - r; yy <= y + r && all; ++yy) {
        for (int xx = x - r; xx <= x + r && all; ++xx) all = !g.in(xx, yy) || g.at(xx, yy);
      }
      out.set(x, y, all);
    }
  }
  return out;
}

// Nearest-distance boundary F over all pairs of boundary pixels, with
// integer L-infinity distances.
inline double BoundaryF(const Grid& pred, const Grid& gt, int tol) {
  const Grid pb = Boundary(pred), gb = Boundary(gt);
  std::vector<std::pair<int, int>> p, g;
  for (int y = 0; y < pb.h; ++y) {
    for (int x = 0; x < pb.w; ++x) {
      if (pb.at(x, y)) p.push_back({x, y});
      if (gb.at(x, y)) g.push_back({x, y});
    }
  }
  if (p.empty() && g.empty()) return 1.0;
  if (p.empty() || g.empty()) return 0.0;
  auto matched = [tol](const std::vector<std::pair<int, int>>& from,
                       const std::vector<std::pair<int, int>>& to) {
    int64_t n = 0;
    for (const auto& a : from) {
      int best = 1 << 30;
      for (const auto& b : to) {
        best = std::min(best, std::max(std::abs(a.first - b.first), std::abs(a.second - b.second)));
      }
      n += best <= tol ? 1 : 0;
    }
    return n;
  };
  const double precision = static_cast<double>(matched(p, g)) / static_cast<double>(p.size());
  const double recall = static_cast<double>(matched(g, p)) / static_cast<double>(g.size());
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

// L1 distance from each foreground pixel to the nearest background pixel by
// exhaustive search; off-frame pixels count as background.
inline std::vector<int> L1DistanceAllPairs(const Grid& g) {
  std::vector<int> d(g.px.size(), 0);
  for (int y = 0; y < g.h; ++y) {
    for (int x = 0; x < g.w; ++x) {
      if (!g.at(x, y)) continue;
      int best = std::min({x + 1, y + 1, g.w - x, g.h - y});
      for (int yy = 0; yy < g.h; ++yy) {
        for (int xx = 0; xx < g.w; ++xx) {
          if (!g.at(xx, yy)) best = std::min(best, std::abs(x - xx) + std::abs(y - yy));
        }
      }
      d[static_cast<size_t>(y) * g.w + x] = best;
    }
  }
  return d;
}

inline std::string ReadFileBytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// FNV-1a over the names and bytes of every regular file under `dir`, in
// sorted path order.
inline uint64_t DirectoryChecksum(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  uint64_t h = 1469598103934665603ULL;
  auto feed = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
  };
  for (const auto& f : files) {
    feed(std::filesystem::relative(f, dir).generic_string());
    feed(ReadFileBytes(f));
  }
  return h;
}

}  // namespace refvos::oracle
