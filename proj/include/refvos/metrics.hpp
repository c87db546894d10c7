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

// Region (J) and boundary (F) measures, presence accuracies and the combined
// leaderboard score.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "refvos/mask.hpp"
#include "refvos/trajectory.hpp"

namespace refvos::metrics {

struct FrameScore {
  double j = 0.0;
  double f = 0.0;
};

struct VideoScore {
  double j = 0.0;
  double f = 0.0;
  double jf() const { return (j + f) / 2.0; }
};

// ceil(0.8% of the frame diagonal), at least one pixel.
inline int DefaultBoundaryTolerance(int height, int width) {
  const double diag = std::sqrt(static_cast<double>(height) * height +
                                static_cast<double>(width) * width);
  return std::max(1, static_cast<int>(std::ceil(0.008 * diag)));
}

inline double RegionJaccard(const Mask& pred, const Mask& gt) {
  return IoU(pred, gt);
}

// Boundary F-measure where a boundary pixel matches if the other boundary has
// a pixel within L-infinity distance `tolerance`. Implemented by dilating each
// boundary with a (2*tolerance+1)^2 square.
inline double BoundaryF(const Mask& pred, const Mask& gt, int tolerance) {
  if (!pred.SameShape(gt)) throw ContractError("mask dimension mismatch");
  if (tolerance < 0) throw ContractError("tolerance must be >= 0");
  const Mask pb = BoundaryPixels(pred);
  const Mask gb = BoundaryPixels(gt);
  if (pb.empty() && gb.empty()) return 1.0;
  if (pb.empty() || gb.empty()) return 0.0;
  const double precision =
      static_cast<double>(
          IntersectionArea(pb, Morph(gb, MorphOp::kDilate, tolerance))) /
      static_cast<double>(pb.area());
  const double recall =
      static_cast<double>(
          IntersectionArea(gb, Morph(pb, MorphOp::kDilate, tolerance))) /
      static_cast<double>(gb.area());
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

inline FrameScore ScoreFrame(const Mask& pred, const Mask& gt, int tolerance) {
  return {RegionJaccard(pred, gt), BoundaryF(pred, gt, tolerance)};
}

// Per-frame scores, uniformly averaged. A tolerance < 0 selects the default
// for the first frame's dimensions.
inline VideoScore VideoJF(const Trajectory& pred, const Trajectory& gt,
                          int tolerance = -1) {
  if (pred.size() != gt.size()) {
    throw ContractError("trajectory length mismatch: " +
                        std::to_string(pred.size()) + " vs " +
                        std::to_string(gt.size()));
  }
  if (gt.size() == 0) throw ContractError("empty trajectory");
  if (tolerance < 0) {
    tolerance =
        DefaultBoundaryTolerance(gt.masks[0].height(), gt.masks[0].width());
  }
  VideoScore s;
  for (size_t t = 0; t < gt.size(); ++t) {
    const FrameScore fs = ScoreFrame(pred.masks[t], gt.masks[t], tolerance);
    s.j += fs.j;
    s.f += fs.f;
  }
  s.j /= static_cast<double>(gt.size());
  s.f /= static_cast<double>(gt.size());
  return s;
}

struct PresenceCase {
  bool gt_present = false;
  const Trajectory* pred = nullptr;
};

struct PresenceAccuracy {
  double n_acc = 1.0;
  double t_acc = 1.0;
};

// N-acc: share of target-absent cases predicted all-empty.
// T-acc: share of target-present cases with at least one non-empty frame.
// A class with no cases scores 1.0.
inline PresenceAccuracy PresenceAccuracies(std::span<const PresenceCase> cases) {
  int neg = 0, neg_ok = 0, pos = 0, pos_ok = 0;
  for (const PresenceCase& c : cases) {
    const bool empty = c.pred->AllEmpty();
    if (c.gt_present) {
      ++pos;
      pos_ok += empty ? 0 : 1;
    } else {
      ++neg;
      neg_ok += empty ? 1 : 0;
    }
  }
  PresenceAccuracy acc;
  if (neg > 0) acc.n_acc = static_cast<double>(neg_ok) / neg;
  if (pos > 0) acc.t_acc = static_cast<double>(pos_ok) / pos;
  return acc;
}

inline double FinalScore(double jf, double n_acc, double t_acc) {
  return (jf + n_acc + t_acc) / 3.0;
}

struct VideoRow {
  std::string video;
  std::string query;
  bool present = false;
  double j = 0.0;
  double f = 0.0;
  double jf() const { return (j + f) / 2.0; }
};

struct EvalReport {
  std::vector<VideoRow> per_video;
  double j = 0.0;
  double f = 0.0;
  double jf = 0.0;
  double n_acc = 1.0;
  double t_acc = 1.0;
  double final = 0.0;
};

// Fills aggregate fields from the given J, F and accuracies.
inline void SetAggregates(EvalReport& r, double j, double f, double n_acc,
                          double t_acc) {
  r.j = j;
  r.f = f;
  r.jf = (j + f) / 2.0;
  r.n_acc = n_acc;
  r.t_acc = t_acc;
  r.final = FinalScore(r.jf, n_acc, t_acc);
}

// Uniform mean over rows; rows are sorted by (video, query) so the report does
// not depend on input order.
inline EvalReport BuildReport(std::vector<VideoRow> rows, PresenceAccuracy acc) {
  std::sort(rows.begin(), rows.end(), [](const VideoRow& a, const VideoRow& b) {
    return std::tie(a.video, a.query) < std::tie(b.video, b.query);
  });
  // Sum in sorted order so floating-point results are order independent too.
  double j = 0.0, f = 0.0;
  for (const VideoRow& r : rows) {
    j += r.j;
    f += r.f;
  }
  if (!rows.empty()) {
    j /= static_cast<double>(rows.size());
    f /= static_cast<double>(rows.size());
  }
  EvalReport report;
  report.per_video = std::move(rows);
  SetAggregates(report, j, f, acc.n_acc, acc.t_acc);
  return report;
}

inline nlohmann::json ToJson(const EvalReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const VideoRow& v : r.per_video) {
    rows.push_back({{"video", v.video},
                    {"query", v.query},
                    {"present", v.present},
                    {"j", v.j},
                    {"f", v.f},
                    {"jf", v.jf()}});
  }
  return {{"per_video", std::move(rows)},
          {"aggregate",
           {{"j", r.j},
            {"f", r.f},
            {"jf", r.jf},
            {"n_acc", r.n_acc},
            {"t_acc", r.t_acc},
            {"final", r.final}}}};
}

// Leaderboard-style row: J&F, J, F, N-acc, T-acc, Final.
inline std::string LeaderboardRow(const EvalReport& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "J&F %.4f | J %.4f | F %.4f | N-acc %.4f | T-acc %.4f | "
                "Final %.4f",
                r.jf, r.j, r.f, r.n_acc, r.t_acc, r.final);
  return buf;
}

}  // namespace refvos::metrics
