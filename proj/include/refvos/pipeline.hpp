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

// The five-stage run: presence gate, coarse grounding, anchor extraction,
// propagation, and per-frame planner selection between the two candidates.
#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "refvos/backend.hpp"
#include "refvos/error.hpp"
#include "refvos/mask.hpp"
#include "refvos/metrics.hpp"
#include "refvos/trajectory.hpp"
#include "refvos/types.hpp"

namespace refvos {

struct PipelineConfig {
  double presence_threshold = 0.5;
  int anchor_k = 3;
  int anchor_window = 2;
  int anchor_gap = 0;  // 0 selects max(1, T / 10)
  double area_lo = 0.5;
  double area_hi = 1.5;
  double tau_amb = 0.5;
  int planner_window = 2;
  double confidence_weight = 0.25;
  uint64_t seed = 0;

  int GapFor(int frames) const {
    return anchor_gap > 0 ? anchor_gap : std::max(1, frames / 10);
  }

  void Validate() const {
    if (!(presence_threshold > 0.0 && presence_threshold < 1.0)) {
      throw ConfigError("presence_threshold must lie in (0, 1)");
    }
    if (anchor_k < 1) throw ConfigError("anchor_k must be >= 1");
    if (anchor_window < 1) throw ConfigError("anchor_window must be >= 1");
    if (anchor_gap < 0) throw ConfigError("anchor_gap must be >= 0");
    if (!(area_lo >= 0.0 && area_lo <= 1.0 && area_hi >= 1.0)) {
      throw ConfigError("area band must satisfy 0 <= area_lo <= 1 <= area_hi");
    }
    if (!(tau_amb >= 0.0 && tau_amb <= 1.0)) throw ConfigError("tau_amb must lie in [0, 1]");
    if (planner_window < 1) throw ConfigError("planner_window must be >= 1");
    if (!(confidence_weight >= 0.0)) throw ConfigError("confidence_weight must be >= 0");
  }
};

inline nlohmann::json ToJson(const PipelineConfig& c) {
  return {{"presence_threshold", c.presence_threshold},
          {"anchor_k", c.anchor_k},
          {"anchor_window", c.anchor_window},
          {"anchor_gap", c.anchor_gap},
          {"area_lo", c.area_lo},
          {"area_hi", c.area_hi},
          {"tau_amb", c.tau_amb},
          {"planner_window", c.planner_window},
          {"confidence_weight", c.confidence_weight},
          {"seed", c.seed}};
}

inline PipelineConfig PipelineConfigFromJson(const nlohmann::json& j) {
  static const char* kKeys[] = {"presence_threshold", "anchor_k", "anchor_window",
                                "anchor_gap", "area_lo", "area_hi", "tau_amb",
                                "planner_window", "confidence_weight", "seed"};
  if (!j.is_object()) throw ConfigError("pipeline config must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::find_if(std::begin(kKeys), std::end(kKeys),
                     [&](const char* k) { return key == k; }) == std::end(kKeys)) {
      throw ConfigError("unknown pipeline config key '" + key + "'");
    }
  }
  PipelineConfig c;
  try {
    c.presence_threshold = j.value("presence_threshold", c.presence_threshold);
    c.anchor_k = j.value("anchor_k", c.anchor_k);
    c.anchor_window = j.value("anchor_window", c.anchor_window);
    c.anchor_gap = j.value("anchor_gap", c.anchor_gap);
    c.area_lo = j.value("area_lo", c.area_lo);
    c.area_hi = j.value("area_hi", c.area_hi);
    c.tau_amb = j.value("tau_amb", c.tau_amb);
    c.planner_window = j.value("planner_window", c.planner_window);
    c.confidence_weight = j.value("confidence_weight", c.confidence_weight);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("pipeline config: ") + e.what());
  }
  c.Validate();
  return c;
}

// ---- Stage 1 ----

inline PresenceDecision StagePresence(const VideoClip& video, const Query& query,
                                      Backend& backend, double threshold,
                                      uint64_t seed = 0) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ContractError("presence threshold must lie in (0, 1)");
  }
  PresenceDecision d = backend.JudgePresence(video, query, seed);
  if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) {
    throw ContractError("presence confidence outside [0, 1]");
  }
  d.present = d.confidence >= threshold;
  return d;
}

// ---- Stage 2 ----

inline Trajectory StageCoarse(const VideoClip& video, const Query& query,
                              Backend& backend, uint64_t seed = 0) {
  Trajectory t = backend.Ground(video, query, seed);
  t.Validate(static_cast<size_t>(video.frames), video.height, video.width);
  return t;
}

// ---- Stage 3 ----

// Temporal-consistency reliability of every frame of `coarse`: mean IoU with
// the non-empty masks within `window` frames, times 1 if the frame's area is
// within [area_lo, area_hi] x the median non-empty area (else 0). Empty
// frames score 0.
inline std::vector<double> AnchorReliability(const Trajectory& coarse,
                                             const PipelineConfig& config) {
  const int n = static_cast<int>(coarse.size());
  std::vector<int64_t> areas;
  for (const Mask& m : coarse.masks) {
    if (!m.empty()) areas.push_back(m.area());
  }
  std::vector<double> rel(static_cast<size_t>(n), 0.0);
  if (areas.empty()) return rel;
  std::sort(areas.begin(), areas.end());
  const size_t k = areas.size();
  const double median = (static_cast<double>(areas[(k - 1) / 2]) +
                         static_cast<double>(areas[k / 2])) / 2.0;
  for (int t = 0; t < n; ++t) {
    const Mask& m = coarse.masks[t];
    if (m.empty()) continue;
    const double a = static_cast<double>(m.area());
    if (a < config.area_lo * median || a > config.area_hi * median) continue;
    double sum = 0.0;
    int count = 0;
    for (int s = std::max(0, t - config.anchor_window);
         s <= std::min(n - 1, t + config.anchor_window); ++s) {
      if (s == t || coarse.masks[s].empty()) continue;
      sum += IoU(m, coarse.masks[s]);
      ++count;
    }
    if (count > 0) rel[t] = sum / count;
  }
  return rel;
}

inline Anchor MakeAnchor(const Trajectory& coarse, int frame, double reliability) {
  const Mask& m = coarse.masks[frame];
  return {frame, Prompt{*BBox(m), {InteriorPoint(m)}}, reliability};
}

// Greedy: best reliability first (earlier frame on ties), skipping frames
// closer than the minimum gap to an accepted anchor, up to anchor_k. Frames
// with zero reliability are not eligible; if none is eligible the first
// non-empty frame becomes the sole anchor.
inline AnchorSet StageAnchors(const Trajectory& coarse, const PipelineConfig& config) {
  if (coarse.AllEmpty()) throw AnchorError("coarse trajectory has no non-empty frame");
  const int n = static_cast<int>(coarse.size());
  const auto rel = AnchorReliability(coarse, config);
  std::vector<int> order;
  for (int t = 0; t < n; ++t) {
    if (rel[t] > 0.0) order.push_back(t);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return rel[a] > rel[b]; });
  const int gap = config.GapFor(n);
  std::vector<int> chosen;
  for (int t : order) {
    if (static_cast<int>(chosen.size()) >= config.anchor_k) break;
    const bool spaced = std::all_of(chosen.begin(), chosen.end(),
                                    [&](int c) { return std::abs(c - t) >= gap; });
    if (spaced) chosen.push_back(t);
  }
  if (chosen.empty()) {
    for (int t = 0; t < n; ++t) {
      if (!coarse.masks[t].empty()) {
        chosen.push_back(t);
        break;
      }
    }
  }
  std::sort(chosen.begin(), chosen.end());
  AnchorSet set;
  for (int t : chosen) set.entries.push_back(MakeAnchor(coarse, t, rel[t]));
  return set;
}

// ---- Stage 4 ----

inline Trajectory StagePropagate(const VideoClip& video, const Query& query,
                                 const AnchorSet& anchors, Backend& backend,
                                 uint64_t seed = 0) {
  if (anchors.empty()) throw ContractError("propagation needs at least one anchor");
  Trajectory t = backend.Propagate(video, query, anchors, seed);
  t.Validate(static_cast<size_t>(video.frames), video.height, video.width);
  if (!t.boxes) AttachBoxes(t);
  return t;
}

// ---- Stage 5 ----

inline bool IsAmbiguous(const Mask& coarse, const Mask& prop, double tau_amb) {
  if (coarse.empty() != prop.empty()) return true;
  return IoU(coarse, prop) < tau_amb;
}

// Non-ambiguous frames take the propagated mask. Ambiguous frames are decided
// in temporal order; each candidate scores the mean IoU against finalized,
// non-empty neighbours within `planner_window` on either side, plus
// confidence_weight x its own confidence (0 when absent). Ties go to the
// propagated candidate.
inline std::pair<Trajectory, PlannerTrace> StagePlanner(const Trajectory& coarse,
                                                        const Trajectory& prop,
                                                        const PipelineConfig& config) {
  if (coarse.size() != prop.size()) throw ContractError("planner: length mismatch");
  const int n = static_cast<int>(coarse.size());
  for (int t = 0; t < n; ++t) {
    if (!coarse.masks[t].SameShape(prop.masks[t])) {
      throw ContractError("planner: dimension mismatch at frame " + std::to_string(t));
    }
  }
  PlannerTrace trace;
  trace.frames.resize(static_cast<size_t>(n));
  std::vector<const Mask*> chosen(static_cast<size_t>(n), nullptr);
  for (int t = 0; t < n; ++t) {
    PlannerRecord& r = trace.frames[t];
    r.frame = t;
    r.ambiguous = IsAmbiguous(coarse.masks[t], prop.masks[t], config.tau_amb);
    r.source = Source::kPropagated;
    if (!r.ambiguous) chosen[t] = &prop.masks[t];
  }
  auto score = [&](const Mask& candidate, std::optional<double> conf, int t) {
    double sum = 0.0;
    int count = 0;
    for (int s = std::max(0, t - config.planner_window);
         s <= std::min(n - 1, t + config.planner_window); ++s) {
      if (s == t || chosen[s] == nullptr || chosen[s]->empty()) continue;
      sum += IoU(candidate, *chosen[s]);
      ++count;
    }
    const double context = count > 0 ? sum / count : 0.0;
    return context + config.confidence_weight * conf.value_or(0.0);
  };
  for (int t = 0; t < n; ++t) {
    PlannerRecord& r = trace.frames[t];
    if (!r.ambiguous) continue;
    const double sc = score(coarse.masks[t], coarse.ConfidenceAt(t), t);
    const double sp = score(prop.masks[t], prop.ConfidenceAt(t), t);
    r.score_coarse = sc;
    r.score_prop = sp;
    r.source = sc > sp ? Source::kCoarse : Source::kPropagated;
    chosen[t] = r.source == Source::kCoarse ? &coarse.masks[t] : &prop.masks[t];
  }
  Trajectory out;
  out.masks.reserve(static_cast<size_t>(n));
  for (int t = 0; t < n; ++t) out.masks.push_back(*chosen[t]);
  AttachBoxes(out);
  return {std::move(out), std::move(trace)};
}

// Upper bound for any per-frame selector: picks the candidate with the higher
// J against ground truth, propagated on ties. Test and analysis use only.
inline Trajectory OraclePlanner(const Trajectory& coarse, const Trajectory& prop,
                                const Trajectory& gt) {
  if (coarse.size() != prop.size() || coarse.size() != gt.size()) {
    throw ContractError("oracle planner: length mismatch");
  }
  Trajectory out;
  for (size_t t = 0; t < gt.size(); ++t) {
    const double jc = metrics::RegionJaccard(coarse.masks[t], gt.masks[t]);
    const double jp = metrics::RegionJaccard(prop.masks[t], gt.masks[t]);
    out.masks.push_back(jc > jp ? coarse.masks[t] : prop.masks[t]);
  }
  return out;
}

// Per-frame, per-pixel strict majority over an ensemble of trajectories.
inline Trajectory SelectiveAverage(const std::vector<Trajectory>& inputs) {
  if (inputs.empty()) throw ContractError("selective average of an empty list");
  const size_t frames = inputs.front().size();
  for (const auto& t : inputs) {
    if (t.size() != frames) throw ContractError("selective average: length mismatch");
  }
  if (inputs.size() == 1) return inputs.front();
  Trajectory out;
  for (size_t f = 0; f < frames; ++f) {
    const Mask& first = inputs.front().masks[f];
    std::vector<uint32_t> votes(static_cast<size_t>(first.pixel_count()), 0);
    for (const auto& t : inputs) {
      if (!t.masks[f].SameShape(first)) {
        throw ContractError("selective average: dimension mismatch");
      }
      for (const Run& r : t.masks[f].runs()) {
        for (int64_t k = r.start; k < r.end(); ++k) ++votes[k];
      }
    }
    BitGrid g(first.height(), first.width());
    auto bits = g.bits();
    for (size_t k = 0; k < votes.size(); ++k) {
      bits[k] = 2 * static_cast<size_t>(votes[k]) > inputs.size() ? 1 : 0;
    }
    out.masks.push_back(Encode(g));
  }
  return out;
}

inline constexpr const char* kFlagCoarseAllEmpty = "coarse_all_empty";

namespace internal {

class StageClock {
 public:
  StageClock() : start_(std::chrono::steady_clock::now()) {}
  double ElapsedMs() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

template <typename F>
auto InStage(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const RunError&) {
    throw;
  } catch (const ContractError&) {
    throw;
  } catch (const Error& e) {
    throw RunError(stage, e.what());
  } catch (const std::exception& e) {
    throw RunError(stage, e.what());
  }
}

}  // namespace internal

// Full run for one (video, query). Absent targets short-circuit to all-zero
// masks with no further backend calls.
inline RunResult RunPipeline(const VideoClip& video, const Query& query,
                     const PipelineConfig& config, Backend& backend) {
  video.Validate();
  config.Validate();
  if (query.text.empty()) throw ContractError("query expression is empty");
  CountingBackend counted(backend);
  RunResult r;
  r.video = video.id;
  r.query = query.id;
  const size_t frames = static_cast<size_t>(video.frames);

  internal::StageClock clock;
  r.presence = internal::InStage("presence", [&] {
    return StagePresence(video, query, counted, config.presence_threshold, config.seed);
  });
  r.timings.presence_ms = clock.ElapsedMs();
  if (!r.presence.present) {
    r.final = Trajectory::Zeros(frames, video.height, video.width);
    r.calls = counted.counts();
    return r;
  }

  clock = {};
  r.coarse = internal::InStage("coarse", [&] {
    return StageCoarse(video, query, counted, config.seed);
  });
  r.timings.coarse_ms = clock.ElapsedMs();
  if (r.coarse->AllEmpty()) {
    r.flags.push_back(kFlagCoarseAllEmpty);
    r.final = Trajectory::Zeros(frames, video.height, video.width);
    r.calls = counted.counts();
    return r;
  }

  clock = {};
  r.anchors = internal::InStage("anchors", [&] { return StageAnchors(*r.coarse, config); });
  r.timings.anchors_ms = clock.ElapsedMs();

  clock = {};
  r.propagated = internal::InStage("propagate", [&] {
    return StagePropagate(video, query, *r.anchors, counted, config.seed);
  });
  r.timings.propagate_ms = clock.ElapsedMs();

  clock = {};
  auto [final, trace] = internal::InStage("planner", [&] {
    return StagePlanner(*r.coarse, *r.propagated, config);
  });
  r.timings.planner_ms = clock.ElapsedMs();
  r.final = std::move(final);
  r.planner = std::move(trace);
  r.calls = counted.counts();
  return r;
}

}  // namespace refvos
