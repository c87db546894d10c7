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

// The three model services a run needs, and the in-process mocks that stand
// in for them on synthetic clips.
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "refvos/error.hpp"
#include "refvos/mask.hpp"
#include "refvos/random.hpp"
#include "refvos/synthclip.hpp"
#include "refvos/types.hpp"

namespace refvos {

// One backend session. Implementations need not be thread-safe; the engine
// gives every concurrent run its own session. `seed` is the run seed.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual PresenceDecision JudgePresence(const VideoClip& video,
                                         const Query& query, uint64_t seed) = 0;
  virtual Trajectory Ground(const VideoClip& video, const Query& query,
                            uint64_t seed) = 0;
  virtual Trajectory Propagate(const VideoClip& video, const Query& query,
                               const AnchorSet& anchors, uint64_t seed) = 0;
};

// Forwards to another backend and counts calls per kind.
class CountingBackend : public Backend {
 public:
  explicit CountingBackend(Backend& inner) : inner_(inner) {}

  PresenceDecision JudgePresence(const VideoClip& v, const Query& q,
                                 uint64_t seed) override {
    ++counts_.presence;
    return inner_.JudgePresence(v, q, seed);
  }
  Trajectory Ground(const VideoClip& v, const Query& q, uint64_t seed) override {
    ++counts_.ground;
    return inner_.Ground(v, q, seed);
  }
  Trajectory Propagate(const VideoClip& v, const Query& q, const AnchorSet& a,
                       uint64_t seed) override {
    ++counts_.propagate;
    return inner_.Propagate(v, q, a, seed);
  }

  const CallCounts& counts() const { return counts_; }

 private:
  Backend& inner_;
  CallCounts counts_;
};

// Corruption applied by the mock grounder (and presence flips by the mock
// judge). Morphology radius is drawn per frame, uniformly from
// [min_radius, max_radius]; negative values erode.
struct NoiseProfile {
  uint64_t seed = 0;
  int min_radius = 0;
  int max_radius = 0;
  double dropout = 0.0;
  double hallucination = 0.0;
  double confusion = 0.0;
  double presence_flip = 0.0;

  bool IsZero() const {
    return min_radius == 0 && max_radius == 0 && dropout == 0.0 &&
           hallucination == 0.0 && confusion == 0.0 && presence_flip == 0.0;
  }

  void Validate() const {
    if (min_radius > max_radius) throw ConfigError("noise: min_radius > max_radius");
    for (double p : {dropout, hallucination, confusion, presence_flip}) {
      if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("noise: probability outside [0, 1]");
    }
  }
};

inline nlohmann::json ToJson(const NoiseProfile& n) {
  return {{"seed", n.seed},
          {"min_radius", n.min_radius},
          {"max_radius", n.max_radius},
          {"dropout", n.dropout},
          {"hallucination", n.hallucination},
          {"confusion", n.confusion},
          {"presence_flip", n.presence_flip}};
}

inline NoiseProfile NoiseProfileFromJson(const nlohmann::json& j) {
  NoiseProfile n;
  try {
    n.seed = j.value("seed", uint64_t{0});
    n.min_radius = j.value("min_radius", 0);
    n.max_radius = j.value("max_radius", 0);
    n.dropout = j.value("dropout", 0.0);
    n.hallucination = j.value("hallucination", 0.0);
    n.confusion = j.value("confusion", 0.0);
    n.presence_flip = j.value("presence_flip", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("noise: ") + e.what());
  }
  n.Validate();
  return n;
}

namespace mock {

inline const synth::Scenario& RequireScenario(const VideoClip& v) {
  if (!v.scenario) {
    throw BackendError("unsupported", "mock backends need a synthetic clip with label maps");
  }
  return *v.scenario;
}

inline const synth::Predicate& RequirePredicate(const Query& q) {
  if (!q.predicate) {
    throw BackendError("unsupported", "mock backends need a structured predicate");
  }
  return *q.predicate;
}

// The object the predicate selects, if any; mocks perceive the scene exactly.
inline std::optional<int> Referent(const synth::Scenario& s, const synth::Predicate& p) {
  const auto ids = s.MatchingObjects(p);
  if (ids.size() > 1) {
    throw BackendError("ambiguous_query", "predicate matches several objects");
  }
  if (ids.empty()) return std::nullopt;
  return ids.front();
}

inline uint64_t CallSeed(const NoiseProfile& noise, uint64_t run_seed,
                         const VideoClip& v, const Query& q, std::string_view kind) {
  std::string salt = v.id;
  salt += '\x1f';
  salt += q.id;
  salt += '\x1f';
  salt += kind;
  return MixSeed(MixSeed(noise.seed, run_seed), salt);
}

inline double Quantize2(double v) { return std::round(v * 100.0) / 100.0; }

// Confidence 1 if some visible object satisfies the predicate, else 0; with
// probability `presence_flip` the answer is inverted.
inline PresenceDecision Presence(const VideoClip& v, const Query& q,
                                 const NoiseProfile& noise, uint64_t run_seed) {
  const auto& s = RequireScenario(v);
  const bool present = !s.MatchingObjects(RequirePredicate(q)).empty();
  Rng rng(CallSeed(noise, run_seed, v, q, "judge_presence"));
  const bool flip = rng.Bernoulli(noise.presence_flip);
  const bool e = present != flip;
  return {e, e ? 1.0 : 0.0};
}

// Ground truth of the referent, corrupted frame by frame. Confidence is the
// true IoU of the emitted mask, rounded to two decimals.
inline Trajectory Ground(const VideoClip& v, const Query& q,
                         const NoiseProfile& noise, uint64_t run_seed) {
  const auto& s = RequireScenario(v);
  const auto referent = Referent(s, RequirePredicate(q));
  Rng rng(CallSeed(noise, run_seed, v, q, "ground"));

  std::vector<int> others;
  for (const auto& o : s.objects) {
    if (!referent || o.id != *referent) others.push_back(o.id);
  }
  std::optional<int> distractor;
  if (!others.empty()) {
    distractor = others[static_cast<size_t>(
        rng.UniformInt(0, static_cast<int64_t>(others.size()) - 1))];
  }
  std::optional<int> source = referent;
  if (!referent && rng.Bernoulli(noise.hallucination)) source = distractor;

  const Mask empty = Mask::Empty(s.height, s.width);
  Trajectory out;
  std::vector<double> conf;
  for (int t = 0; t < s.frames; ++t) {
    // Fixed draw order per frame: dropout, radius, confusion.
    const bool drop = rng.Bernoulli(noise.dropout);
    const int radius = static_cast<int>(rng.UniformInt(noise.min_radius, noise.max_radius));
    const bool confuse = rng.Bernoulli(noise.confusion);

    const Mask& truth = referent ? s.VisibleMasks(*referent)[t] : empty;
    std::optional<int> obj = source;
    if (referent && confuse && distractor) obj = distractor;
    Mask m = obj ? s.VisibleMasks(*obj)[t] : empty;
    if (radius > 0) m = Morph(m, MorphOp::kDilate, radius);
    if (radius < 0) m = Morph(m, MorphOp::kErode, -radius);
    if (drop) m = empty;
    conf.push_back(Quantize2(IoU(m, truth)));
    out.masks.push_back(std::move(m));
  }
  out.confidence = std::move(conf);
  return out;
}

// Each anchor selects the object whose visible mask at the anchor frame best
// overlaps (IoU) the anchor box; that object's true masks are propagated over
// the clip. Multiple anchors are fused by strict per-pixel majority.
inline Trajectory Propagate(const VideoClip& v, const AnchorSet& anchors) {
  const auto& s = RequireScenario(v);
  if (anchors.empty()) throw BackendError("bad_request", "propagate needs at least one anchor");
  std::vector<std::optional<int>> picks;
  for (const Anchor& a : anchors.entries) {
    if (a.frame < 0 || a.frame >= s.frames) {
      throw BackendError("bad_request", "anchor frame out of range");
    }
    const Mask box = BoxMask(s.height, s.width, a.prompt.bbox);
    std::optional<int> best;
    double best_iou = 0.0;
    for (const auto& o : s.objects) {
      const double iou = IoU(box, s.VisibleMasks(o.id)[a.frame]);
      if (iou > best_iou) {
        best_iou = iou;
        best = o.id;
      }
    }
    picks.push_back(best);
  }
  const size_t votes_needed = picks.size() / 2 + 1;
  Trajectory out;
  for (int t = 0; t < s.frames; ++t) {
    std::vector<uint16_t> votes(static_cast<size_t>(s.height) * s.width, 0);
    for (const auto& p : picks) {
      if (!p) continue;
      for (const Run& r : s.VisibleMasks(*p)[t].runs()) {
        for (int64_t k = r.start; k < r.end(); ++k) ++votes[k];
      }
    }
    BitGrid g(s.height, s.width);
    auto bits = g.bits();
    for (size_t k = 0; k < votes.size(); ++k) bits[k] = votes[k] >= votes_needed ? 1 : 0;
    out.masks.push_back(Encode(g));
  }
  AttachBoxes(out);
  return out;
}

}  // namespace mock

// In-process backend over synthetic clips.
class MockBackend : public Backend {
 public:
  explicit MockBackend(NoiseProfile noise = {}) : noise_(noise) { noise_.Validate(); }

  PresenceDecision JudgePresence(const VideoClip& v, const Query& q,
                                 uint64_t seed) override {
    return mock::Presence(v, q, noise_, seed);
  }
  Trajectory Ground(const VideoClip& v, const Query& q, uint64_t seed) override {
    return mock::Ground(v, q, noise_, seed);
  }
  Trajectory Propagate(const VideoClip& v, const Query&, const AnchorSet& a,
                       uint64_t) override {
    return mock::Propagate(v, a);
  }

  const NoiseProfile& noise() const { return noise_; }

 private:
  NoiseProfile noise_;
};

}  // namespace refvos
