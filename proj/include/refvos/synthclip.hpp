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

// Seeded synthetic clips: bouncing rectangles and ellipses with z-order
// occlusion, structured referring expressions, and exact ground truth.
#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "refvos/error.hpp"
#include "refvos/mask.hpp"
#include "refvos/random.hpp"
#include "refvos/trajectory.hpp"

namespace refvos::synth {

enum class Shape { kRectangle, kEllipse };
enum class Color { kRed, kGreen, kBlue, kYellow, kPurple, kOrange };
enum class Motion { kStatic, kLeft, kRight, kUp, kDown };
enum class SizeRank { kLargest, kSmallest };

inline constexpr std::array<Shape, 2> kShapes = {Shape::kRectangle,
                                                 Shape::kEllipse};
inline constexpr std::array<Color, 6> kColors = {
    Color::kRed,    Color::kGreen,  Color::kBlue,
    Color::kYellow, Color::kPurple, Color::kOrange};

inline std::string_view Name(Shape s) {
  return s == Shape::kRectangle ? "rectangle" : "ellipse";
}

inline std::string_view Name(Color c) {
  switch (c) {
    case Color::kRed: return "red";
    case Color::kGreen: return "green";
    case Color::kBlue: return "blue";
    case Color::kYellow: return "yellow";
    case Color::kPurple: return "purple";
    case Color::kOrange: return "orange";
  }
  return "";
}

inline std::string_view Name(Motion m) {
  switch (m) {
    case Motion::kStatic: return "static";
    case Motion::kLeft: return "left";
    case Motion::kRight: return "right";
    case Motion::kUp: return "up";
    case Motion::kDown: return "down";
  }
  return "";
}

inline std::string_view Name(SizeRank s) {
  return s == SizeRank::kLargest ? "largest" : "smallest";
}

template <typename Enum, size_t N>
Enum ParseEnum(std::string_view text, const std::array<Enum, N>& values,
               std::string_view what) {
  for (Enum v : values) {
    if (Name(v) == text) return v;
  }
  throw CodecError(std::string(what) + ": unknown value '" +
                   std::string(text) + "'");
}

inline constexpr std::array<Motion, 5> kMotions = {
    Motion::kStatic, Motion::kLeft, Motion::kRight, Motion::kUp, Motion::kDown};
inline constexpr std::array<SizeRank, 2> kSizeRanks = {SizeRank::kLargest,
                                                       SizeRank::kSmallest};

struct Position {
  int x = 0;
  int y = 0;
  friend bool operator==(const Position&, const Position&) = default;
};

struct SceneObject {
  int id = 0;  // >= 1; 0 is background in label maps
  Shape shape = Shape::kRectangle;
  Color color = Color::kRed;
  int w = 1;
  int h = 1;
  int x = 0;  // top-left at frame 0
  int y = 0;
  int vx = 0;
  int vy = 0;
  int z = 0;  // higher draws on top

  int64_t NominalArea() const { return static_cast<int64_t>(w) * h; }

  // Dominant direction of the initial velocity; horizontal wins ties.
  Motion motion() const {
    if (vx == 0 && vy == 0) return Motion::kStatic;
    if (std::abs(vx) >= std::abs(vy)) return vx > 0 ? Motion::kRight : Motion::kLeft;
    return vy > 0 ? Motion::kDown : Motion::kUp;
  }

  friend bool operator==(const SceneObject&, const SceneObject&) = default;
};

// Top-left positions over `frames` frames: linear motion reflected at the
// frame border.
inline std::vector<Position> Trajectory2D(const SceneObject& o, int height,
                                          int width, int frames) {
  std::vector<Position> out;
  out.reserve(frames);
  const int xmax = width - o.w, ymax = height - o.h;
  int x = o.x, y = o.y, vx = o.vx, vy = o.vy;
  auto step = [](int& p, int& v, int pmax) {
    if (pmax == 0) {
      v = 0;
      return;
    }
    p += v;
    // Reflect until inside; speeds are bounded by the range in practice.
    while (p < 0 || p > pmax) {
      if (p < 0) p = -p;
      if (p > pmax) p = 2 * pmax - p;
      v = -v;
    }
  };
  for (int t = 0; t < frames; ++t) {
    out.push_back({x, y});
    step(x, vx, xmax);
    step(y, vy, ymax);
  }
  return out;
}

// Exact integer rasterization. Ellipse pixels are those whose centres lie in
// the ellipse inscribed in the w x h box.
inline bool ShapeCovers(Shape shape, int w, int h, int px, int py) {
  if (px < 0 || py < 0 || px >= w || py >= h) return false;
  if (shape == Shape::kRectangle) return true;
  const int64_t dx = 2 * px + 1 - w, dy = 2 * py + 1 - h;
  const int64_t ww = static_cast<int64_t>(w) * w, hh = static_cast<int64_t>(h) * h;
  return dx * dx * hh + dy * dy * ww <= ww * hh;
}

struct Predicate {
  std::optional<Color> color = std::nullopt;
  std::optional<Shape> shape = std::nullopt;
  std::optional<Motion> motion = std::nullopt;
  std::optional<SizeRank> size = std::nullopt;

  bool IsEmpty() const { return !color && !shape && !motion && !size; }

  // Attribute test against `o` within the scene `objects` (for size rank).
  bool Matches(const SceneObject& o, const std::vector<SceneObject>& objects) const {
    if (color && o.color != *color) return false;
    if (shape && o.shape != *shape) return false;
    if (motion && o.motion() != *motion) return false;
    if (size) {
      for (const SceneObject& other : objects) {
        if (*size == SizeRank::kLargest && other.NominalArea() > o.NominalArea()) return false;
        if (*size == SizeRank::kSmallest && other.NominalArea() < o.NominalArea()) return false;
      }
    }
    return true;
  }

  // Canonical text, e.g. "the largest red ellipse moving left".
  std::string Text() const {
    std::string s = "the";
    if (size) (s += ' ') += Name(*size);
    if (color) (s += ' ') += Name(*color);
    s += ' ';
    s += shape ? Name(*shape) : std::string_view("object");
    if (motion) {
      if (*motion == Motion::kStatic) {
        s += " that stays still";
      } else {
        (s += " moving ") += Name(*motion);
      }
    }
    return s;
  }

  friend bool operator==(const Predicate&, const Predicate&) = default;
};

inline nlohmann::json ToJson(const Predicate& p) {
  nlohmann::json j = nlohmann::json::object();
  if (p.color) j["color"] = Name(*p.color);
  if (p.shape) j["shape"] = Name(*p.shape);
  if (p.motion) j["motion"] = Name(*p.motion);
  if (p.size) j["size"] = Name(*p.size);
  return j;
}

inline Predicate PredicateFromJson(const nlohmann::json& j) {
  if (!j.is_object()) throw CodecError("predicate: expected an object");
  Predicate p;
  if (j.contains("color")) p.color = ParseEnum(j["color"].get<std::string>(), kColors, "color");
  if (j.contains("shape")) p.shape = ParseEnum(j["shape"].get<std::string>(), kShapes, "shape");
  if (j.contains("motion")) p.motion = ParseEnum(j["motion"].get<std::string>(), kMotions, "motion");
  if (j.contains("size")) p.size = ParseEnum(j["size"].get<std::string>(), kSizeRanks, "size");
  return p;
}

struct QuerySpec {
  std::string id;
  std::string text;
  Predicate predicate;
  std::optional<int> target;  // absent for negative queries

  friend bool operator==(const QuerySpec&, const QuerySpec&) = default;
};

// Per-pixel object id, 0 for background.
struct LabelMap {
  int height = 0;
  int width = 0;
  std::vector<int32_t> ids;

  int32_t at(int x, int y) const { return ids[static_cast<size_t>(y) * width + x]; }
  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

class Scenario {
 public:
  std::string id;
  uint64_t seed = 0;
  int height = 0;
  int width = 0;
  int frames = 0;
  std::vector<SceneObject> objects;
  std::vector<QuerySpec> queries;

  // Renders label maps and per-object visible masks. Must be called once the
  // public fields are final; everything below reads the caches.
  void Prepare() {
    Validate();
    label_maps_.clear();
    std::vector<std::vector<Position>> paths;
    for (const SceneObject& o : objects) {
      paths.push_back(Trajectory2D(o, height, width, frames));
    }
    std::vector<size_t> order(objects.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return objects[a].z < objects[b].z;
    });
    for (int t = 0; t < frames; ++t) {
      LabelMap lm{height, width, std::vector<int32_t>(static_cast<size_t>(height) * width, 0)};
      for (size_t i : order) {
        const SceneObject& o = objects[i];
        const Position p = paths[i][t];
        for (int dy = 0; dy < o.h; ++dy) {
          for (int dx = 0; dx < o.w; ++dx) {
            if (ShapeCovers(o.shape, o.w, o.h, dx, dy)) {
              lm.ids[static_cast<size_t>(p.y + dy) * width + p.x + dx] = o.id;
            }
          }
        }
      }
      label_maps_.push_back(std::move(lm));
    }
    positions_ = std::move(paths);
    BuildVisibleMasks();
  }

  // Replaces rendering with externally supplied per-object visible masks.
  void PrepareFromMasks(const std::vector<std::vector<Mask>>& per_object) {
    Validate();
    if (per_object.size() != objects.size()) {
      throw CodecError("scenario: embedded label maps do not cover every object");
    }
    label_maps_.assign(frames, LabelMap{height, width,
                                        std::vector<int32_t>(static_cast<size_t>(height) * width, 0)});
    for (size_t i = 0; i < objects.size(); ++i) {
      if (per_object[i].size() != static_cast<size_t>(frames)) {
        throw CodecError("scenario: embedded label map has wrong frame count");
      }
      for (int t = 0; t < frames; ++t) {
        const Mask& m = per_object[i][t];
        if (m.height() != height || m.width() != width) {
          throw CodecError("scenario: embedded mask has wrong dimensions");
        }
        for (const Run& r : m.runs()) {
          for (int64_t k = r.start; k < r.end(); ++k) {
            auto& slot = label_maps_[t].ids[k];
            if (slot != 0) throw CodecError("scenario: embedded masks overlap");
            slot = objects[i].id;
          }
        }
      }
    }
    positions_.clear();
    for (const SceneObject& o : objects) {
      positions_.push_back(Trajectory2D(o, height, width, frames));
    }
    BuildVisibleMasks();
  }

  bool prepared() const { return !label_maps_.empty(); }

  const LabelMap& label_map(int t) const { return label_maps_.at(t); }

  const SceneObject* FindObject(int object_id) const {
    for (const SceneObject& o : objects) {
      if (o.id == object_id) return &o;
    }
    return nullptr;
  }

  const QuerySpec* FindQuery(std::string_view query_id) const {
    for (const QuerySpec& q : queries) {
      if (q.id == query_id) return &q;
    }
    return nullptr;
  }

  // Post-occlusion mask of `object_id` at every frame.
  const std::vector<Mask>& VisibleMasks(int object_id) const {
    for (size_t i = 0; i < objects.size(); ++i) {
      if (objects[i].id == object_id) return visible_.at(i);
    }
    throw ContractError("unknown object id " + std::to_string(object_id));
  }

  // Unoccluded top-left of `object_id` at frame t.
  Position PositionAt(int object_id, int t) const {
    for (size_t i = 0; i < objects.size(); ++i) {
      if (objects[i].id == object_id) return positions_.at(i).at(t);
    }
    throw ContractError("unknown object id " + std::to_string(object_id));
  }

  bool VisibleAnywhere(int object_id) const {
    for (const Mask& m : VisibleMasks(object_id)) {
      if (!m.empty()) return true;
    }
    return false;
  }

  // Objects the predicate selects that are visible on at least one frame.
  std::vector<int> MatchingObjects(const Predicate& p) const {
    std::vector<int> ids;
    for (const SceneObject& o : objects) {
      if (p.Matches(o, objects) && VisibleAnywhere(o.id)) ids.push_back(o.id);
    }
    return ids;
  }

 private:
  void Validate() const {
    if (height < 1 || width < 1 || frames < 1) {
      throw GenerationError("scenario: dimensions and frame count must be >= 1");
    }
    std::vector<int> ids, zs;
    for (const SceneObject& o : objects) {
      if (o.id < 1) throw GenerationError("scenario: object ids start at 1");
      if (o.w < 1 || o.h < 1 || o.w > width || o.h > height) {
        throw GenerationError("scenario: object size outside the frame");
      }
      if (o.x < 0 || o.y < 0 || o.x + o.w > width || o.y + o.h > height) {
        throw GenerationError("scenario: object starts outside the frame");
      }
      ids.push_back(o.id);
      zs.push_back(o.z);
    }
    std::sort(ids.begin(), ids.end());
    std::sort(zs.begin(), zs.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
      throw GenerationError("scenario: duplicate object id");
    }
    if (std::adjacent_find(zs.begin(), zs.end()) != zs.end()) {
      throw GenerationError("scenario: duplicate z-order");
    }
  }

  void BuildVisibleMasks() {
    visible_.assign(objects.size(), {});
    for (size_t i = 0; i < objects.size(); ++i) {
      for (int t = 0; t < frames; ++t) {
        const LabelMap& lm = label_maps_[t];
        std::vector<Run> runs;
        const int64_t n = static_cast<int64_t>(lm.ids.size());
        int64_t k = 0;
        while (k < n) {
          if (lm.ids[k] != objects[i].id) {
            ++k;
            continue;
          }
          int64_t e = k;
          while (e < n && lm.ids[e] == objects[i].id) ++e;
          runs.push_back({k, e - k});
          k = e;
        }
        visible_[i].push_back(Mask::FromRuns(height, width, std::move(runs)));
      }
    }
  }

  std::vector<LabelMap> label_maps_;
  std::vector<std::vector<Position>> positions_;
  std::vector<std::vector<Mask>> visible_;
};

inline LabelMap RenderLabelMap(const Scenario& s, int t) {
  if (t < 0 || t >= s.frames) throw ContractError("frame index out of range");
  if (!s.prepared()) {
    Scenario copy = s;
    copy.Prepare();
    return copy.label_map(t);
  }
  return s.label_map(t);
}

struct GroundTruth {
  bool present = false;
  std::optional<Trajectory> trajectory;
  std::optional<int> target;
};

// Present iff exactly one visible object satisfies the predicate.
inline GroundTruth ComputeGroundTruth(const Scenario& s, const Predicate& p) {
  const auto ids = s.MatchingObjects(p);
  if (ids.size() > 1) {
    throw AmbiguousQueryError("predicate '" + p.Text() + "' matches " +
                              std::to_string(ids.size()) + " objects");
  }
  GroundTruth gt;
  if (ids.empty()) return gt;
  gt.present = true;
  gt.target = ids.front();
  Trajectory traj;
  traj.masks = s.VisibleMasks(ids.front());
  gt.trajectory = std::move(traj);
  return gt;
}

inline GroundTruth ComputeGroundTruth(const Scenario& s, std::string_view query_id) {
  const QuerySpec* q = s.FindQuery(query_id);
  if (q == nullptr) {
    throw ContractError("query '" + std::string(query_id) + "' not in scenario " + s.id);
  }
  return ComputeGroundTruth(s, q->predicate);
}

struct GenSpec {
  int height = 64;
  int width = 64;
  int frames = 24;
  int min_objects = 3;
  int max_objects = 5;
  int min_size = 8;
  int max_size = 20;
  int max_speed = 2;
  int positive_queries = 2;
  int negative_queries = 1;
  // Chance that a new object reuses an earlier object's colour, which makes
  // single-attribute expressions ambiguous and forces distractors.
  double shared_color_prob = 0.4;
  int max_attempts = 64;
};

namespace internal {

template <typename T>
const T& Pick(Rng& rng, const std::vector<T>& v) {
  return v[static_cast<size_t>(rng.UniformInt(0, static_cast<int64_t>(v.size()) - 1))];
}

inline std::vector<Predicate> CandidatePredicates(const SceneObject& o) {
  // Ordered by number of attributes; callers take the first non-empty tier.
  std::vector<Predicate> out;
  const auto motion = o.motion();
  out.push_back({o.color, {}, {}, {}});
  out.push_back({{}, o.shape, {}, {}});
  out.push_back({{}, {}, motion, {}});
  out.push_back({{}, {}, {}, SizeRank::kLargest});
  out.push_back({{}, {}, {}, SizeRank::kSmallest});
  out.push_back({o.color, o.shape, {}, {}});
  out.push_back({o.color, {}, motion, {}});
  out.push_back({{}, o.shape, motion, {}});
  out.push_back({o.color, {}, {}, SizeRank::kLargest});
  out.push_back({o.color, {}, {}, SizeRank::kSmallest});
  out.push_back({o.color, o.shape, motion, {}});
  return out;
}

inline int AttributeCount(const Predicate& p) {
  return (p.color ? 1 : 0) + (p.shape ? 1 : 0) + (p.motion ? 1 : 0) + (p.size ? 1 : 0);
}

}  // namespace internal

// Deterministic scenario for (seed, spec). Throws GenerationError when the
// spec cannot be satisfied within `max_attempts` object draws.
inline Scenario Generate(uint64_t seed, const GenSpec& spec, std::string id = {}) {
  if (spec.height < 1 || spec.width < 1 || spec.frames < 1) {
    throw GenerationError("spec: frame dimensions and count must be >= 1");
  }
  if (spec.min_objects < 1 || spec.max_objects < spec.min_objects) {
    throw GenerationError("spec: need 1 <= min_objects <= max_objects");
  }
  if (spec.min_size < 1 || spec.max_size < spec.min_size ||
      spec.max_size > std::min(spec.height, spec.width)) {
    throw GenerationError("spec: object size range must fit in the frame");
  }
  if (spec.max_speed < 0 || spec.positive_queries < 0 || spec.negative_queries < 0) {
    throw GenerationError("spec: negative speed or query count");
  }
  if (spec.positive_queries > spec.max_objects) {
    throw GenerationError("spec: more positive queries than objects");
  }

  Rng rng(MixSeed(seed, "synthclip.generate"));
  std::string last_failure = "no attempts made";
  for (int attempt = 0; attempt < spec.max_attempts; ++attempt) {
    Scenario s;
    s.id = id.empty() ? "scene_" + std::to_string(seed) : id;
    s.seed = seed;
    s.height = spec.height;
    s.width = spec.width;
    s.frames = spec.frames;

    const int n = static_cast<int>(rng.UniformInt(spec.min_objects, spec.max_objects));
    std::vector<int> zs(n);
    for (int i = 0; i < n; ++i) zs[i] = i + 1;
    for (int i = n - 1; i > 0; --i) {
      std::swap(zs[i], zs[static_cast<size_t>(rng.UniformInt(0, i))]);
    }
    for (int i = 0; i < n; ++i) {
      SceneObject o;
      o.id = i + 1;
      o.shape = kShapes[static_cast<size_t>(rng.UniformInt(0, 1))];
      if (i > 0 && rng.Bernoulli(spec.shared_color_prob)) {
        o.color = s.objects[static_cast<size_t>(rng.UniformInt(0, i - 1))].color;
      } else {
        o.color = kColors[static_cast<size_t>(rng.UniformInt(0, kColors.size() - 1))];
      }
      o.w = static_cast<int>(rng.UniformInt(spec.min_size, spec.max_size));
      o.h = static_cast<int>(rng.UniformInt(spec.min_size, spec.max_size));
      o.x = static_cast<int>(rng.UniformInt(0, spec.width - o.w));
      o.y = static_cast<int>(rng.UniformInt(0, spec.height - o.h));
      o.vx = static_cast<int>(rng.UniformInt(-spec.max_speed, spec.max_speed));
      o.vy = static_cast<int>(rng.UniformInt(-spec.max_speed, spec.max_speed));
      o.z = zs[i];
      s.objects.push_back(o);
    }
    s.Prepare();

    bool all_visible = true;
    for (const SceneObject& o : s.objects) all_visible &= s.VisibleAnywhere(o.id);
    if (!all_visible) {
      last_failure = "an object is occluded on every frame";
      continue;
    }

    // Positive queries: for each object, the least specific unique predicates.
    std::vector<std::pair<int, std::vector<Predicate>>> identifiable;
    for (const SceneObject& o : s.objects) {
      std::vector<Predicate> best;
      int best_count = 0;
      for (const Predicate& p : internal::CandidatePredicates(o)) {
        const int c = internal::AttributeCount(p);
        if (best_count != 0 && c > best_count) break;
        if (!p.Matches(o, s.objects)) continue;
        if (s.MatchingObjects(p).size() == 1) {
          best.push_back(p);
          best_count = c;
        }
      }
      if (!best.empty()) identifiable.emplace_back(o.id, std::move(best));
    }
    if (static_cast<int>(identifiable.size()) < spec.positive_queries) {
      last_failure = "too few uniquely describable objects";
      continue;
    }
    for (int i = static_cast<int>(identifiable.size()) - 1; i > 0; --i) {
      std::swap(identifiable[i], identifiable[static_cast<size_t>(rng.UniformInt(0, i))]);
    }

    std::vector<Predicate> negatives;
    for (Color c : kColors) {
      for (Shape sh : kShapes) {
        Predicate p{c, sh, {}, {}};
        if (s.MatchingObjects(p).empty()) negatives.push_back(p);
      }
    }
    if (static_cast<int>(negatives.size()) < spec.negative_queries) {
      // Every colour/shape pair appears in the scene: no negative is possible
      // at this tier, and adding motion would not be "absent from the scene".
      last_failure = "all colour/shape combinations are present";
      continue;
    }

    int qn = 0;
    for (int i = 0; i < spec.positive_queries; ++i) {
      const auto& [target, preds] = identifiable[static_cast<size_t>(i)];
      QuerySpec q;
      q.id = "q" + std::to_string(qn++);
      q.predicate = internal::Pick(rng, preds);
      q.text = q.predicate.Text();
      q.target = target;
      s.queries.push_back(std::move(q));
    }
    for (int i = 0; i < spec.negative_queries; ++i) {
      const size_t k = static_cast<size_t>(
          rng.UniformInt(0, static_cast<int64_t>(negatives.size()) - 1));
      QuerySpec q;
      q.id = "q" + std::to_string(qn++);
      q.predicate = negatives[k];
      q.text = q.predicate.Text();
      s.queries.push_back(std::move(q));
      negatives.erase(negatives.begin() + static_cast<std::ptrdiff_t>(k));
    }
    return s;
  }
  throw GenerationError("cannot satisfy generation spec after " +
                        std::to_string(spec.max_attempts) +
                        " attempts: " + last_failure);
}

// ---- Scenario file ----

inline nlohmann::json ToJson(const Scenario& s, bool embed_label_maps = false) {
  nlohmann::json objects = nlohmann::json::array();
  for (const SceneObject& o : s.objects) {
    objects.push_back({{"id", o.id},
                       {"shape", Name(o.shape)},
                       {"color", Name(o.color)},
                       {"w", o.w},
                       {"h", o.h},
                       {"x", o.x},
                       {"y", o.y},
                       {"vx", o.vx},
                       {"vy", o.vy},
                       {"z", o.z}});
  }
  nlohmann::json queries = nlohmann::json::array();
  for (const QuerySpec& q : s.queries) {
    queries.push_back({{"id", q.id},
                       {"text", q.text},
                       {"predicate", ToJson(q.predicate)},
                       {"target", q.target ? nlohmann::json(*q.target) : nlohmann::json()}});
  }
  nlohmann::json j = {{"format", "refvos.scenario"},
                      {"version", 1},
                      {"id", s.id},
                      {"seed", s.seed},
                      {"height", s.height},
                      {"width", s.width},
                      {"frames", s.frames},
                      {"objects", std::move(objects)},
                      {"queries", std::move(queries)}};
  if (embed_label_maps) {
    nlohmann::json maps = nlohmann::json::object();
    for (const SceneObject& o : s.objects) {
      nlohmann::json frames = nlohmann::json::array();
      for (const Mask& m : s.VisibleMasks(o.id)) frames.push_back(ToWire(m));
      maps[std::to_string(o.id)] = std::move(frames);
    }
    j["label_maps"] = std::move(maps);
  }
  return j;
}

inline Scenario ScenarioFromJson(const nlohmann::json& j) {
  try {
    if (j.value("format", "") != "refvos.scenario" || j.value("version", 0) != 1) {
      throw CodecError("scenario: unsupported format or version");
    }
    Scenario s;
    s.id = j.at("id").get<std::string>();
    s.seed = j.at("seed").get<uint64_t>();
    s.height = j.at("height").get<int>();
    s.width = j.at("width").get<int>();
    s.frames = j.at("frames").get<int>();
    for (const auto& o : j.at("objects")) {
      SceneObject so;
      so.id = o.at("id").get<int>();
      so.shape = ParseEnum(o.at("shape").get<std::string>(), kShapes, "shape");
      so.color = ParseEnum(o.at("color").get<std::string>(), kColors, "color");
      so.w = o.at("w").get<int>();
      so.h = o.at("h").get<int>();
      so.x = o.at("x").get<int>();
      so.y = o.at("y").get<int>();
      so.vx = o.at("vx").get<int>();
      so.vy = o.at("vy").get<int>();
      so.z = o.at("z").get<int>();
      s.objects.push_back(so);
    }
    for (const auto& q : j.at("queries")) {
      QuerySpec qs;
      qs.id = q.at("id").get<std::string>();
      qs.text = q.at("text").get<std::string>();
      qs.predicate = PredicateFromJson(q.at("predicate"));
      if (q.contains("target") && !q["target"].is_null()) qs.target = q["target"].get<int>();
      s.queries.push_back(std::move(qs));
    }
    if (j.contains("label_maps")) {
      std::vector<std::vector<Mask>> per_object;
      for (const SceneObject& o : s.objects) {
        const auto& frames = j["label_maps"].at(std::to_string(o.id));
        std::vector<Mask> masks;
        for (const auto& m : frames) masks.push_back(MaskFromWire(m));
        per_object.push_back(std::move(masks));
      }
      s.PrepareFromMasks(per_object);
    } else {
      s.Prepare();
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw CodecError(std::string("scenario: ") + e.what());
  } catch (const GenerationError& e) {
    throw CodecError(std::string("scenario: ") + e.what());
  }
}

}  // namespace refvos::synth
