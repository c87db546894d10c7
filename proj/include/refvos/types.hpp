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

// Value types shared by the pipeline, the backends and the wire protocol.
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "refvos/error.hpp"
#include "refvos/mask.hpp"
#include "refvos/synthclip.hpp"
#include "refvos/trajectory.hpp"

namespace refvos {

// A video to segment. Synthetic clips carry their scenario so in-process
// mocks can read label maps; `scenario_file` lets external backends load the
// same clip by reference.
struct VideoClip {
  std::string id;
  int frames = 0;
  int height = 0;
  int width = 0;
  std::shared_ptr<const synth::Scenario> scenario;
  std::string scenario_file;

  static VideoClip FromScenario(std::shared_ptr<const synth::Scenario> s,
                                std::string file = {}) {
    VideoClip v;
    v.id = s->id;
    v.frames = s->frames;
    v.height = s->height;
    v.width = s->width;
    v.scenario = std::move(s);
    v.scenario_file = std::move(file);
    return v;
  }

  void Validate() const {
    if (frames < 1 || height < 1 || width < 1) {
      throw ContractError("video clip needs T >= 1 and 1x1 frames");
    }
  }
};

struct Query {
  std::string id;
  std::string text;
  std::optional<synth::Predicate> predicate;
  std::optional<int> target;  // ground truth, never sent to backends

  static Query FromSpec(const synth::QuerySpec& q) {
    return {q.id, q.text, q.predicate, q.target};
  }
};

struct PresenceDecision {
  bool present = false;
  double confidence = 0.0;

  friend bool operator==(const PresenceDecision&, const PresenceDecision&) = default;
};

struct Prompt {
  BoundingBox bbox;
  std::vector<PointPrompt> points;

  friend bool operator==(const Prompt&, const Prompt&) = default;
};

struct Anchor {
  int frame = 0;  // 0-based
  Prompt prompt;
  double reliability = 0.0;

  friend bool operator==(const Anchor&, const Anchor&) = default;
};

struct AnchorSet {
  std::vector<Anchor> entries;

  bool empty() const { return entries.empty(); }
  friend bool operator==(const AnchorSet&, const AnchorSet&) = default;
};

enum class Source { kCoarse, kPropagated };

inline const char* Name(Source s) {
  return s == Source::kCoarse ? "coarse" : "propagated";
}

struct PlannerRecord {
  int frame = 0;
  bool ambiguous = false;
  std::optional<double> score_coarse;
  std::optional<double> score_prop;
  Source source = Source::kPropagated;

  friend bool operator==(const PlannerRecord&, const PlannerRecord&) = default;
};

struct PlannerTrace {
  std::vector<PlannerRecord> frames;

  int AmbiguousCount() const {
    int n = 0;
    for (const auto& r : frames) n += r.ambiguous ? 1 : 0;
    return n;
  }
  friend bool operator==(const PlannerTrace&, const PlannerTrace&) = default;
};

struct CallCounts {
  int presence = 0;
  int ground = 0;
  int propagate = 0;

  CallCounts& operator+=(const CallCounts& o) {
    presence += o.presence;
    ground += o.ground;
    propagate += o.propagate;
    return *this;
  }
  friend bool operator==(const CallCounts&, const CallCounts&) = default;
};

// Wall-clock per stage, in milliseconds. Kept out of serialized results.
struct StageTimings {
  double presence_ms = 0.0;
  double coarse_ms = 0.0;
  double anchors_ms = 0.0;
  double propagate_ms = 0.0;
  double planner_ms = 0.0;
};

struct RunResult {
  std::string video;
  std::string query;
  PresenceDecision presence;
  std::optional<Trajectory> coarse;
  std::optional<AnchorSet> anchors;
  std::optional<Trajectory> propagated;
  Trajectory final;
  std::optional<PlannerTrace> planner;
  std::vector<std::string> flags;
  CallCounts calls;
  StageTimings timings;
};

// ---- JSON forms ----

inline nlohmann::json ToJson(const VideoClip& v, bool inline_scenario = false) {
  nlohmann::json j = {{"id", v.id},
                      {"frames", v.frames},
                      {"height", v.height},
                      {"width", v.width}};
  if (!v.scenario_file.empty()) j["scenario_file"] = v.scenario_file;
  if (inline_scenario && v.scenario) j["scenario"] = synth::ToJson(*v.scenario);
  return j;
}

inline nlohmann::json ToJson(const Query& q) {
  nlohmann::json j = {{"id", q.id}, {"text", q.text}};
  if (q.predicate) j["predicate"] = synth::ToJson(*q.predicate);
  return j;
}

inline Query QueryFromJson(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("id") || !j.contains("text") ||
      !j["id"].is_string() || !j["text"].is_string()) {
    throw CodecError("query: expected {id, text}");
  }
  Query q;
  q.id = j["id"].get<std::string>();
  q.text = j["text"].get<std::string>();
  if (q.text.empty()) throw CodecError("query: empty expression");
  if (j.contains("predicate")) q.predicate = synth::PredicateFromJson(j["predicate"]);
  return q;
}

inline nlohmann::json ToJson(const PresenceDecision& p) {
  return {{"e", p.present ? 1 : 0}, {"confidence", p.confidence}};
}

inline nlohmann::json ToJson(const Anchor& a) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : a.prompt.points) points.push_back(ToWire(p));
  return {{"frame", a.frame},
          {"bbox", ToWire(a.prompt.bbox)},
          {"points", std::move(points)},
          {"reliability", a.reliability}};
}

inline nlohmann::json ToJson(const AnchorSet& s) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& a : s.entries) j.push_back(ToJson(a));
  return j;
}

inline AnchorSet AnchorSetFromJson(const nlohmann::json& j) {
  if (!j.is_array()) throw CodecError("anchors: expected an array");
  AnchorSet s;
  for (const auto& e : j) {
    if (!e.is_object() || !e.contains("frame") || !e.contains("bbox") ||
        !e["frame"].is_number_integer()) {
      throw CodecError("anchors: entry needs frame and bbox");
    }
    Anchor a;
    a.frame = e["frame"].get<int>();
    a.prompt.bbox = BoxFromWire(e["bbox"]);
    if (e.contains("points")) {
      for (const auto& p : e["points"]) a.prompt.points.push_back(PointFromWire(p));
    }
    a.reliability = e.value("reliability", 0.0);
    if (!s.entries.empty() && a.frame <= s.entries.back().frame) {
      throw CodecError("anchors: frame indices must be strictly increasing");
    }
    s.entries.push_back(std::move(a));
  }
  return s;
}

inline nlohmann::json ToJson(const PlannerTrace& t) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : t.frames) {
    j.push_back({{"frame", r.frame},
                 {"ambiguous", r.ambiguous},
                 {"score_coarse", r.score_coarse ? nlohmann::json(*r.score_coarse) : nlohmann::json()},
                 {"score_prop", r.score_prop ? nlohmann::json(*r.score_prop) : nlohmann::json()},
                 {"source", Name(r.source)}});
  }
  return j;
}

inline nlohmann::json ToJson(const CallCounts& c) {
  return {{"judge_presence", c.presence}, {"ground", c.ground}, {"propagate", c.propagate}};
}

inline nlohmann::json ToJson(const RunResult& r) {
  auto opt_traj = [](const std::optional<Trajectory>& t) {
    return t ? ToWire(*t) : nlohmann::json();
  };
  return {{"video", r.video},
          {"query", r.query},
          {"presence", ToJson(r.presence)},
          {"flags", r.flags},
          {"calls", ToJson(r.calls)},
          {"coarse", opt_traj(r.coarse)},
          {"anchors", r.anchors ? ToJson(*r.anchors) : nlohmann::json()},
          {"propagated", opt_traj(r.propagated)},
          {"planner", r.planner ? ToJson(*r.planner) : nlohmann::json()},
          {"final", ToWire(r.final)}};
}

// Reads back the parts of a serialized RunResult that evaluation needs.
inline RunResult RunResultFromJson(const nlohmann::json& j) {
  try {
    RunResult r;
    r.video = j.at("video").get<std::string>();
    r.query = j.at("query").get<std::string>();
    r.presence.present = j.at("presence").at("e").get<int>() == 1;
    r.presence.confidence = j.at("presence").at("confidence").get<double>();
    r.flags = j.at("flags").get<std::vector<std::string>>();
    const auto& c = j.at("calls");
    r.calls = {c.at("judge_presence").get<int>(), c.at("ground").get<int>(),
               c.at("propagate").get<int>()};
    if (!j.at("coarse").is_null()) r.coarse = TrajectoryFromWire(j["coarse"]);
    if (!j.at("anchors").is_null()) r.anchors = AnchorSetFromJson(j["anchors"]);
    if (!j.at("propagated").is_null()) r.propagated = TrajectoryFromWire(j["propagated"]);
    r.final = TrajectoryFromWire(j.at("final"));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw CodecError(std::string("run result: ") + e.what());
  }
}

}  // namespace refvos
