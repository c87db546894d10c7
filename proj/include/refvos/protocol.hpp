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

// Backend wire protocol, version 1. One JSON document per line.
//
// Request:  {"v": 1, "id": str, "kind": "judge_presence"|"ground"|"propagate",
//            "video": {...}, "query": {...}, "anchors": [...], "seed": uint}
// Response: {"v": 1, "id": str, "ok": true, "presence": {"e", "confidence"}}
//           {"v": 1, "id": str, "ok": true, "trajectory": [frame records]}
//           {"v": 1, "id": str|null, "ok": false, "error": {"code", "message"}}
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"
#include "refvos/error.hpp"
#include "refvos/trajectory.hpp"
#include "refvos/types.hpp"

namespace refvos::protocol {

inline constexpr int kVersion = 1;

enum class Kind { kJudgePresence, kGround, kPropagate };

inline const char* Name(Kind k) {
  switch (k) {
    case Kind::kJudgePresence: return "judge_presence";
    case Kind::kGround: return "ground";
    case Kind::kPropagate: return "propagate";
  }
  return "";
}

inline std::optional<Kind> ParseKind(std::string_view s) {
  for (Kind k : {Kind::kJudgePresence, Kind::kGround, Kind::kPropagate}) {
    if (s == Name(k)) return k;
  }
  return std::nullopt;
}

// Error codes carried in {"ok": false} replies.
namespace codes {
inline constexpr const char* kUnknownKind = "unknown_kind";
inline constexpr const char* kBadRequest = "bad_request";
inline constexpr const char* kVersionMismatch = "version_mismatch";
inline constexpr const char* kUnsupported = "unsupported";
inline constexpr const char* kInternal = "internal";
}  // namespace codes

inline nlohmann::json MakeRequest(const std::string& id, Kind kind,
                                  const VideoClip& video, const Query& query,
                                  const AnchorSet* anchors, uint64_t seed,
                                  bool inline_scenario) {
  nlohmann::json j = {{"v", kVersion},
                      {"id", id},
                      {"kind", Name(kind)},
                      {"video", ToJson(video, inline_scenario)},
                      {"query", ToJson(query)},
                      {"seed", seed}};
  if (kind == Kind::kPropagate) {
    j["anchors"] = anchors ? ToJson(*anchors) : nlohmann::json::array();
  }
  return j;
}

inline nlohmann::json MakeError(const nlohmann::json& id, const std::string& code,
                                const std::string& message) {
  return {{"v", kVersion},
          {"id", id},
          {"ok", false},
          {"error", {{"code", code}, {"message", message}}}};
}

inline nlohmann::json MakePresenceReply(const std::string& id, const PresenceDecision& d) {
  return {{"v", kVersion}, {"id", id}, {"ok", true}, {"presence", ToJson(d)}};
}

inline nlohmann::json MakeTrajectoryReply(const std::string& id, const Trajectory& t) {
  return {{"v", kVersion}, {"id", id}, {"ok", true}, {"trajectory", ToWire(t)}};
}

inline nlohmann::json ParseLine(const std::string& line) {
  try {
    return nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    if (!line.empty() && e.byte >= line.size()) {
      throw ProtocolError("line", "truncated document (input ends mid-value)", line);
    }
    throw ProtocolError("line", std::string("not a JSON document (") + e.what() + ")", line);
  }
}

// What the caller asked for, used to validate the matching reply.
struct Expectation {
  std::string id;
  Kind kind = Kind::kJudgePresence;
  int frames = 0;
  int height = 0;
  int width = 0;
};

// Checks envelope fields, then the payload for the requested kind. Returns
// normally for a well-formed {"ok": false} reply; the caller decides what to
// do with it.
inline void ValidateResponse(const nlohmann::json& r, const Expectation& want) {
  const std::string raw = r.dump();
  if (!r.is_object()) throw ProtocolError("document", "expected an object", raw);
  if (!r.contains("v")) throw ProtocolError("v", "missing protocol version", raw);
  if (!r["v"].is_number_integer() || r["v"].get<int>() != kVersion) {
    throw ProtocolError("v", "unsupported protocol version " + r["v"].dump(), raw);
  }
  if (!r.contains("id")) throw ProtocolError("id", "missing", raw);
  if (!r.contains("ok") || !r["ok"].is_boolean()) {
    throw ProtocolError("ok", "missing or not a boolean", raw);
  }
  if (!r["ok"].get<bool>()) {
    if (!r.contains("error") || !r["error"].is_object() ||
        !r["error"].contains("code") || !r["error"]["code"].is_string()) {
      throw ProtocolError("error", "error reply needs {code, message}", raw);
    }
    if (!r["error"].contains("message") || !r["error"]["message"].is_string()) {
      throw ProtocolError("error.message", "missing or not a string", raw);
    }
    if (!r["id"].is_null() && (!r["id"].is_string() || r["id"].get<std::string>() != want.id)) {
      throw ProtocolError("id", "does not match request id " + want.id, raw);
    }
    return;
  }
  if (!r["id"].is_string() || r["id"].get<std::string>() != want.id) {
    throw ProtocolError("id", "does not match request id " + want.id, raw);
  }
  if (want.kind == Kind::kJudgePresence) {
    if (!r.contains("presence") || !r["presence"].is_object()) {
      throw ProtocolError("presence", "missing", raw);
    }
    const auto& p = r["presence"];
    if (!p.contains("e") || !p["e"].is_number_integer() ||
        (p["e"].get<int>() != 0 && p["e"].get<int>() != 1)) {
      throw ProtocolError("presence.e", "must be 0 or 1", raw);
    }
    if (!p.contains("confidence") || !p["confidence"].is_number()) {
      throw ProtocolError("presence.confidence", "missing or not a number", raw);
    }
    const double c = p["confidence"].get<double>();
    if (!(c >= 0.0 && c <= 1.0)) {
      throw ProtocolError("presence.confidence", "outside [0, 1]", raw);
    }
    return;
  }
  if (!r.contains("trajectory")) throw ProtocolError("trajectory", "missing", raw);
  Trajectory t;
  try {
    t = TrajectoryFromWire(r["trajectory"]);
  } catch (const CodecError& e) {
    throw ProtocolError("trajectory", e.what(), raw);
  }
  if (t.size() != static_cast<size_t>(want.frames)) {
    throw ProtocolError("trajectory", "has " + std::to_string(t.size()) +
                                          " frames, expected " + std::to_string(want.frames),
                        raw);
  }
  for (const Mask& m : t.masks) {
    if (m.height() != want.height || m.width() != want.width) {
      throw ProtocolError("trajectory.mask", "dimensions do not match the clip", raw);
    }
  }
}

inline PresenceDecision DecodePresence(const nlohmann::json& r) {
  return {r["presence"]["e"].get<int>() == 1, r["presence"]["confidence"].get<double>()};
}

inline Trajectory DecodeTrajectory(const nlohmann::json& r) {
  return TrajectoryFromWire(r["trajectory"]);
}

}  // namespace refvos::protocol
