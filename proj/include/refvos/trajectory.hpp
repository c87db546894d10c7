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
#pragma once

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "refvos/error.hpp"
#include "refvos/mask.hpp"

namespace refvos {

// Per-frame masks of one object over a clip. Confidences and boxes are
// optional as a whole; a box slot is empty for frames with an empty mask.
struct Trajectory {
  std::vector<Mask> masks;
  std::optional<std::vector<double>> confidence;
  std::optional<std::vector<std::optional<BoundingBox>>> boxes;

  size_t size() const { return masks.size(); }

  bool AllEmpty() const {
    for (const Mask& m : masks) {
      if (!m.empty()) return false;
    }
    return true;
  }

  std::optional<double> ConfidenceAt(size_t t) const {
    if (!confidence) return std::nullopt;
    return (*confidence)[t];
  }

  static Trajectory Zeros(size_t frames, int height, int width) {
    Trajectory t;
    t.masks.assign(frames, Mask::Empty(height, width));
    return t;
  }

  // Checks length, per-frame dimensions and side-channel lengths.
  void Validate(size_t frames, int height, int width) const {
    if (masks.size() != frames) {
      throw ContractError("trajectory has " + std::to_string(masks.size()) +
                          " frames, expected " + std::to_string(frames));
    }
    for (const Mask& m : masks) {
      if (m.height() != height || m.width() != width) {
        throw ContractError("trajectory mask dimensions do not match clip");
      }
    }
    if (confidence) {
      if (confidence->size() != frames) {
        throw ContractError("confidence length does not match trajectory");
      }
      for (double c : *confidence) {
        if (!(c >= 0.0 && c <= 1.0)) {
          throw ContractError("confidence outside [0, 1]");
        }
      }
    }
    if (boxes && boxes->size() != frames) {
      throw ContractError("box list length does not match trajectory");
    }
  }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

// Fills `boxes` with BBox of every mask.
inline void AttachBoxes(Trajectory& traj) {
  std::vector<std::optional<BoundingBox>> boxes;
  boxes.reserve(traj.masks.size());
  for (const Mask& m : traj.masks) boxes.push_back(BBox(m));
  traj.boxes = std::move(boxes);
}

// One record per frame: {"frame", "mask", "box"?, "confidence"?}.
inline nlohmann::json ToWire(const Trajectory& traj) {
  nlohmann::json out = nlohmann::json::array();
  for (size_t t = 0; t < traj.masks.size(); ++t) {
    nlohmann::json rec = {{"frame", t}, {"mask", ToWire(traj.masks[t])}};
    if (traj.boxes && (*traj.boxes)[t]) rec["box"] = ToWire(*(*traj.boxes)[t]);
    if (traj.confidence) rec["confidence"] = (*traj.confidence)[t];
    out.push_back(std::move(rec));
  }
  return out;
}

inline Trajectory TrajectoryFromWire(const nlohmann::json& j) {
  if (!j.is_array()) throw CodecError("trajectory: expected an array");
  Trajectory traj;
  bool any_conf = false, all_conf = true, any_box = false;
  for (size_t t = 0; t < j.size(); ++t) {
    const auto& rec = j[t];
    if (!rec.is_object() || !rec.contains("frame") || !rec.contains("mask")) {
      throw CodecError("trajectory: record needs frame and mask");
    }
    if (!rec["frame"].is_number_integer() ||
        rec["frame"].get<int64_t>() != static_cast<int64_t>(t)) {
      throw CodecError("trajectory: frame indices must be 0..T-1 in order");
    }
    traj.masks.push_back(MaskFromWire(rec["mask"]));
    const bool has_conf = rec.contains("confidence") && !rec["confidence"].is_null();
    any_conf |= has_conf;
    all_conf &= has_conf;
    any_box |= rec.contains("box") && !rec["box"].is_null();
  }
  if (any_conf && !all_conf) {
    throw CodecError("trajectory: confidence must be on every frame or none");
  }
  if (any_conf) {
    std::vector<double> conf;
    for (const auto& rec : j) {
      if (!rec["confidence"].is_number()) {
        throw CodecError("trajectory: confidence must be a number");
      }
      const double c = rec["confidence"].get<double>();
      if (!(c >= 0.0 && c <= 1.0)) {
        throw CodecError("trajectory: confidence outside [0, 1]");
      }
      conf.push_back(c);
    }
    traj.confidence = std::move(conf);
  }
  if (any_box) {
    std::vector<std::optional<BoundingBox>> boxes;
    for (const auto& rec : j) {
      if (rec.contains("box") && !rec["box"].is_null()) {
        boxes.push_back(BoxFromWire(rec["box"]));
      } else {
        boxes.push_back(std::nullopt);
      }
    }
    traj.boxes = std::move(boxes);
  }
  return traj;
}

// Newline-delimited form of ToWire: one frame record per line.
inline std::string ToNdjson(const Trajectory& traj) {
  std::string out;
  for (const auto& rec : ToWire(traj)) {
    out += rec.dump();
    out += '\n';
  }
  return out;
}

inline Trajectory TrajectoryFromNdjson(const std::string& text) {
  nlohmann::json records = nlohmann::json::array();
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      records.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw CodecError(std::string("trajectory line: ") + e.what());
    }
  }
  return TrajectoryFromWire(records);
}

}  // namespace refvos
