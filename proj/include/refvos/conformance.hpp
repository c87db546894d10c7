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

// Protocol conformance suite run against any endpoint: schema, id ordering,
// and error handling. Checks use an inline synthetic clip so the backend
// needs no file access.
#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "refvos/pipeline.hpp"
#include "refvos/protocol.hpp"
#include "refvos/synthclip.hpp"
#include "refvos/transport.hpp"

namespace refvos {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string request;
  std::string expected;
  std::string actual;
};

struct ConformanceReport {
  std::string endpoint;
  std::vector<CheckResult> checks;

  bool ok() const {
    for (const auto& c : checks) {
      if (!c.passed) return false;
    }
    return !checks.empty();
  }

  std::string ToText() const {
    std::string out;
    for (const auto& c : checks) {
      out += (c.passed ? "PASS " : "FAIL ") + c.name + "\n";
      if (!c.passed) {
        out += "  request:  " + c.request + "\n";
        out += "  expected: " + c.expected + "\n";
        out += "  actual:   " + c.actual + "\n";
      }
    }
    int passed = 0;
    for (const auto& c : checks) passed += c.passed ? 1 : 0;
    out += std::to_string(passed) + "/" + std::to_string(checks.size()) + " checks passed\n";
    return out;
  }
};

namespace internal {

inline synth::Scenario ConformanceScenario() {
  synth::GenSpec spec;
  spec.height = 24;
  spec.width = 32;
  spec.frames = 6;
  spec.min_objects = 2;
  spec.max_objects = 3;
  spec.min_size = 5;
  spec.max_size = 10;
  spec.positive_queries = 1;
  spec.negative_queries = 1;
  return synth::Generate(20260415, spec, "conformance_clip");
}

inline std::string Shorten(const std::string& s, size_t n = 240) {
  return s.size() <= n ? s : s.substr(0, n) + "...";
}

}  // namespace internal

inline ConformanceReport RunConformance(
    const Endpoint& endpoint, std::chrono::milliseconds timeout = std::chrono::milliseconds(10000)) {
  ConformanceReport report;
  report.endpoint = endpoint.ToString();

  auto scenario = std::make_shared<const synth::Scenario>(internal::ConformanceScenario());
  const VideoClip video = VideoClip::FromScenario(scenario);
  const synth::QuerySpec* positive = nullptr;
  const synth::QuerySpec* negative = nullptr;
  for (const auto& q : scenario->queries) {
    if (q.target && !positive) positive = &q;
    if (!q.target && !negative) negative = &q;
  }
  const Query pos_query = Query::FromSpec(*positive);
  const Query neg_query = Query::FromSpec(*negative);
  const auto gt = synth::ComputeGroundTruth(*scenario, positive->predicate);
  const AnchorSet anchors = StageAnchors(*gt.trajectory, PipelineConfig{});

  std::unique_ptr<LineChannel> channel;
  std::string connect_error;
  try {
    channel = OpenChannel(endpoint);
  } catch (const Error& e) {
    connect_error = e.what();
  }
  int next_id = 1;

  // Sends `line`, reads one reply, and runs `judge` on it. Any transport
  // failure fails the check and drops the channel.
  auto exchange = [&](const std::string& name, const std::string& line, const std::string& expected,
                      const std::function<void(const nlohmann::json&)>& judge) {
    CheckResult c{name, false, internal::Shorten(line), expected, ""};
    if (!channel) {
      c.actual = connect_error.empty() ? "no connection (earlier failure)" : connect_error;
      report.checks.push_back(c);
      return;
    }
    std::string reply;
    try {
      channel->Send(line);
      reply = channel->Receive(timeout);
      c.actual = internal::Shorten(reply);
      judge(protocol::ParseLine(reply));
      c.passed = true;
    } catch (const ProtocolError& e) {
      c.actual = std::string(e.what()) + " | reply: " + internal::Shorten(e.payload().empty() ? reply : e.payload());
    } catch (const Error& e) {
      c.actual = std::string(e.what()) + (reply.empty() ? "" : " | reply: " + internal::Shorten(reply));
      if (dynamic_cast<const BackendError*>(&e) != nullptr) channel.reset();
    } catch (const std::exception& e) {
      c.actual = e.what();
    }
    report.checks.push_back(c);
  };

  auto request = [&](protocol::Kind kind, const Query& q, const AnchorSet* a) {
    const std::string id = "c" + std::to_string(next_id++);
    return std::make_pair(id, protocol::MakeRequest(id, kind, video, q, a, 0, true));
  };
  auto expect_ok = [&](const std::string& id, protocol::Kind kind) {
    return [&, id, kind](const nlohmann::json& r) {
      protocol::ValidateResponse(r, {id, kind, video.frames, video.height, video.width});
      if (!r["ok"].get<bool>()) throw ProtocolError("ok", "expected ok=true, got an error reply");
    };
  };

  {
    auto [id, req] = request(protocol::Kind::kJudgePresence, pos_query, nullptr);
    exchange("judge_presence.schema", req.dump(),
             "ok reply with v=1, matching id, presence {e in {0,1}, confidence in [0,1]}",
             expect_ok(id, protocol::Kind::kJudgePresence));
  }
  {
    auto [id, req] = request(protocol::Kind::kJudgePresence, neg_query, nullptr);
    exchange("judge_presence.negative_query.schema", req.dump(),
             "ok reply with a valid presence payload",
             expect_ok(id, protocol::Kind::kJudgePresence));
  }
  {
    auto [id, req] = request(protocol::Kind::kGround, pos_query, nullptr);
    exchange("ground.schema_and_length", req.dump(),
             "ok reply with a canonical trajectory of " + std::to_string(video.frames) + " frames",
             expect_ok(id, protocol::Kind::kGround));
  }
  {
    auto [id, req] = request(protocol::Kind::kPropagate, pos_query, &anchors);
    exchange("propagate.schema_and_length", req.dump(),
             "ok reply with a canonical trajectory of " + std::to_string(video.frames) + " frames",
             expect_ok(id, protocol::Kind::kPropagate));
  }
  {
    // Back-to-back requests must be answered in order, each with its own id.
    auto [id1, req1] = request(protocol::Kind::kJudgePresence, pos_query, nullptr);
    auto [id2, req2] = request(protocol::Kind::kGround, pos_query, nullptr);
    exchange("ordering.first", req1.dump(), "reply id " + id1,
             expect_ok(id1, protocol::Kind::kJudgePresence));
    exchange("ordering.second", req2.dump(), "reply id " + id2,
             expect_ok(id2, protocol::Kind::kGround));
  }
  {
    const std::string id = "c" + std::to_string(next_id++);
    nlohmann::json req = {{"v", protocol::kVersion}, {"id", id}, {"kind", "segment_everything"},
                          {"video", ToJson(video, true)}, {"query", ToJson(pos_query)}};
    exchange("error.unknown_kind", req.dump(),
             "ok=false with error.code \"unknown_kind\" and matching id",
             [&, id](const nlohmann::json& r) {
               if (r.is_object() && r.value("ok", false) == true) {
                 throw ProtocolError("ok", "unknown kind was accepted");
               }
               protocol::ValidateResponse(r, {id, protocol::Kind::kJudgePresence, 0, 0, 0});
               if (r["error"]["code"] != protocol::codes::kUnknownKind) {
                 throw ProtocolError("error.code", "expected unknown_kind, got " + r["error"]["code"].dump());
               }
             });
  }
  exchange("error.malformed_line", "{\"v\": 1, \"id\": ", "ok=false error reply; session stays open",
           [&](const nlohmann::json& r) {
             protocol::ValidateResponse(r, {"", protocol::Kind::kJudgePresence, 0, 0, 0});
             if (r["ok"].get<bool>()) throw ProtocolError("ok", "malformed request was accepted");
           });
  {
    auto [id, req] = request(protocol::Kind::kJudgePresence, pos_query, nullptr);
    exchange("session.continues_after_error", req.dump(), "normal reply after a malformed line",
             expect_ok(id, protocol::Kind::kJudgePresence));
  }
  {
    // Last: a version mismatch may end the session.
    const std::string id = "c" + std::to_string(next_id++);
    nlohmann::json req = protocol::MakeRequest(id, protocol::Kind::kJudgePresence, video, pos_query,
                                               nullptr, 0, true);
    req["v"] = 2;
    exchange("error.version_mismatch", req.dump(),
             "ok=false with error.code \"version_mismatch\" and v=1",
             [&, id](const nlohmann::json& r) {
               protocol::ValidateResponse(r, {id, protocol::Kind::kJudgePresence, 0, 0, 0});
               if (r["ok"].get<bool>()) throw ProtocolError("ok", "version 2 request was accepted");
               if (r["error"]["code"] != protocol::codes::kVersionMismatch) {
                 throw ProtocolError("error.code",
                                     "expected version_mismatch, got " + r["error"]["code"].dump());
               }
             });
  }
  return report;
}

}  // namespace refvos
