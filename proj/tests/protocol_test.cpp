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

#include <unistd.h>

#include <chrono>
#include <sstream>
#include <thread>

#include "gtest/gtest.h"
#include "refvos/conformance.hpp"
#include "refvos/pipeline.hpp"
#include "refvos/protocol.hpp"
#include "refvos/server.hpp"
#include "refvos/transport.hpp"

namespace refvos {
namespace {

const std::string kCli = REFVOS_CLI_PATH;

std::shared_ptr<const synth::Scenario> Scene(uint64_t seed = 41) {
  return std::make_shared<const synth::Scenario>(synth::Generate(seed, synth::GenSpec{}));
}

Endpoint Serve(const std::string& extra = "") {
  return Endpoint::Parse("exec:'" + kCli + "' serve" + extra);
}

const synth::QuerySpec& Positive(const synth::Scenario& s) {
  for (const auto& q : s.queries) {
    if (q.target) return q;
  }
  throw std::logic_error("no positive query");
}

TEST(EndpointTest, Parse) {
  EXPECT_EQ(Endpoint::Parse("exec:python3 shim.py").type, Endpoint::Type::kExec);
  EXPECT_EQ(Endpoint::Parse("exec:python3 shim.py").target, "python3 shim.py");
  EXPECT_EQ(Endpoint::Parse("socket:127.0.0.1:9000").type, Endpoint::Type::kSocket);
  EXPECT_EQ(Endpoint::Parse("socket:/tmp/x.sock").ToString(), "socket:/tmp/x.sock");
  EXPECT_THROW(Endpoint::Parse("http://x"), ConfigError);
  EXPECT_THROW(Endpoint::Parse("exec:"), ConfigError);
}

TEST(ValidateResponseTest, NamesTheViolatedField) {
  const protocol::Expectation want{"r1", protocol::Kind::kGround, 2, 3, 3};
  auto field_of = [&](const nlohmann::json& r) -> std::string {
    try {
      protocol::ValidateResponse(r, want);
    } catch (const ProtocolError& e) {
      EXPECT_EQ(e.payload(), r.dump());
      return e.field();
    }
    return "";
  };
  const nlohmann::json good = protocol::MakeTrajectoryReply("r1", Trajectory::Zeros(2, 3, 3));
  EXPECT_EQ(field_of(good), "");
  nlohmann::json r = good;
  r.erase("v");
  EXPECT_EQ(field_of(r), "v");
  r = good;
  r["v"] = 2;
  EXPECT_EQ(field_of(r), "v");
  r = good;
  r["id"] = "r2";
  EXPECT_EQ(field_of(r), "id");
  r = good;
  r.erase("ok");
  EXPECT_EQ(field_of(r), "ok");
  r = good;
  r.erase("trajectory");
  EXPECT_EQ(field_of(r), "trajectory");
  EXPECT_EQ(field_of(protocol::MakeTrajectoryReply("r1", Trajectory::Zeros(3, 3, 3))), "trajectory");
  EXPECT_EQ(field_of(protocol::MakeTrajectoryReply("r1", Trajectory::Zeros(2, 3, 4))), "trajectory.mask");
  EXPECT_EQ(field_of(protocol::MakeError("r1", "internal", "boom")), "");
  EXPECT_EQ(field_of(protocol::MakeError(nullptr, "bad_request", "?")), "");
  nlohmann::json e = protocol::MakeError("r1", "internal", "boom");
  e["error"].erase("message");
  EXPECT_EQ(field_of(e), "error.message");

  const protocol::Expectation pres{"p", protocol::Kind::kJudgePresence, 0, 0, 0};
  nlohmann::json p = protocol::MakePresenceReply("p", {true, 0.7});
  EXPECT_NO_THROW(protocol::ValidateResponse(p, pres));
  p["presence"]["confidence"] = 1.5;
  try {
    protocol::ValidateResponse(p, pres);
    FAIL();
  } catch (const ProtocolError& err) {
    EXPECT_EQ(err.field(), "presence.confidence");
  }
  p["presence"]["e"] = 2;
  try {
    protocol::ValidateResponse(p, pres);
    FAIL();
  } catch (const ProtocolError& err) {
    EXPECT_EQ(err.field(), "presence.e");
  }
}

TEST(ParseLineTest, TruncatedDocumentIsNamed) {
  try {
    protocol::ParseLine("{\"v\":1,\"id\":\"r1\",\"ok\":tr");
    FAIL();
  } catch (const ProtocolError& e) {
    EXPECT_EQ(e.field(), "line");
    EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos);
  }
}

TEST(MockServerTest, AnswersEveryKindAndRejectsUnknown) {
  auto s = Scene();
  const VideoClip v = VideoClip::FromScenario(s);
  const Query q = Query::FromSpec(Positive(*s));
  MockServer server;
  auto handle = [&](const nlohmann::json& req) { return nlohmann::json::parse(server.Handle(req.dump()).line); };

  const auto pres = handle(protocol::MakeRequest("a", protocol::Kind::kJudgePresence, v, q, nullptr, 0, true));
  EXPECT_NO_THROW(protocol::ValidateResponse(pres, {"a", protocol::Kind::kJudgePresence, 0, 0, 0}));
  EXPECT_TRUE(pres["ok"].get<bool>());

  const auto ground = handle(protocol::MakeRequest("b", protocol::Kind::kGround, v, q, nullptr, 0, true));
  EXPECT_NO_THROW(protocol::ValidateResponse(ground, {"b", protocol::Kind::kGround, v.frames, v.height, v.width}));

  const auto gt = synth::ComputeGroundTruth(*s, q.id);
  const AnchorSet anchors = StageAnchors(*gt.trajectory, PipelineConfig{});
  const auto prop = handle(protocol::MakeRequest("c", protocol::Kind::kPropagate, v, q, &anchors, 0, true));
  protocol::ValidateResponse(prop, {"c", protocol::Kind::kPropagate, v.frames, v.height, v.width});
  EXPECT_EQ(protocol::DecodeTrajectory(prop).masks, gt.trajectory->masks);

  nlohmann::json unknown = protocol::MakeRequest("d", protocol::Kind::kGround, v, q, nullptr, 0, true);
  unknown["kind"] = "track_everything";
  const auto err = handle(unknown);
  EXPECT_FALSE(err["ok"].get<bool>());
  EXPECT_EQ(err["error"]["code"], protocol::codes::kUnknownKind);
  EXPECT_EQ(err["id"], "d");

  const auto bad = nlohmann::json::parse(server.Handle("not json").line);
  EXPECT_EQ(bad["error"]["code"], protocol::codes::kBadRequest);
  EXPECT_TRUE(bad["id"].is_null());

  nlohmann::json no_query = protocol::MakeRequest("e", protocol::Kind::kGround, v, q, nullptr, 0, true);
  no_query.erase("query");
  EXPECT_EQ(handle(no_query)["error"]["code"], protocol::codes::kBadRequest);

  nlohmann::json v2 = protocol::MakeRequest("f", protocol::Kind::kGround, v, q, nullptr, 0, true);
  v2["v"] = 2;
  const auto reply = server.Handle(v2.dump());
  EXPECT_TRUE(reply.fatal);
  EXPECT_EQ(nlohmann::json::parse(reply.line)["error"]["code"], protocol::codes::kVersionMismatch);
}

TEST(MockServerTest, ServeLoopKeepsOrderAndStopsOnVersionMismatch) {
  auto s = Scene();
  const VideoClip v = VideoClip::FromScenario(s);
  const Query q = Query::FromSpec(Positive(*s));
  std::stringstream in, out;
  in << protocol::MakeRequest("1", protocol::Kind::kJudgePresence, v, q, nullptr, 0, true).dump() << "\n";
  in << "garbage\n";
  in << protocol::MakeRequest("2", protocol::Kind::kGround, v, q, nullptr, 0, true).dump() << "\n";
  nlohmann::json v9 = protocol::MakeRequest("3", protocol::Kind::kGround, v, q, nullptr, 0, true);
  v9["v"] = 9;
  in << v9.dump() << "\n";
  in << protocol::MakeRequest("4", protocol::Kind::kGround, v, q, nullptr, 0, true).dump() << "\n";
  MockServer server;
  EXPECT_EQ(Serve(in, out, server), 3);
  std::vector<nlohmann::json> replies;
  std::string line;
  while (std::getline(out, line)) replies.push_back(nlohmann::json::parse(line));
  ASSERT_EQ(replies.size(), 4u);
  EXPECT_EQ(replies[0]["id"], "1");
  EXPECT_TRUE(replies[1]["id"].is_null());
  EXPECT_EQ(replies[2]["id"], "2");
  EXPECT_EQ(replies[3]["error"]["code"], "version_mismatch");
  std::stringstream empty_in, empty_out;
  EXPECT_EQ(Serve(empty_in, empty_out, server), 0);
}

TEST(ExternalBackendTest, ExecBackendMatchesInProcessMock) {
  auto s = Scene(43);
  NoiseProfile noise;
  PipelineConfig config;
  config.seed = 5;
  ExternalBackend external(Serve());
  MockBackend mock(noise);
  for (const auto& qs : s->queries) {
    const VideoClip v = VideoClip::FromScenario(s);
    const Query q = Query::FromSpec(qs);
    const auto a = RunPipeline(v, q, config, external);
    const auto b = RunPipeline(v, q, config, mock);
    EXPECT_EQ(ToJson(a).dump(), ToJson(b).dump()) << qs.id;
  }
}

TEST(ExternalBackendTest, NoisyExecBackendMatchesInProcessMock) {
  auto s = Scene(44);
  NoiseProfile noise;
  noise.seed = 3;
  noise.max_radius = 2;
  noise.dropout = 0.2;
  char path[] = "/tmp/refvos_noiseXXXXXX";
  const int fd = ::mkstemp(path);
  ASSERT_GE(fd, 0);
  const std::string doc = ToJson(noise).dump();
  ASSERT_EQ(::write(fd, doc.data(), doc.size()), static_cast<ssize_t>(doc.size()));
  ::close(fd);
  ExternalBackend external(Serve(std::string(" --noise ") + path));
  MockBackend mock(noise);
  const VideoClip v = VideoClip::FromScenario(s);
  const Query q = Query::FromSpec(Positive(*s));
  EXPECT_EQ(ToJson(RunPipeline(v, q, PipelineConfig{}, external)).dump(),
            ToJson(RunPipeline(v, q, PipelineConfig{}, mock)).dump());
  ::unlink(path);
}

// Each fault mode must surface as a ProtocolError on the named field with the
// raw reply attached.
TEST(ExternalBackendTest, FaultModesNameTheField) {
  auto s = Scene();
  const VideoClip v = VideoClip::FromScenario(s);
  const Query q = Query::FromSpec(Positive(*s));
  const std::pair<const char*, const char*> cases[] = {
      {"omit-version", "v"}, {"wrong-id", "id"}, {"truncate", "line"}, {"drop-payload", "presence"}};
  for (const auto& [fault, field] : cases) {
    ExternalBackend b(Serve(std::string(" --fault ") + fault));
    try {
      b.JudgePresence(v, q, 0);
      ADD_FAILURE() << fault << ": expected ProtocolError";
    } catch (const ProtocolError& e) {
      EXPECT_EQ(e.field(), field) << fault;
      EXPECT_FALSE(e.payload().empty()) << fault;
      if (std::string(fault) == "truncate") {
        EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos);
      }
    }
  }
}

TEST(ExternalBackendTest, ErrorReplyBecomesBackendErrorAndSessionSurvives) {
  auto s = Scene();
  VideoClip v = VideoClip::FromScenario(s);
  const Query q = Query::FromSpec(Positive(*s));
  ExternalBackend b(Serve());
  VideoClip wrong = v;
  wrong.frames = v.frames + 1;  // server checks the clip against the scenario
  try {
    b.Ground(wrong, q, 0);
    FAIL();
  } catch (const ProtocolError&) {
    FAIL() << "error reply is not a protocol violation";
  } catch (const BackendError& e) {
    EXPECT_EQ(e.code(), "bad_request");
    EXPECT_FALSE(e.payload().empty());
  }
  EXPECT_TRUE(b.JudgePresence(v, q, 0).present);
}

TEST(ExternalBackendTest, TimeoutAndChildExit) {
  auto s = Scene();
  const VideoClip v = VideoClip::FromScenario(s);
  const Query q = Query::FromSpec(Positive(*s));
  ExternalBackend::Options opts;
  opts.timeout = std::chrono::milliseconds(200);
  ExternalBackend slow(Endpoint::Parse("exec:sleep 5"), opts);
  const auto start = std::chrono::steady_clock::now();
  try {
    slow.JudgePresence(v, q, 0);
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.code(), "timeout");
  }
  EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(4));

  ExternalBackend gone(Endpoint::Parse("exec:exit 7"), opts);
  try {
    gone.JudgePresence(v, q, 0);
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.code(), "closed");
  }
}

TEST(ExternalBackendTest, SocketTransportUnixAndTcp) {
  auto s = Scene(45);
  const VideoClip v = VideoClip::FromScenario(s);
  const Query q = Query::FromSpec(Positive(*s));
  MockServer server;
  MockBackend mock;
  const std::string unix_path = "/tmp/refvos_test_" + std::to_string(::getpid()) + ".sock";
  const std::string tcp = "127.0.0.1:" + std::to_string(20000 + ::getpid() % 20000);
  for (const std::string& addr : {unix_path, tcp}) {
    SocketServer sock(server, addr);
    std::thread t([&] { sock.Run(); });
    {
      // Two concurrent sessions against one listener.
      ExternalBackend b1(Endpoint::Parse("socket:" + addr));
      ExternalBackend b2(Endpoint::Parse("socket:" + addr));
      const auto r1 = RunPipeline(v, q, PipelineConfig{}, b1);
      const auto r2 = RunPipeline(v, q, PipelineConfig{}, b2);
      const auto want = RunPipeline(v, q, PipelineConfig{}, mock);
      EXPECT_EQ(ToJson(r1).dump(), ToJson(want).dump()) << addr;
      EXPECT_EQ(ToJson(r2).dump(), ToJson(want).dump()) << addr;
    }
    sock.Stop();
    t.join();
  }
}

TEST(ConformanceTest, BuiltinServerPasses) {
  const ConformanceReport r = RunConformance(Serve());
  EXPECT_TRUE(r.ok()) << r.ToText();
  EXPECT_GE(r.checks.size(), 10u);
}

TEST(ConformanceTest, FaultyServersFailNamedChecks) {
  const std::pair<const char*, const char*> cases[] = {{"omit-version", "judge_presence.schema"},
                                                       {"wrong-id", "ordering.first"},
                                                       {"drop-payload", "ground.schema_and_length"},
                                                       {"ignore-unknown", "error.unknown_kind"},
                                                       {"truncate", "propagate.schema_and_length"}};
  for (const auto& [fault, check] : cases) {
    const ConformanceReport r = RunConformance(Serve(std::string(" --fault ") + fault));
    EXPECT_FALSE(r.ok()) << fault;
    bool found = false;
    for (const auto& c : r.checks) {
      if (c.name == check) {
        found = true;
        EXPECT_FALSE(c.passed) << fault << " " << check;
        EXPECT_FALSE(c.request.empty());
        EXPECT_FALSE(c.expected.empty());
        EXPECT_FALSE(c.actual.empty());
      }
    }
    EXPECT_TRUE(found) << check;
    const std::string text = r.ToText();
    EXPECT_NE(text.find(std::string("FAIL ") + check), std::string::npos);
  }
  const ConformanceReport nov = RunConformance(Serve(" --fault omit-version"));
  EXPECT_NE(nov.ToText().find("missing protocol version"), std::string::npos);
}

TEST(ConformanceTest, UnreachableEndpointFailsEveryCheck) {
  const ConformanceReport r = RunConformance(Endpoint::Parse("socket:/tmp/refvos_nobody_listens.sock"));
  EXPECT_FALSE(r.ok());
  for (const auto& c : r.checks) EXPECT_FALSE(c.passed);
}

}  // namespace
}  // namespace refvos
