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

// Built-in protocol server backed by the mock backends. Serves on standard
// streams (for exec: endpoints) or a listening socket. Fault modes let tests
// exercise the client and the conformance suite against broken backends.
#pragma once

#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <atomic>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "refvos/backend.hpp"
#include "refvos/protocol.hpp"
#include "refvos/synthclip.hpp"
#include "refvos/transport.hpp"

namespace refvos {

enum class Fault {
  kNone,
  kOmitVersion,   // replies lack "v"
  kWrongId,       // replies carry a different id
  kTruncate,      // replies are cut mid-document
  kDropPayload,   // ok replies lack "presence"/"trajectory"
  kIgnoreUnknown  // unknown kinds get an ok reply
};

inline Fault ParseFault(const std::string& s) {
  if (s == "none") return Fault::kNone;
  if (s == "omit-version") return Fault::kOmitVersion;
  if (s == "wrong-id") return Fault::kWrongId;
  if (s == "truncate") return Fault::kTruncate;
  if (s == "drop-payload") return Fault::kDropPayload;
  if (s == "ignore-unknown") return Fault::kIgnoreUnknown;
  throw ConfigError("unknown fault mode '" + s + "'");
}

class MockServer {
 public:
  struct Options {
    NoiseProfile noise;
    Fault fault = Fault::kNone;
  };

  struct Reply {
    std::string line;
    bool fatal = false;
  };

  MockServer() : MockServer(Options{}) {}
  explicit MockServer(Options options) : options_(options) { options_.noise.Validate(); }

  // Thread-safe: the scenario cache is the only shared state.
  Reply Handle(const std::string& line) {
    nlohmann::json req;
    try {
      req = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      return Finish(protocol::MakeError(nullptr, protocol::codes::kBadRequest,
                                        "request is not a JSON document"));
    }
    if (!req.is_object()) {
      return Finish(protocol::MakeError(nullptr, protocol::codes::kBadRequest,
                                        "request must be an object"));
    }
    const nlohmann::json id = req.contains("id") && req["id"].is_string() ? req["id"] : nlohmann::json();
    if (!req.contains("v") || !req["v"].is_number_integer() ||
        req["v"].get<int>() != protocol::kVersion) {
      Reply r = Finish(protocol::MakeError(id, protocol::codes::kVersionMismatch,
                                           "this backend speaks protocol version 1"));
      r.fatal = true;
      return r;
    }
    if (id.is_null()) {
      return Finish(protocol::MakeError(nullptr, protocol::codes::kBadRequest,
                                        "request id must be a string"));
    }
    const std::string rid = id.get<std::string>();
    const auto kind = req.contains("kind") && req["kind"].is_string()
                          ? protocol::ParseKind(req["kind"].get<std::string>())
                          : std::nullopt;
    if (!kind) {
      if (options_.fault == Fault::kIgnoreUnknown) {
        return Finish({{"v", protocol::kVersion}, {"id", rid}, {"ok", true}});
      }
      return Finish(protocol::MakeError(id, protocol::codes::kUnknownKind,
                                        "unknown request kind " + req.value("kind", nlohmann::json()).dump()));
    }
    try {
      const VideoClip video = DecodeVideo(req);
      if (!req.contains("query")) throw BackendError(protocol::codes::kBadRequest, "missing query");
      const Query query = QueryFromJson(req["query"]);
      const uint64_t seed = req.value("seed", uint64_t{0});
      switch (*kind) {
        case protocol::Kind::kJudgePresence:
          return Finish(protocol::MakePresenceReply(
              rid, mock::Presence(video, query, options_.noise, seed)));
        case protocol::Kind::kGround:
          return Finish(protocol::MakeTrajectoryReply(
              rid, mock::Ground(video, query, options_.noise, seed)));
        case protocol::Kind::kPropagate: {
          if (!req.contains("anchors")) {
            throw BackendError(protocol::codes::kBadRequest, "propagate needs anchors");
          }
          const AnchorSet anchors = AnchorSetFromJson(req["anchors"]);
          return Finish(protocol::MakeTrajectoryReply(rid, mock::Propagate(video, anchors)));
        }
      }
    } catch (const BackendError& e) {
      return Finish(protocol::MakeError(id, e.code(), e.what()));
    } catch (const CodecError& e) {
      return Finish(protocol::MakeError(id, protocol::codes::kBadRequest, e.what()));
    } catch (const nlohmann::json::exception& e) {
      return Finish(protocol::MakeError(id, protocol::codes::kBadRequest, e.what()));
    } catch (const std::exception& e) {
      return Finish(protocol::MakeError(id, protocol::codes::kInternal, e.what()));
    }
    return Finish(protocol::MakeError(id, protocol::codes::kInternal, "unreachable"));
  }

 private:
  Reply Finish(nlohmann::json reply) const {
    switch (options_.fault) {
      case Fault::kOmitVersion:
        reply.erase("v");
        break;
      case Fault::kWrongId:
        if (reply["id"].is_string()) reply["id"] = reply["id"].get<std::string>() + "-x";
        break;
      case Fault::kDropPayload:
        reply.erase("presence");
        reply.erase("trajectory");
        break;
      case Fault::kTruncate: {
        const std::string full = reply.dump();
        return {full.substr(0, full.size() / 2), false};
      }
      default:
        break;
    }
    return {reply.dump(), false};
  }

  VideoClip DecodeVideo(const nlohmann::json& req) {
    if (!req.contains("video") || !req["video"].is_object()) {
      throw BackendError(protocol::codes::kBadRequest, "missing video");
    }
    const auto& v = req["video"];
    std::shared_ptr<const synth::Scenario> scenario;
    std::string file;
    if (v.contains("scenario")) {
      scenario = std::make_shared<const synth::Scenario>(synth::ScenarioFromJson(v["scenario"]));
    } else if (v.contains("scenario_file")) {
      file = v["scenario_file"].get<std::string>();
      scenario = LoadScenario(file);
    } else {
      throw BackendError(protocol::codes::kUnsupported,
                         "mock backend needs a scenario reference or inline scenario");
    }
    VideoClip clip = VideoClip::FromScenario(scenario, file);
    if (v.value("frames", -1) != clip.frames || v.value("height", -1) != clip.height ||
        v.value("width", -1) != clip.width) {
      throw BackendError(protocol::codes::kBadRequest, "video header does not match scenario");
    }
    if (v.contains("id")) clip.id = v["id"].get<std::string>();
    return clip;
  }

  std::shared_ptr<const synth::Scenario> LoadScenario(const std::string& path) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(path);
    if (it != cache_.end()) return it->second;
    std::ifstream in(path);
    if (!in) throw BackendError(protocol::codes::kBadRequest, "cannot open scenario file " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw BackendError(protocol::codes::kBadRequest, std::string("scenario file: ") + e.what());
    }
    auto s = std::make_shared<const synth::Scenario>(synth::ScenarioFromJson(j));
    cache_.emplace(path, s);
    return s;
  }

  Options options_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<const synth::Scenario>> cache_;
};

// Serves until EOF (exit 0) or a fatal request (exit 3).
inline int Serve(std::istream& in, std::ostream& out, MockServer& server) {
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto reply = server.Handle(line);
    out << reply.line << '\n';
    out.flush();
    if (reply.fatal) return 3;
  }
  return 0;
}

// Accepts connections on a unix path or host:port, one thread per
// connection, each with strict request/response alternation.
class SocketServer {
 public:
  SocketServer(MockServer& server, const std::string& addr) : server_(server) {
    internal::IgnoreSigpipeOnce();
    if (!addr.empty() && addr.front() == '/') {
      sockaddr_un sa{};
      sa.sun_family = AF_UNIX;
      if (addr.size() >= sizeof(sa.sun_path)) throw ConfigError("unix socket path too long");
      std::memcpy(sa.sun_path, addr.c_str(), addr.size() + 1);
      ::unlink(addr.c_str());
      fd_ = ::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0);
      if (fd_ < 0 || ::bind(fd_, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0) {
        throw BackendError("listen", addr + ": " + std::strerror(errno));
      }
      unlink_path_ = addr;
    } else {
      const auto colon = addr.rfind(':');
      if (colon == std::string::npos) throw ConfigError("listen address must be host:port or /path");
      addrinfo hints{};
      hints.ai_family = AF_UNSPEC;
      hints.ai_socktype = SOCK_STREAM;
      hints.ai_flags = AI_PASSIVE;
      addrinfo* res = nullptr;
      const std::string host = addr.substr(0, colon), port = addr.substr(colon + 1);
      if (::getaddrinfo(host.empty() ? nullptr : host.c_str(), port.c_str(), &hints, &res) != 0 ||
          res == nullptr) {
        throw BackendError("listen", "cannot resolve " + addr);
      }
      fd_ = ::socket(res->ai_family, res->ai_socktype | SOCK_CLOEXEC, res->ai_protocol);
      const int one = 1;
      if (fd_ >= 0) ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
      const bool ok = fd_ >= 0 && ::bind(fd_, res->ai_addr, res->ai_addrlen) == 0;
      ::freeaddrinfo(res);
      if (!ok) throw BackendError("listen", addr + ": " + std::strerror(errno));
    }
    if (::listen(fd_, 16) != 0) throw BackendError("listen", std::strerror(errno));
  }

  SocketServer(const SocketServer&) = delete;
  SocketServer& operator=(const SocketServer&) = delete;

  ~SocketServer() {
    Stop();
    if (fd_ >= 0) ::close(fd_);
    if (!unlink_path_.empty()) ::unlink(unlink_path_.c_str());
  }

  // Blocks until Stop() is called from another thread.
  void Run() {
    while (!stop_) {
      pollfd p{fd_, POLLIN, 0};
      if (::poll(&p, 1, 50) <= 0) continue;
      const int conn = ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC);
      if (conn < 0) continue;
      std::lock_guard<std::mutex> lock(mu_);
      workers_.emplace_back([this, conn] { ServeConnection(conn); });
    }
  }

  void Stop() {
    stop_ = true;
    std::vector<std::thread> workers;
    {
      std::lock_guard<std::mutex> lock(mu_);
      workers.swap(workers_);
    }
    for (auto& w : workers) w.join();
  }

 private:
  void ServeConnection(int conn) {
    internal::LineReader reader(conn);
    std::string line;
    while (!stop_) {
      try {
        if (!reader.ReadLine(line, std::chrono::milliseconds(100))) break;
      } catch (const BackendError& e) {
        if (e.code() == "timeout") continue;
        break;
      }
      if (line.empty()) continue;
      const auto reply = server_.Handle(line);
      try {
        internal::WriteAll(conn, reply.line + "\n", true);
      } catch (const BackendError&) {
        break;
      }
      if (reply.fatal) break;
    }
    ::close(conn);
  }

  MockServer& server_;
  int fd_ = -1;
  std::string unlink_path_;
  std::atomic<bool> stop_{false};
  std::mutex mu_;
  std::vector<std::thread> workers_;
};

}  // namespace refvos
