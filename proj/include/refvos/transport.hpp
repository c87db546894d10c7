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

// Line transports to external backends (a spawned child on its standard
// streams, or a stream socket) and the Backend that speaks the wire protocol
// over them. POSIX only.
#pragma once

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "json.hpp"
#include "refvos/backend.hpp"
#include "refvos/error.hpp"
#include "refvos/protocol.hpp"

extern char** environ;

namespace refvos {

// "exec:<shell command>" or "socket:<host>:<port>" / "socket:<unix path>".
struct Endpoint {
  enum class Type { kExec, kSocket };
  Type type = Type::kExec;
  std::string target;

  static Endpoint Parse(const std::string& spec) {
    if (spec.rfind("exec:", 0) == 0 && spec.size() > 5) {
      return {Type::kExec, spec.substr(5)};
    }
    if (spec.rfind("socket:", 0) == 0 && spec.size() > 7) {
      return {Type::kSocket, spec.substr(7)};
    }
    throw ConfigError("endpoint must be exec:<cmd> or socket:<addr>, got '" + spec + "'");
  }

  std::string ToString() const {
    return (type == Type::kExec ? "exec:" : "socket:") + target;
  }
};

class LineChannel {
 public:
  virtual ~LineChannel() = default;
  virtual void Send(const std::string& line) = 0;
  // Next line without its terminator. Throws BackendError on timeout or EOF.
  virtual std::string Receive(std::chrono::milliseconds timeout) = 0;
};

namespace internal {

inline void IgnoreSigpipeOnce() {
  static std::once_flag once;
  std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

// Buffered line reader over a file descriptor.
class LineReader {
 public:
  explicit LineReader(int fd) : fd_(fd) {}

  // Returns false on EOF before a full line; throws on timeout.
  bool ReadLine(std::string& line, std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      const auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return true;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) {
        throw BackendError("timeout", "no reply within " + std::to_string(timeout.count()) + " ms",
                           buffer_);
      }
      pollfd p{fd_, POLLIN, 0};
      const int rc = ::poll(&p, 1, static_cast<int>(left.count()));
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw BackendError("io", std::strerror(errno));
      }
      if (rc == 0) continue;
      char chunk[65536];
      const ssize_t n = ::read(fd_, chunk, sizeof(chunk));
      if (n < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        throw BackendError("io", std::strerror(errno));
      }
      if (n == 0) {
        line = std::move(buffer_);
        buffer_.clear();
        return false;
      }
      buffer_.append(chunk, static_cast<size_t>(n));
    }
  }

 private:
  int fd_;
  std::string buffer_;
};

inline void WriteAll(int fd, const std::string& data, bool socket) {
  size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = socket ? ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL)
                             : ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw BackendError("closed", std::string("write failed: ") + std::strerror(errno));
    }
    off += static_cast<size_t>(n);
  }
}

}  // namespace internal

// Child process started with /bin/sh -c <command>; requests go to its stdin,
// replies come from its stdout. stderr is inherited.
class ProcessChannel : public LineChannel {
 public:
  explicit ProcessChannel(const std::string& command) {
    internal::IgnoreSigpipeOnce();
    int to_child[2], from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0) throw BackendError("spawn", std::strerror(errno));
    if (::pipe2(from_child, O_CLOEXEC) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      throw BackendError("spawn", std::strerror(errno));
    }
    posix_spawn_file_actions_t fa;
    posix_spawn_file_actions_init(&fa);
    posix_spawn_file_actions_adddup2(&fa, to_child[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&fa, from_child[1], STDOUT_FILENO);
    // Own process group, so a kill also reaches anything the shell forked.
    posix_spawnattr_t attr;
    posix_spawnattr_init(&attr);
    posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
    posix_spawnattr_setpgroup(&attr, 0);
    std::string sh = "sh", dash_c = "-c", cmd = command;
    char* argv[] = {sh.data(), dash_c.data(), cmd.data(), nullptr};
    const int rc = ::posix_spawn(&pid_, "/bin/sh", &fa, &attr, argv, environ);
    posix_spawn_file_actions_destroy(&fa);
    posix_spawnattr_destroy(&attr);
    ::close(to_child[0]);
    ::close(from_child[1]);
    if (rc != 0) {
      ::close(to_child[1]);
      ::close(from_child[0]);
      throw BackendError("spawn", "cannot start '" + command + "': " + std::strerror(rc));
    }
    to_child_ = to_child[1];
    from_child_ = from_child[0];
    reader_ = std::make_unique<internal::LineReader>(from_child_);
  }

  ProcessChannel(const ProcessChannel&) = delete;
  ProcessChannel& operator=(const ProcessChannel&) = delete;

  ~ProcessChannel() override {
    if (to_child_ >= 0) ::close(to_child_);
    Reap(std::chrono::milliseconds(2000));
    if (from_child_ >= 0) ::close(from_child_);
  }

  void Send(const std::string& line) override {
    internal::WriteAll(to_child_, line + "\n", false);
  }

  std::string Receive(std::chrono::milliseconds timeout) override {
    std::string line;
    bool complete = false;
    try {
      complete = reader_->ReadLine(line, timeout);
    } catch (const BackendError&) {
      Reap(std::chrono::milliseconds(0));
      throw;
    }
    if (!complete) {
      Reap(std::chrono::milliseconds(500));
      std::string what = "backend closed its output";
      if (exit_status_) what += " (exit status " + std::to_string(*exit_status_) + ")";
      if (!line.empty()) throw ProtocolError("line", "truncated reply", line);
      throw BackendError("closed", what, line);
    }
    return line;
  }

  std::optional<int> exit_status() const { return exit_status_; }

 private:
  void Reap(std::chrono::milliseconds grace) {
    if (pid_ <= 0 || exit_status_) return;
    const auto deadline = std::chrono::steady_clock::now() + grace;
    int status = 0;
    for (;;) {
      const pid_t r = ::waitpid(pid_, &status, WNOHANG);
      if (r == pid_) break;
      if (r < 0) return;
      if (std::chrono::steady_clock::now() >= deadline) {
        ::kill(-pid_, SIGKILL);
        ::waitpid(pid_, &status, 0);
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    exit_status_ = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  }

  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::unique_ptr<internal::LineReader> reader_;
  std::optional<int> exit_status_;
};

namespace internal {

inline int ConnectSocket(const std::string& addr) {
  if (!addr.empty() && addr.front() == '/') {
    sockaddr_un sa{};
    sa.sun_family = AF_UNIX;
    if (addr.size() >= sizeof(sa.sun_path)) throw ConfigError("unix socket path too long");
    std::memcpy(sa.sun_path, addr.c_str(), addr.size() + 1);
    const int fd = ::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd < 0) throw BackendError("connect", std::strerror(errno));
    if (::connect(fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0) {
      const std::string err = std::strerror(errno);
      ::close(fd);
      throw BackendError("connect", addr + ": " + err);
    }
    return fd;
  }
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos) throw ConfigError("socket address must be host:port or /path");
  const std::string host = addr.substr(0, colon), port = addr.substr(colon + 1);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (const int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0) {
    throw BackendError("connect", addr + ": " + ::gai_strerror(rc));
  }
  int fd = -1;
  std::string err = "no address";
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    err = std::strerror(errno);
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw BackendError("connect", addr + ": " + err);
  return fd;
}

}  // namespace internal

class SocketChannel : public LineChannel {
 public:
  explicit SocketChannel(const std::string& addr)
      : fd_(internal::ConnectSocket(addr)), reader_(fd_) {}
  SocketChannel(const SocketChannel&) = delete;
  SocketChannel& operator=(const SocketChannel&) = delete;
  ~SocketChannel() override { ::close(fd_); }

  void Send(const std::string& line) override { internal::WriteAll(fd_, line + "\n", true); }

  std::string Receive(std::chrono::milliseconds timeout) override {
    std::string line;
    if (!reader_.ReadLine(line, timeout)) {
      if (!line.empty()) throw ProtocolError("line", "truncated reply", line);
      throw BackendError("closed", "backend closed the connection");
    }
    return line;
  }

 private:
  int fd_;
  internal::LineReader reader_;
};

inline std::unique_ptr<LineChannel> OpenChannel(const Endpoint& e) {
  if (e.type == Endpoint::Type::kExec) return std::make_unique<ProcessChannel>(e.target);
  return std::make_unique<SocketChannel>(e.target);
}

// Backend over the wire protocol. One request in flight at a time.
class ExternalBackend : public Backend {
 public:
  struct Options {
    std::chrono::milliseconds timeout{30000};
    // Ship the whole scenario in each request instead of the file reference.
    bool inline_scenario = false;
  };

  explicit ExternalBackend(Endpoint endpoint) : ExternalBackend(std::move(endpoint), Options{}) {}
  ExternalBackend(Endpoint endpoint, Options options)
      : endpoint_(std::move(endpoint)), options_(options) {}

  PresenceDecision JudgePresence(const VideoClip& v, const Query& q, uint64_t seed) override {
    return protocol::DecodePresence(Call(protocol::Kind::kJudgePresence, v, q, nullptr, seed));
  }
  Trajectory Ground(const VideoClip& v, const Query& q, uint64_t seed) override {
    return protocol::DecodeTrajectory(Call(protocol::Kind::kGround, v, q, nullptr, seed));
  }
  Trajectory Propagate(const VideoClip& v, const Query& q, const AnchorSet& a,
                       uint64_t seed) override {
    return protocol::DecodeTrajectory(Call(protocol::Kind::kPropagate, v, q, &a, seed));
  }

 private:
  nlohmann::json Call(protocol::Kind kind, const VideoClip& v, const Query& q,
                      const AnchorSet* anchors, uint64_t seed) {
    if (!channel_) channel_ = OpenChannel(endpoint_);
    const std::string id = "r" + std::to_string(next_id_++);
    const bool inline_scenario = options_.inline_scenario || v.scenario_file.empty();
    const auto request = protocol::MakeRequest(id, kind, v, q, anchors, seed, inline_scenario);
    std::string line;
    nlohmann::json reply;
    try {
      channel_->Send(request.dump());
      line = channel_->Receive(options_.timeout);
      reply = protocol::ParseLine(line);
      protocol::ValidateResponse(reply, {id, kind, v.frames, v.height, v.width});
    } catch (const BackendError&) {
      // The session's framing can no longer be trusted.
      channel_.reset();
      throw;
    }
    if (!reply["ok"].get<bool>()) {
      throw BackendError(reply["error"]["code"].get<std::string>(),
                         reply["error"]["message"].get<std::string>(), line);
    }
    return reply;
  }

  Endpoint endpoint_;
  Options options_;
  std::unique_ptr<LineChannel> channel_;
  uint64_t next_id_ = 1;
};

}  // namespace refvos
