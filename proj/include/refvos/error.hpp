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

#include <stdexcept>
#include <string>
#include <utility>

namespace refvos {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed run lists or wire documents for masks.
class CodecError : public Error {
 public:
  using Error::Error;
};

// A caller broke a documented precondition (dimension mismatch, empty input).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration document or flag value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

class AmbiguousQueryError : public Error {
 public:
  using Error::Error;
};

class AnchorError : public Error {
 public:
  using Error::Error;
};

// Failure reported by, or while talking to, a backend. `payload` carries the
// raw reply when there was one.
class BackendError : public Error {
 public:
  BackendError(std::string code, const std::string& message,
               std::string payload = {})
      : Error(code + ": " + message),
        code_(std::move(code)),
        payload_(std::move(payload)) {}

  const std::string& code() const { return code_; }
  const std::string& payload() const { return payload_; }

 private:
  std::string code_;
  std::string payload_;
};

// Wire-level violation: names the offending field.
class ProtocolError : public BackendError {
 public:
  ProtocolError(const std::string& field, const std::string& message,
                std::string payload = {})
      : BackendError("protocol", field + ": " + message, std::move(payload)),
        field_(field) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// A pipeline run failed inside a particular stage.
class RunError : public Error {
 public:
  RunError(std::string stage, const std::string& message)
      : Error("stage " + stage + ": " + message), stage_(std::move(stage)) {}

  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace refvos
