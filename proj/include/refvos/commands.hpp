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

// Implementation of the refvos subcommands. Every command writes plain-text
// JSON artifacts and returns an exit code: 0 success, 1 run or evaluation
// failure, 2 configuration error.
#pragma once

#include <unistd.h>

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "refvos/backend.hpp"
#include "refvos/conformance.hpp"
#include "refvos/metrics.hpp"
#include "refvos/pipeline.hpp"
#include "refvos/synthclip.hpp"
#include "refvos/transport.hpp"
#include "refvos/types.hpp"

namespace refvos::cli {

namespace fs = std::filesystem;

enum ExitCode { kOk = 0, kFailure = 1, kConfigError = 2 };

inline constexpr const char* kConfigEnvVar = "REFVOS_CONFIG";

// ---- File helpers ----

inline std::string ReadFile(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline nlohmann::json ReadJson(const fs::path& p) {
  try {
    return nlohmann::json::parse(ReadFile(p));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(p.string() + ": " + e.what());
  }
}

// Writes via a temporary file and rename so readers never see partial files.
inline void WriteFileAtomic(const fs::path& p, const std::string& content) {
  const fs::path tmp = p.string() + ".tmp" + std::to_string(::getpid()) + "_" +
                       std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << content;
    if (!out) throw ConfigError("write failed for " + tmp.string());
  }
  fs::rename(tmp, p);
}

inline std::string Pretty(const nlohmann::json& j) { return j.dump(1) + "\n"; }

// ---- Suite manifest ----

struct ManifestEntry {
  std::string scenario_file;  // relative to the manifest directory
  std::string query;
};

struct SuiteManifest {
  std::vector<ManifestEntry> entries;
  std::string backend = "mock";
  nlohmann::json config = nlohmann::json::object();
  std::string output = "results";
  fs::path base_dir;

  fs::path ScenarioPath(const ManifestEntry& e) const { return base_dir / e.scenario_file; }
};

inline nlohmann::json ToJson(const SuiteManifest& m) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : m.entries) entries.push_back({{"scenario", e.scenario_file}, {"query", e.query}});
  return {{"format", "refvos.manifest"},
          {"version", 1},
          {"entries", std::move(entries)},
          {"backend", m.backend},
          {"config", m.config},
          {"output", m.output}};
}

inline SuiteManifest LoadManifest(const fs::path& path) {
  const auto j = ReadJson(path);
  SuiteManifest m;
  try {
    if (j.value("format", "") != "refvos.manifest" || j.value("version", 0) != 1) {
      throw ConfigError(path.string() + ": not a version 1 refvos manifest");
    }
    for (const auto& e : j.at("entries")) {
      m.entries.push_back({e.at("scenario").get<std::string>(), e.at("query").get<std::string>()});
    }
    m.backend = j.value("backend", m.backend);
    if (j.contains("config")) m.config = j["config"];
    m.output = j.value("output", m.output);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  m.base_dir = path.parent_path();
  for (const auto& e : m.entries) {
    if (!fs::exists(m.ScenarioPath(e))) {
      throw ConfigError("manifest references missing file " + m.ScenarioPath(e).string());
    }
  }
  return m;
}

// Run configuration document: {"pipeline": {...}, "mock_noise": {...},
// "timeout_ms": int}. All sections optional.
struct RunConfig {
  PipelineConfig pipeline;
  NoiseProfile noise;
  int timeout_ms = 30000;
};

inline RunConfig RunConfigFromJson(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("run config must be an object");
  for (const auto& [key, _] : j.items()) {
    if (key != "pipeline" && key != "mock_noise" && key != "timeout_ms") {
      throw ConfigError("unknown run config key '" + key + "'");
    }
  }
  RunConfig c;
  if (j.contains("pipeline")) c.pipeline = PipelineConfigFromJson(j["pipeline"]);
  if (j.contains("mock_noise")) c.noise = NoiseProfileFromJson(j["mock_noise"]);
  if (j.contains("timeout_ms")) {
    if (!j["timeout_ms"].is_number_integer() || j["timeout_ms"].get<int>() < 1) {
      throw ConfigError("timeout_ms must be a positive integer");
    }
    c.timeout_ms = j["timeout_ms"].get<int>();
  }
  return c;
}

inline nlohmann::json ToJson(const RunConfig& c) {
  return {{"pipeline", ToJson(c.pipeline)}, {"mock_noise", ToJson(c.noise)}, {"timeout_ms", c.timeout_ms}};
}

inline std::shared_ptr<const synth::Scenario> LoadScenarioFile(const fs::path& p) {
  try {
    return std::make_shared<const synth::Scenario>(synth::ScenarioFromJson(ReadJson(p)));
  } catch (const CodecError& e) {
    throw ConfigError(p.string() + ": " + e.what());
  }
}

inline std::string RunFileStem(const std::string& video, const std::string& query) {
  return video + "__" + query;
}

// ---- gen ----

struct GenOptions {
  uint64_t seed = 0;
  int scenarios = 20;
  synth::GenSpec spec;
  bool embed_label_maps = false;
  fs::path out = "suite";
};

inline uint64_t ScenarioSeed(uint64_t suite_seed, int index) {
  return MixSeed(suite_seed, static_cast<uint64_t>(index));
}

inline int CmdGen(const GenOptions& o, std::ostream& log) {
  if (o.scenarios < 1) {
    log << "error: --scenarios must be >= 1\n";
    return kConfigError;
  }
  std::error_code ec;
  fs::create_directories(o.out, ec);
  if (ec) {
    log << "error: cannot create " << o.out << ": " << ec.message() << "\n";
    return kConfigError;
  }
  SuiteManifest manifest;
  char line[160];
  std::snprintf(line, sizeof(line), "%-12s %8s %8s %10s %10s\n", "scenario", "objects", "queries",
                "positives", "negatives");
  log << line;
  int total_pos = 0, total_neg = 0;
  for (int i = 0; i < o.scenarios; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "scene_%03d", i);
    synth::Scenario s;
    try {
      s = synth::Generate(ScenarioSeed(o.seed, i), o.spec, id);
    } catch (const GenerationError& e) {
      log << "error: " << id << ": " << e.what() << "\n";
      return kConfigError;
    }
    const std::string file = std::string(id) + ".json";
    try {
      WriteFileAtomic(o.out / file, Pretty(synth::ToJson(s, o.embed_label_maps)));
    } catch (const std::exception& e) {
      log << "error: " << e.what() << "\n";
      return kConfigError;
    }
    int pos = 0, neg = 0;
    for (const auto& q : s.queries) {
      manifest.entries.push_back({file, q.id});
      (q.target ? pos : neg) += 1;
    }
    total_pos += pos;
    total_neg += neg;
    std::snprintf(line, sizeof(line), "%-12s %8zu %8zu %10d %10d\n", id, s.objects.size(),
                  s.queries.size(), pos, neg);
    log << line;
  }
  WriteFileAtomic(o.out / "manifest.json", Pretty(ToJson(manifest)));
  log << o.scenarios << " scenarios, " << total_pos << " positive and " << total_neg
      << " negative queries written to " << o.out.string() << "\n";
  return kOk;
}

// ---- run ----

struct RunOptions {
  fs::path manifest;
  std::string backend;    // empty: manifest value
  fs::path config;        // empty: $REFVOS_CONFIG, then manifest "config"
  int jobs = 1;
  fs::path out;           // empty: manifest "output", relative to the manifest
};

struct RunSummary {
  int runs = 0;
  int completed = 0;
  CallCounts calls;
  std::vector<nlohmann::json> failures;
};

inline std::unique_ptr<Backend> MakeBackend(const std::string& spec, const RunConfig& cfg) {
  if (spec == "mock") return std::make_unique<MockBackend>(cfg.noise);
  ExternalBackend::Options opts;
  opts.timeout = std::chrono::milliseconds(cfg.timeout_ms);
  return std::make_unique<ExternalBackend>(Endpoint::Parse(spec), opts);
}

inline int CmdRun(const RunOptions& o, std::ostream& log) {
  SuiteManifest manifest;
  RunConfig cfg;
  std::string backend_spec;
  fs::path out_dir;
  std::map<std::string, std::shared_ptr<const synth::Scenario>> scenarios;
  try {
    manifest = LoadManifest(o.manifest);
    nlohmann::json cfg_doc = manifest.config;
    if (!o.config.empty()) {
      cfg_doc = ReadJson(o.config);
    } else if (const char* env = std::getenv(kConfigEnvVar); env != nullptr && *env != '\0') {
      cfg_doc = ReadJson(env);
    }
    cfg = RunConfigFromJson(cfg_doc);
    backend_spec = o.backend.empty() ? manifest.backend : o.backend;
    if (backend_spec != "mock") Endpoint::Parse(backend_spec);
    if (o.jobs < 1) throw ConfigError("--jobs must be >= 1");
    out_dir = !o.out.empty() ? o.out : manifest.base_dir / manifest.output;
    fs::create_directories(out_dir);
    for (const auto& e : manifest.entries) {
      const std::string key = e.scenario_file;
      if (!scenarios.count(key)) scenarios[key] = LoadScenarioFile(manifest.ScenarioPath(e));
      if (scenarios[key]->FindQuery(e.query) == nullptr) {
        throw ConfigError("query " + e.query + " not found in " + key);
      }
    }
  } catch (const Error& e) {
    log << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const fs::filesystem_error& e) {
    log << "config error: " << e.what() << "\n";
    return kConfigError;
  }

  const size_t n = manifest.entries.size();
  std::vector<std::optional<RunResult>> results(n);
  std::vector<std::string> errors(n);
  std::atomic<size_t> next{0};
  auto worker = [&] {
    std::unique_ptr<Backend> backend;
    for (size_t i = next++; i < n; i = next++) {
      const auto& e = manifest.entries[i];
      const auto& scenario = scenarios.at(e.scenario_file);
      const VideoClip video =
          VideoClip::FromScenario(scenario, fs::absolute(manifest.ScenarioPath(e)).string());
      const Query query = Query::FromSpec(*scenario->FindQuery(e.query));
      try {
        if (!backend) backend = MakeBackend(backend_spec, cfg);
        RunResult r = RunPipeline(video, query, cfg.pipeline, *backend);
        const std::string stem = RunFileStem(r.video, r.query);
        WriteFileAtomic(out_dir / (stem + ".json"), ToJson(r).dump() + "\n");
        WriteFileAtomic(out_dir / (stem + ".final.ndjson"), ToNdjson(r.final));
        results[i] = std::move(r);
      } catch (const RunError& err) {
        errors[i] = err.stage() + "|" + err.what();
        backend.reset();
      } catch (const std::exception& err) {
        errors[i] = std::string("run|") + err.what();
        backend.reset();
      }
    }
  };
  const int jobs = std::min<int>(o.jobs, static_cast<int>(std::max<size_t>(n, 1)));
  std::vector<std::thread> pool;
  for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  RunSummary summary;
  summary.runs = static_cast<int>(n);
  StageTimings total;
  nlohmann::json per_run = nlohmann::json::array();
  for (size_t i = 0; i < n; ++i) {
    const auto& e = manifest.entries[i];
    if (results[i]) {
      const RunResult& r = *results[i];
      ++summary.completed;
      summary.calls += r.calls;
      total.presence_ms += r.timings.presence_ms;
      total.coarse_ms += r.timings.coarse_ms;
      total.anchors_ms += r.timings.anchors_ms;
      total.propagate_ms += r.timings.propagate_ms;
      total.planner_ms += r.timings.planner_ms;
      per_run.push_back({{"video", r.video},
                         {"query", r.query},
                         {"status", "ok"},
                         {"present", r.presence.present},
                         {"calls", ToJson(r.calls)},
                         {"flags", r.flags}});
    } else {
      const auto bar = errors[i].find('|');
      nlohmann::json f = {{"video", scenarios.at(e.scenario_file)->id},
                          {"query", e.query},
                          {"status", "failed"},
                          {"stage", errors[i].substr(0, bar)},
                          {"error", errors[i].substr(bar + 1)}};
      summary.failures.push_back(f);
      per_run.push_back(f);
    }
  }
  const nlohmann::json doc = {{"runs", summary.runs},
                              {"completed", summary.completed},
                              {"failed", summary.runs - summary.completed},
                              {"backend", backend_spec},
                              {"config", ToJson(cfg)},
                              {"calls", ToJson(summary.calls)},
                              {"per_run", per_run}};
  WriteFileAtomic(out_dir / "summary.json", Pretty(doc));

  char line[200];
  std::snprintf(line, sizeof(line), "runs %d  completed %d  failed %d\n", summary.runs,
                summary.completed, summary.runs - summary.completed);
  log << line;
  std::snprintf(line, sizeof(line), "backend calls: judge_presence %d  ground %d  propagate %d\n",
                summary.calls.presence, summary.calls.ground, summary.calls.propagate);
  log << line;
  std::snprintf(line, sizeof(line),
                "stage time (ms): presence %.1f  coarse %.1f  anchors %.1f  propagate %.1f  "
                "planner %.1f\n",
                total.presence_ms, total.coarse_ms, total.anchors_ms, total.propagate_ms,
                total.planner_ms);
  log << line;
  for (const auto& f : summary.failures) {
    log << "FAILED " << f["video"].get<std::string>() << "/" << f["query"].get<std::string>()
        << " at " << f["stage"].get<std::string>() << ": " << f["error"].get<std::string>() << "\n";
  }
  return summary.completed == summary.runs ? kOk : kFailure;
}

// ---- eval ----

struct EvalOptions {
  fs::path results;
  fs::path truth;  // suite manifest
  fs::path out;    // empty: <results>/report.json
  int tolerance = -1;
};

// Scores `final` trajectories in `results` against ground truth recomputed
// from the manifest's scenarios.
inline metrics::EvalReport Evaluate(const SuiteManifest& manifest, const fs::path& results,
                                    int tolerance) {
  std::map<std::string, std::shared_ptr<const synth::Scenario>> scenarios;
  std::vector<metrics::VideoRow> rows;
  std::vector<Trajectory> preds;
  std::vector<bool> present;
  for (const auto& e : manifest.entries) {
    auto& s = scenarios[e.scenario_file];
    if (!s) s = LoadScenarioFile(manifest.ScenarioPath(e));
    const auto gt = synth::ComputeGroundTruth(*s, e.query);
    const fs::path file = results / (RunFileStem(s->id, e.query) + ".json");
    if (!fs::exists(file)) throw ContractError("missing result " + file.string());
    RunResult r;
    try {
      r = RunResultFromJson(ReadJson(file));
    } catch (const CodecError& err) {
      throw ContractError(file.string() + ": " + err.what());
    }
    const Trajectory truth = gt.trajectory ? *gt.trajectory
                                           : Trajectory::Zeros(static_cast<size_t>(s->frames),
                                                               s->height, s->width);
    if (r.final.size() != truth.size()) {
      throw ContractError(file.string() + ": length " + std::to_string(r.final.size()) +
                          " does not match ground truth " + std::to_string(truth.size()));
    }
    const auto score = metrics::VideoJF(r.final, truth, tolerance);
    rows.push_back({s->id, e.query, gt.present, score.j, score.f});
    preds.push_back(std::move(r.final));
    present.push_back(gt.present);
  }
  std::vector<metrics::PresenceCase> cases;
  for (size_t i = 0; i < preds.size(); ++i) cases.push_back({present[i], &preds[i]});
  return metrics::BuildReport(std::move(rows), metrics::PresenceAccuracies(cases));
}

inline int CmdEval(const EvalOptions& o, std::ostream& log) {
  SuiteManifest manifest;
  try {
    manifest = LoadManifest(o.truth);
    if (!fs::is_directory(o.results)) throw ConfigError("results directory " + o.results.string() + " not found");
  } catch (const Error& e) {
    log << "config error: " << e.what() << "\n";
    return kConfigError;
  }
  metrics::EvalReport report;
  try {
    report = Evaluate(manifest, o.results, o.tolerance);
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const Error& e) {
    log << "eval error: " << e.what() << "\n";
    return kFailure;
  }
  const fs::path out = o.out.empty() ? o.results / "report.json" : o.out;
  WriteFileAtomic(out, Pretty(metrics::ToJson(report)));
  log << metrics::LeaderboardRow(report) << "\n";
  return kOk;
}

// ---- protocol-check ----

inline std::string SelfExecutable() {
  std::error_code ec;
  const auto p = fs::read_symlink("/proc/self/exe", ec);
  return ec ? std::string("refvos") : p.string();
}

// "builtin" runs this executable's own `serve` subcommand.
inline Endpoint ResolveEndpoint(const std::string& spec) {
  if (spec == "builtin") return {Endpoint::Type::kExec, "'" + SelfExecutable() + "' serve"};
  return Endpoint::Parse(spec);
}

inline int CmdProtocolCheck(const std::string& endpoint, std::ostream& log,
                            int timeout_ms = 10000) {
  Endpoint e;
  try {
    e = ResolveEndpoint(endpoint);
  } catch (const ConfigError& err) {
    log << "config error: " << err.what() << "\n";
    return kConfigError;
  }
  const auto report = RunConformance(e, std::chrono::milliseconds(timeout_ms));
  log << "endpoint " << report.endpoint << "\n" << report.ToText();
  return report.ok() ? kOk : kFailure;
}

}  // namespace refvos::cli
