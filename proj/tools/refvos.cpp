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

#include <csignal>
#include <iostream>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "refvos/commands.hpp"
#include "refvos/server.hpp"

namespace {

std::atomic<bool> g_stop{false};

void OnSignal(int) { g_stop = true; }

// Accepts "N" or "MIN-MAX".
bool ParseRange(const std::string& s, int* lo, int* hi) {
  try {
    const auto dash = s.find('-');
    if (dash == std::string::npos) {
      *lo = *hi = std::stoi(s);
    } else {
      *lo = std::stoi(s.substr(0, dash));
      *hi = std::stoi(s.substr(dash + 1));
    }
  } catch (const std::exception&) {
    return false;
  }
  return *lo >= 1 && *lo <= *hi;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace refvos;
  CLI::App app{"refvos: referring video object segmentation pipeline"};
  app.require_subcommand(1);

  cli::GenOptions gen;
  std::string objects = "3-5";
  std::string gen_out = "suite";
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic scenario suite and manifest");
  gen_cmd->add_option("--seed", gen.seed, "Suite seed")->required();
  gen_cmd->add_option("--scenarios", gen.scenarios, "Number of scenarios")->capture_default_str();
  gen_cmd->add_option("--frames", gen.spec.frames, "Frames per clip")->capture_default_str();
  gen_cmd->add_option("--objects", objects, "Objects per clip, N or MIN-MAX")->capture_default_str();
  gen_cmd->add_option("--height", gen.spec.height, "Frame height")->capture_default_str();
  gen_cmd->add_option("--width", gen.spec.width, "Frame width")->capture_default_str();
  gen_cmd->add_option("--positives", gen.spec.positive_queries, "Positive queries per clip")
      ->capture_default_str();
  gen_cmd->add_option("--negatives", gen.spec.negative_queries, "Negative queries per clip")
      ->capture_default_str();
  gen_cmd->add_flag("--embed-label-maps", gen.embed_label_maps,
                    "Store rendered label maps in each scenario file");
  gen_cmd->add_option("--out", gen_out, "Output directory")->capture_default_str();

  cli::RunOptions run;
  std::string run_manifest, run_config, run_out;
  auto* run_cmd = app.add_subcommand("run", "Run the pipeline over a suite manifest");
  run_cmd->add_option("--manifest", run_manifest, "Suite manifest")->required();
  run_cmd->add_option("--backend", run.backend, "mock | exec:<command> | socket:<addr>");
  run_cmd->add_option("--config", run_config, "Run config JSON (default: $REFVOS_CONFIG)");
  run_cmd->add_option("--jobs", run.jobs, "Parallel runs")->capture_default_str();
  run_cmd->add_option("--out", run_out, "Output directory (default: manifest output)");

  cli::EvalOptions eval;
  std::string eval_results, eval_truth, eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "Score run outputs against ground truth");
  eval_cmd->add_option("--results", eval_results, "Directory written by run")->required();
  eval_cmd->add_option("--truth", eval_truth, "Suite manifest")->required();
  eval_cmd->add_option("--out", eval_out, "Report path (default: <results>/report.json)");
  eval_cmd->add_option("--tolerance", eval.tolerance, "Boundary tolerance in pixels (-1: auto)")
      ->capture_default_str();

  std::string endpoint;
  int check_timeout_ms = 10000;
  auto* check_cmd = app.add_subcommand("protocol-check", "Run the conformance suite on a backend");
  check_cmd->add_option("--endpoint", endpoint, "builtin | exec:<command> | socket:<addr>")
      ->required();
  check_cmd->add_option("--timeout-ms", check_timeout_ms, "Per-reply timeout")->capture_default_str();

  std::string fault = "none", noise_file, listen;
  auto* serve_cmd = app.add_subcommand("serve", "Serve the mock backend over stdio or a socket");
  serve_cmd->add_option("--fault", fault,
                        "none | omit-version | wrong-id | truncate | drop-payload | ignore-unknown")
      ->capture_default_str();
  serve_cmd->add_option("--noise", noise_file, "Noise profile JSON");
  serve_cmd->add_option("--listen", listen, "host:port or unix socket path (default: stdio)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : cli::kConfigError;
  }

  if (*gen_cmd) {
    if (!ParseRange(objects, &gen.spec.min_objects, &gen.spec.max_objects)) {
      std::cerr << "error: --objects must be N or MIN-MAX with 1 <= MIN <= MAX\n";
      return cli::kConfigError;
    }
    gen.out = gen_out;
    return cli::CmdGen(gen, std::cout);
  }
  if (*run_cmd) {
    run.manifest = run_manifest;
    run.config = run_config;
    run.out = run_out;
    return cli::CmdRun(run, std::cout);
  }
  if (*eval_cmd) {
    eval.results = eval_results;
    eval.truth = eval_truth;
    eval.out = eval_out;
    return cli::CmdEval(eval, std::cout);
  }
  if (*check_cmd) return cli::CmdProtocolCheck(endpoint, std::cout, check_timeout_ms);

  // serve
  MockServer::Options opts;
  try {
    opts.fault = ParseFault(fault);
    if (!noise_file.empty()) opts.noise = NoiseProfileFromJson(cli::ReadJson(noise_file));
    opts.noise.Validate();
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return cli::kConfigError;
  }
  MockServer server(opts);
  if (listen.empty()) {
    std::ios::sync_with_stdio(false);
    return Serve(std::cin, std::cout, server);
  }
  try {
    SocketServer sock(server, listen);
    std::signal(SIGINT, OnSignal);
    std::signal(SIGTERM, OnSignal);
    std::thread watcher([&] {
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(50));
      sock.Stop();
    });
    std::cerr << "listening on " << listen << "\n";
    sock.Run();
    watcher.join();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kFailure;
  }
  return 0;
}
