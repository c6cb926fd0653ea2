// Copyright 2026 The posbias Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "posbias/cli.h"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <unistd.h>

#include "CLI11.hpp"
#include "format.h"
#include "posbias/comparison_data.h"
#include "posbias/detection.h"
#include "posbias/errors.h"
#include "posbias/knockoff.h"
#include "posbias/path_algorithms.h"
#include "posbias/simulation.h"

namespace posbias {
namespace {

namespace fs = std::filesystem;
using internal::FormatDouble;

constexpr int kEquivalenceGuideline = 100;

// Raw option values shared by the commands that fit a model.
struct ModelFlags {
  std::string engine = "iss_exact";
  std::string s_mode = "equicorrelated";
  bool normalize = true;
  bool plus = false;
  double q = 0.1;
  std::uint64_t seed = 0;
  double kappa = 256.0;
  double dt = 0.0;
  double t_max = 0.0;
  int lambda_count = 100;
  double lambda_min_ratio = 1e-3;
  int max_entered = 0;

  DetectionConfig ToConfig() const {
    DetectionConfig cfg;
    cfg.q = q;
    cfg.plus = plus;
    cfg.engine = ParseEngine(engine);
    cfg.s_mode = ParseSMode(s_mode);
    cfg.normalize = normalize;
    cfg.seed = seed;
    cfg.path.kappa = kappa;
    if (dt > 0.0) cfg.path.dt = dt;
    if (t_max > 0.0) cfg.path.t_max = t_max;
    cfg.path.lambda_count = lambda_count;
    cfg.path.lambda_min_ratio = lambda_min_ratio;
    cfg.path.max_entered = max_entered;
    if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("--q must lie in [0, 1]");
    return cfg;
  }
};

void AddPathFlags(CLI::App* cmd, ModelFlags& f) {
  cmd->add_option("--engine", f.engine, "Path engine: lbi, iss_exact, lasso")
      ->capture_default_str();
  cmd->add_option("--kappa", f.kappa, "LBI damping factor")
      ->capture_default_str();
  cmd->add_option("--dt", f.dt, "LBI step (default: stability bound / 2)");
  cmd->add_option("--t-max", f.t_max,
                  "LBI horizon (default: 100 / |X^T (I - H) Y|_inf)");
  cmd->add_option("--lambda-count", f.lambda_count, "LASSO grid size")
      ->capture_default_str();
  cmd->add_option("--lambda-min-ratio", f.lambda_min_ratio,
                  "Smallest LASSO lambda relative to lambda_max")
      ->capture_default_str();
  cmd->add_option("--max-entered", f.max_entered,
                  "Stop LBI once this many coordinates entered (0: off)")
      ->capture_default_str();
}

void AddKnockoffFlags(CLI::App* cmd, ModelFlags& f) {
  cmd->add_option("--s-mode", f.s_mode, "equicorrelated or sdp")
      ->capture_default_str();
  cmd->add_flag("--normalize,!--no-normalize", f.normalize,
                "Choose s on the unit-diagonal residual Gram")
      ->capture_default_str();
  cmd->add_option("--seed", f.seed, "Seed for the knockoff complement basis")
      ->capture_default_str();
}

void AddSelectionFlags(CLI::App* cmd, ModelFlags& f) {
  cmd->add_option("--q", f.q, "Target FDR in [0, 1]")->capture_default_str();
  cmd->add_flag("--plus", f.plus, "Use the knockoff+ threshold");
}

std::vector<double> ParseList(const std::string& text,
                              const std::string& flag) {
  if (text.empty() || text.back() == ',') {
    throw ConfigError("empty entry in " + flag);
  }
  std::vector<double> values;
  std::stringstream stream(text);
  std::string token;
  while (std::getline(stream, token, ',')) {
    const auto begin = token.find_first_not_of(" \t");
    const auto end = token.find_last_not_of(" \t");
    if (begin == std::string::npos) {
      throw ConfigError("empty entry in " + flag);
    }
    token = token.substr(begin, end - begin + 1);
    double v = 0.0;
    const auto res =
        std::from_chars(token.data(), token.data() + token.size(), v);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
      throw ConfigError("invalid number '" + token + "' in " + flag);
    }
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ConfigError(flag + " values must lie in [0, 1], got " + token);
    }
    values.push_back(v);
  }
  if (values.empty()) throw ConfigError(flag + " is empty");
  return values;
}

// Writes through a temporary file in the target directory and renames it
// into place.
void WriteAtomically(const std::string& path,
                     const std::function<void(std::ostream&)>& write) {
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    write(out);
    out.flush();
    if (!out) {
      std::error_code ignored;
      fs::remove(tmp, ignored);
      throw ConfigError("write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw ConfigError("cannot move output into " + path);
  }
}

void Emit(const std::string& path, std::ostream& fallback,
          const std::function<void(std::ostream&)>& write) {
  if (path.empty() || path == "-") {
    write(fallback);
  } else {
    WriteAtomically(path, write);
  }
}

// Reads `key = value` lines. '#' starts a comment.
std::vector<std::pair<std::string, std::string>> ReadConfigFile(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  int line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    for (char& c : key) {
      if (c == '_') c = '-';
    }
    if (key.empty()) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key");
    }
    entries.emplace_back(std::move(key), std::move(value));
  }
  return entries;
}

// Locates `--config PATH` or `--config=PATH` after the subcommand.
std::string FindConfigPath(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return {};
}

int RunDetect(const std::string& input, const std::string& output,
              const std::string& knockoff_csv, const ModelFlags& flags,
              std::ostream& out, std::ostream& err) {
  const DetectionConfig cfg = flags.ToConfig();
  const ComparisonDataset data = LoadDataset(input);
  const DetectionReport report = Detect(data, cfg);
  Emit(output, out,
       [&](std::ostream& os) { WriteReport(data, report, os); });
  if (!knockoff_csv.empty()) {
    WriteAtomically(knockoff_csv, [&](std::ostream& os) {
      WriteKnockoffCsv(data.annotators(), report.stats, report.selection, os);
    });
  }
  std::ostream& summary = (output.empty() || output == "-") ? err : out;
  summary << "selected=" << report.selection.selected.size()
          << " threshold=" << FormatDouble(report.selection.threshold)
          << " q=" << FormatDouble(cfg.q) << " plus="
          << (cfg.plus ? "true" : "false")
          << " engine=" << EngineName(cfg.engine) << '\n';
  return kExitOk;
}

int RunRank(const std::string& input, const std::string& output,
            const ModelFlags& flags, std::ostream& out) {
  const DetectionConfig cfg = flags.ToConfig();
  const ComparisonDataset data = LoadDataset(input);
  const DetectionReport report = Detect(data, cfg);
  Emit(output, out,
       [&](std::ostream& os) { WriteItemsCsv(data, report, os); });
  return kExitOk;
}

int RunPaths(const std::string& input, const std::string& output,
             bool knockoffs, const ModelFlags& flags, std::ostream& out) {
  const DetectionConfig cfg = flags.ToConfig();
  const ComparisonDataset data = LoadDataset(input);
  const DesignOperators ops = BuildOperators(data);
  const Eigen::VectorXd y = data.Responses();
  PathProblem problem;
  if (knockoffs) {
    KnockoffOptions options{cfg.s_mode, cfg.normalize, cfg.seed};
    problem = KnockoffPathProblem(ops, ConstructKnockoffs(ops, options), y);
  } else {
    problem = MakePathProblem(ops.grad, Eigen::MatrixXd(ops.annot), y);
  }
  const SolutionPath path = ComputePath(cfg.engine, problem, cfg.path);
  Emit(output, out, [&](std::ostream& os) { WritePathCsv(path, os); });
  return kExitOk;
}

int RunEquivalence(const std::string& input, double tol,
                   const ModelFlags& flags, std::ostream& out,
                   std::ostream& err) {
  const DetectionConfig cfg = flags.ToConfig();
  const ComparisonDataset data = LoadDataset(input);
  if (data.num_annotators() > kEquivalenceGuideline) {
    err << "warning: " << data.num_annotators()
        << " annotators exceeds the guideline of " << kEquivalenceGuideline
        << " for the dense reduced model; this may be slow\n";
  }
  const DesignOperators ops = BuildOperators(data);
  KnockoffOptions options{cfg.s_mode, cfg.normalize, cfg.seed};
  const EquivalenceReport report = EquivalenceCheck(
      ops, data.Responses(), cfg.engine, options, cfg.path, tol);
  out << (report.pass ? "PASS" : "FAIL")
      << " max_diff=" << FormatDouble(report.max_diff)
      << (report.pass ? "<=" : ">") << FormatDouble(tol) << '\n';
  return report.pass ? kExitOk : kExitCheckFailed;
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"Detect position-biased annotators in pairwise comparisons"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.set_help_all_flag("--help-all", "Show help for every command");

  std::string config_path;
  std::string input;
  std::string output;
  std::string knockoff_csv;
  ModelFlags flags;

  auto add_common = [&](CLI::App* cmd, bool needs_input) {
    cmd->add_option("--config", config_path,
                    "Flat `key = value` file; flags override its values");
    if (needs_input) {
      cmd->add_option("--input", input, "Comparison CSV")->required();
    }
    cmd->add_option("--output", output, "Output path (default: stdout)");
  };

  CLI::App* detect = app.add_subcommand(
      "detect", "Select position-biased annotators and write a report");
  add_common(detect, true);
  AddSelectionFlags(detect, flags);
  AddKnockoffFlags(detect, flags);
  AddPathFlags(detect, flags);
  detect->add_option("--knockoff-csv", knockoff_csv,
                     "Also write per-annotator knockoff statistics");

  CLI::App* rank = app.add_subcommand(
      "rank", "Original and corrected item rankings side by side");
  add_common(rank, true);
  AddSelectionFlags(rank, flags);
  AddKnockoffFlags(rank, flags);
  AddPathFlags(rank, flags);

  bool knockoffs = false;
  CLI::App* paths =
      app.add_subcommand("paths", "Dump a regularization path as CSV");
  add_common(paths, true);
  AddKnockoffFlags(paths, flags);
  AddPathFlags(paths, flags);
  paths->add_flag("--knockoffs", knockoffs,
                  "Use the extended design with knockoff columns");

  double tol = 1e-6;
  CLI::App* equivalence = app.add_subcommand(
      "equivalence",
      "Compare knockoff statistics of the full and score-free models");
  equivalence->add_option("--config", config_path, "Config file");
  equivalence->add_option("--input", input, "Comparison CSV")->required();
  equivalence->add_option("--tol", tol, "Pass tolerance on max |W diff|")
      ->capture_default_str();
  AddKnockoffFlags(equivalence, flags);
  AddPathFlags(equivalence, flags);

  SimulationConfig sim;
  std::string p1_text = "0.1,0.2,0.3,0.4";
  std::string p2_text = "0.4,0.5,0.6,0.7";
  std::string bias_side = "left";
  std::string emit_dataset;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "Monte-Carlo FDP and power over a (p1, p2) grid");
  add_common(simulate, false);
  AddSelectionFlags(simulate, flags);
  AddKnockoffFlags(simulate, flags);
  AddPathFlags(simulate, flags);
  simulate->add_option("--p1", p1_text, "Comma-separated error rates")
      ->capture_default_str();
  simulate->add_option("--p2", p2_text, "Comma-separated bias rates")
      ->capture_default_str();
  simulate->add_option("--n-items", sim.n_items, "Number of items")
      ->capture_default_str();
  simulate->add_option("--n-good", sim.n_good, "Unbiased annotators")
      ->capture_default_str();
  simulate->add_option("--n-biased", sim.n_biased, "Biased annotators")
      ->capture_default_str();
  simulate->add_option("--reps", sim.reps, "Trials per cell")
      ->capture_default_str();
  simulate->add_option("--threads", sim.threads, "Worker threads (0: all)")
      ->capture_default_str();
  simulate->add_option("--bias-side", bias_side, "left or random")
      ->capture_default_str();
  simulate->add_option("--emit-dataset", emit_dataset,
                       "Write one simulated dataset (first p1, p2) and exit");

  // Splice config-file entries in front of the command-line flags so the
  // latter take precedence under the take-last policy.
  std::vector<std::string> argv_storage = args;
  try {
    const std::string path = FindConfigPath(args);
    std::size_t cmd_pos = args.size();
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (!args[i].empty() && args[i][0] != '-') {
        cmd_pos = i;
        break;
      }
    }
    if (!path.empty() && cmd_pos < args.size()) {
      CLI::App* cmd = app.get_subcommand_no_throw(args[cmd_pos]);
      if (cmd == nullptr) throw ConfigError("unknown command " + args[cmd_pos]);
      std::vector<std::string> injected;
      for (const auto& [key, value] : ReadConfigFile(path)) {
        if (key == "config" || cmd->get_option_no_throw("--" + key) == nullptr) {
          throw ConfigError("unknown config key '" + key + "' for command " +
                            args[cmd_pos]);
        }
        injected.push_back("--" + key + "=" + value);
      }
      argv_storage.insert(argv_storage.begin() + cmd_pos + 1,
                          injected.begin(), injected.end());
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  std::vector<const char*> argv{"posbias"};
  for (const std::string& a : argv_storage) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::Success& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (detect->parsed()) {
      return RunDetect(input, output, knockoff_csv, flags, out, err);
    }
    if (rank->parsed()) return RunRank(input, output, flags, out);
    if (paths->parsed()) return RunPaths(input, output, knockoffs, flags, out);
    if (equivalence->parsed()) {
      return RunEquivalence(input, tol, flags, out, err);
    }
    if (simulate->parsed()) {
      if (bias_side == "left") {
        sim.bias_side = BiasSide::kLeft;
      } else if (bias_side == "random") {
        sim.bias_side = BiasSide::kRandom;
      } else {
        throw ConfigError("--bias-side must be left or random");
      }
      sim.detection = flags.ToConfig();
      sim.seed = flags.seed;
      const std::vector<double> p1 = ParseList(p1_text, "--p1");
      const std::vector<double> p2 = ParseList(p2_text, "--p2");
      sim.p1 = p1.front();
      sim.p2 = p2.front();
      sim.Validate();
      if (!emit_dataset.empty()) {
        const SimulatedData data = Generate(sim, sim.seed);
        WriteAtomically(emit_dataset, [&](std::ostream& os) {
          WriteDataset(data.dataset, os);
        });
        return kExitOk;
      }
      const std::vector<GridCell> grid = RunGrid(p1, p2, sim);
      Emit(output, out,
           [&](std::ostream& os) { WriteGridCsv(grid, sim, os); });
      return kExitOk;
    }
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DimensionError& e) {
    err << "dimension error: " << e.what() << '\n';
    return kExitDimension;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitUsage;
}

}  // namespace posbias
