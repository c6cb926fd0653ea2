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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "posbias/cli.h"
#include "posbias/comparison_data.h"
#include "posbias/detection.h"
#include "posbias/knockoff.h"
#include "posbias/path_algorithms.h"
#include "posbias/simulation.h"
#include "test_util.h"

namespace posbias {
namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

SimulationConfig FullSizeConfig() {
  SimulationConfig cfg;
  cfg.n_items = 16;
  cfg.n_good = 100;
  cfg.n_biased = 50;
  cfg.reps = 20;
  cfg.seed = 20260101;
  cfg.detection.q = 0.10;
  cfg.detection.engine = PathEngine::kIssExact;
  return cfg;
}

// Criteria 1 and 2 share one grid run.
std::vector<GridCell> CornerGrid() {
  static const std::vector<GridCell> grid =
      RunGrid({0.10, 0.40}, {0.40, 0.70}, FullSizeConfig());
  return grid;
}

std::string CellText(const GridCell& c) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "(p1=%.2f,p2=%.2f: fdp=%.4f, td=%.2f)",
                c.p1, c.p2, c.mean_fdp, c.mean_true_discoveries);
  return buf;
}

Outcome FdrControl() {
  bool pass = true;
  std::string detail;
  for (const GridCell& c : CornerGrid()) {
    pass = pass && c.mean_fdp >= 0.0 && c.mean_fdp <= 0.22;
    detail += CellText(c) + " ";
  }
  return {pass, "mean FDP in [0, 0.22] per cell; " + detail};
}

Outcome Power() {
  bool pass = true;
  std::string detail;
  for (const GridCell& c : CornerGrid()) {
    if (c.p2 < 0.5) continue;
    pass = pass && c.mean_true_discoveries >= 48.0;
    detail += CellText(c) + " ";
  }
  return {pass, "mean true discoveries >= 48 for p2 >= 0.5; " + detail};
}

Outcome NullCalibration() {
  SimulationConfig cfg = FullSizeConfig();
  cfg.n_good = 150;
  cfg.n_biased = 0;
  cfg.reps = 50;
  cfg.seed = 33;
  cfg.detection.q = 0.2;
  cfg.detection.plus = true;
  const std::vector<GridCell> grid = RunGrid({0.2}, {0.0}, cfg);
  int any = 0;
  for (const TrialMetrics& m : grid[0].trials) any += m.selected_size > 0;
  const double frac = static_cast<double>(any) / cfg.reps;
  const double bound = 0.2 + 3.0 * std::sqrt(0.16 / cfg.reps);
  char buf[128];
  std::snprintf(buf, sizeof(buf), "P(any discovery) = %d/%d = %.3f <= %.3f",
                any, cfg.reps, frac, bound);
  return {frac <= bound, buf};
}

Outcome KnockoffInvariants() {
  std::mt19937_64 rng(404);
  double worst_gram = 0.0;
  double worst_eig = 0.0;
  for (int trial = 0; trial < 25; ++trial) {
    SimulationConfig cfg;
    cfg.n_items = 4 + static_cast<int>(rng() % 13);
    const int u = 5 + static_cast<int>(rng() % 56);
    cfg.n_biased = static_cast<int>(rng() % (u / 2 + 1));
    cfg.n_good = u - cfg.n_biased;
    cfg.p1 = 0.2;
    cfg.p2 = 0.6;
    const SimulatedData sim = Generate(cfg, rng());
    const DesignOperators ops = BuildOperators(sim.dataset);
    KnockoffOptions options;
    options.mode = trial % 2 ? SMode::kSdp : SMode::kEquicorrelated;
    options.seed = rng();
    const KnockoffFeatures ko = ConstructKnockoffs(ops, options);
    worst_gram = std::max(worst_gram, CheckGramConditions(ops, ko).max());
    Eigen::MatrixXd slack = 2.0 * ko.sigma;
    slack.diagonal() -= ko.s;
    const double min_eig =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(slack,
                                                       Eigen::EigenvaluesOnly)
            .eigenvalues()
            .minCoeff();
    worst_eig = std::min(worst_eig, min_eig);
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "25 instances: max Gram violation %.3g <= 1e-6, min eig of "
                "2 Sigma - diag(s) %.3g >= -1e-8",
                worst_gram, worst_eig);
  return {worst_gram <= 1e-6 && worst_eig >= -1e-8, buf};
}

SimulatedData SmallInstance(std::uint64_t seed, int n_items, int n_good,
                            int n_biased) {
  SimulationConfig cfg;
  cfg.n_items = n_items;
  cfg.n_good = n_good;
  cfg.n_biased = n_biased;
  cfg.p1 = 0.15;
  cfg.p2 = 0.6;
  return Generate(cfg, seed);
}

Outcome Equivalence() {
  double worst = 0.0;
  bool pass = true;
  for (int trial = 0; trial < 10; ++trial) {
    const SimulatedData sim =
        SmallInstance(700 + trial, 5 + trial % 4, 6 + trial % 5, 2 + trial % 3);
    const DesignOperators ops = BuildOperators(sim.dataset);
    KnockoffOptions options;
    options.seed = trial;
    for (PathEngine engine : {PathEngine::kIssExact, PathEngine::kLasso}) {
      const EquivalenceReport r =
          EquivalenceCheck(ops, sim.dataset.Responses(), engine, options);
      worst = std::max(worst, r.max_diff);
      pass = pass && r.pass;
    }
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "10 instances x {iss_exact, lasso}: max |W_full - W_reduced| "
                "= %.3g <= 1e-6",
                worst);
  return {pass && worst <= 1e-6, buf};
}

Outcome Antisymmetry() {
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const SimulatedData sim = SmallInstance(800 + trial, 8, 8, 4);
    const DesignOperators ops = BuildOperators(sim.dataset);
    const Eigen::VectorXd y = sim.dataset.Responses();
    KnockoffOptions options;
    options.seed = trial;
    const Eigen::MatrixXd ext =
        ExtendedDesign(ops, ConstructKnockoffs(ops, options));
    const int u = ops.num_annotators();
    const Eigen::VectorXd w =
        PathKnockoffStatistics(MakePathProblem(ops.grad, ext, y),
                               PathEngine::kIssExact, {})
            .w;
    const int j = trial % u;
    Eigen::MatrixXd swapped = ext;
    swapped.col(j).swap(swapped.col(u + j));
    const Eigen::VectorXd ws =
        PathKnockoffStatistics(MakePathProblem(ops.grad, swapped, y),
                               PathEngine::kIssExact, {})
            .w;
    for (int i = 0; i < u; ++i) {
      worst = std::max(worst, std::abs(ws[i] - (i == j ? -w[i] : w[i])));
    }
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "10 instances: max deviation from exact sign flip %.3g <= "
                "1e-8",
                worst);
  return {worst <= 1e-8, buf};
}

Outcome SolverCrossValidation() {
  int worst = 0;
  std::string detail;
  for (int seed = 0; seed < 10; ++seed) {
    const SimulatedData sim = SmallInstance(900 + seed, 8, 20 + seed, 10);
    const DesignOperators ops = BuildOperators(sim.dataset);
    const PathProblem problem = MakePathProblem(
        ops.grad, Eigen::MatrixXd(ops.annot), sim.dataset.Responses());
    const Eigen::VectorXd exact = EnteringTimes(IssPathExact(problem, {}));
    std::vector<int> order(exact.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return exact[a] > exact[b]; });
    const int first = std::min<int>(10, static_cast<int>(order.size()));
    PathConfig cfg;
    cfg.kappa = 1024.0;
    cfg.record_stride = 0;
    // Horizon: 1.5 times the exact entering time of the 10th coordinate.
    cfg.t_max = 1.5 / exact[order[first - 1]];
    const Eigen::VectorXd approx = EnteringTimes(LbiPath(problem, cfg));
    int inversions = 0;
    for (int a = 0; a < first; ++a) {
      for (int b = a + 1; b < first; ++b) {
        if (approx[order[a]] <= approx[order[b]]) ++inversions;
      }
    }
    worst = std::max(worst, inversions);
    detail += std::to_string(inversions) + " ";
  }
  return {worst <= 1,
          "LBI (kappa=1024) vs exact ISS, inversions among first 10 per seed: " +
              detail};
}

Outcome Reestimation() {
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const SimulatedData sim = SmallInstance(1000 + trial, 6 + trial, 10, 5);
    const DesignOperators ops = BuildOperators(sim.dataset);
    std::mt19937_64 rng(trial);
    std::normal_distribution<double> normal;
    Eigen::VectorXd theta(ops.num_items());
    for (auto& v : theta) v = normal(rng);
    theta.array() -= theta.mean();
    Eigen::VectorXd gamma = Eigen::VectorXd::Zero(ops.num_annotators());
    for (int j : sim.truth) gamma[j] = 1.0 + normal(rng);
    const Eigen::VectorXd y = testing::PlantedResponses(ops, theta, gamma);
    const Estimate est = Reestimate(ops, y, sim.truth);
    worst = std::max(worst, (est.theta - theta).cwiseAbs().maxCoeff());
    worst = std::max(worst, (est.gamma - gamma).cwiseAbs().maxCoeff());
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "10 noiseless instances: max |theta-theta*|, |gamma-gamma*| "
                "= %.3g <= 1e-8",
                worst);
  return {worst <= 1e-8, buf};
}

std::string Slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Outcome GoldenFiles() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "posbias_acceptance";
  fs::create_directories(dir);
  const std::string data =
      std::string(POSBIAS_TEST_DATA_DIR) + "/fixture_small.csv";
  bool pass = true;
  std::string detail;
  const std::vector<std::vector<std::string>> commands = {
      {"detect", "--input", data, "--q", "0.2", "--seed", "11"},
      {"simulate", "--p1", "0.1,0.3", "--p2", "0.6", "--n-items", "6",
       "--n-good", "12", "--n-biased", "4", "--reps", "3", "--q", "0.2",
       "--seed", "7"}};
  for (const auto& base : commands) {
    std::string outputs[2];
    for (int run = 0; run < 2; ++run) {
      std::vector<std::string> args = base;
      const fs::path out = dir / (base[0] + std::to_string(run) + ".txt");
      args.push_back("--output");
      args.push_back(out.string());
      std::ostringstream sink;
      const int code = RunCli(args, sink, sink);
      pass = pass && code == 0;
      outputs[run] = Slurp(out);
    }
    const bool same = !outputs[0].empty() && outputs[0] == outputs[1];
    pass = pass && same;
    detail += base[0] + (same ? " identical " : " DIFFERS ");
  }
  fs::remove_all(dir);
  return {pass, detail};
}

}  // namespace
}  // namespace posbias

int main() {
  using posbias::Outcome;
  const std::vector<std::pair<std::string, std::function<Outcome()>>>
      criteria = {
          {"1 FDR control (exact ISS)", posbias::FdrControl},
          {"2 power (exact ISS)", posbias::Power},
          {"3 null calibration (knockoff+, q=0.2)", posbias::NullCalibration},
          {"4 knockoff Gram conditions", posbias::KnockoffInvariants},
          {"5 full vs reduced model equivalence", posbias::Equivalence},
          {"6 antisymmetry under column swap", posbias::Antisymmetry},
          {"7 LBI vs exact ISS entering order",
           posbias::SolverCrossValidation},
          {"8 noiseless re-estimation", posbias::Reestimation},
          {"9 byte-identical CLI outputs", posbias::GoldenFiles},
      };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = check();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - start)
                            .count();
    std::printf("%s criterion %s: %s [%.1fs]\n", outcome.pass ? "PASS" : "FAIL",
                name.c_str(), outcome.detail.c_str(), secs);
    std::fflush(stdout);
    failures += !outcome.pass;
  }
  std::printf("%d of %zu criteria passed\n",
              static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
