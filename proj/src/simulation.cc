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

#include "posbias/simulation.h"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <thread>

#include "format.h"
#include "posbias/errors.h"

namespace posbias {
namespace {

std::uint64_t Mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

bool Bernoulli(std::mt19937_64& rng, double p) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

}  // namespace

void SimulationConfig::Validate() const {
  if (n_items < 2) throw ConfigError("n_items must be at least 2");
  if (n_good < 0 || n_biased < 0) {
    throw ConfigError("annotator counts must be nonnegative");
  }
  if (!(p1 >= 0.0 && p1 <= 1.0)) throw ConfigError("p1 must lie in [0, 1]");
  if (!(p2 >= 0.0 && p2 <= 1.0)) throw ConfigError("p2 must lie in [0, 1]");
  if (reps < 1) throw ConfigError("reps must be at least 1");
  if (!(detection.q >= 0.0 && detection.q <= 1.0)) {
    throw ConfigError("q must lie in [0, 1]");
  }
}

std::uint64_t ChildSeed(std::uint64_t seed, int i, int j, int rep) {
  std::uint64_t h = Mix(seed);
  h = Mix(h ^ static_cast<std::uint64_t>(i));
  h = Mix(h ^ static_cast<std::uint64_t>(j));
  return Mix(h ^ static_cast<std::uint64_t>(rep));
}

SimulatedData Generate(const SimulationConfig& config, std::uint64_t seed) {
  config.Validate();
  std::mt19937_64 rng(seed);
  const int n = config.n_items;
  const int num_annotators = config.n_good + config.n_biased;

  // rank_of[i]: position of item i in the ground-truth order (0 = best).
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> rank_of(n);
  for (int r = 0; r < n; ++r) rank_of[order[r]] = r;

  std::vector<ComparisonRecord> records;
  records.reserve(static_cast<std::size_t>(num_annotators) * n * (n - 1) / 2);
  for (int a = 0; a < num_annotators; ++a) {
    const bool biased = a >= config.n_good;
    double side = 1.0;
    if (biased && config.bias_side == BiasSide::kRandom) {
      side = Bernoulli(rng, 0.5) ? 1.0 : -1.0;
    }
    const std::string name = "a" + std::to_string(a + 1);
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const bool swap = Bernoulli(rng, 0.5);
        const int left = swap ? j : i;
        const int right = swap ? i : j;
        double response;
        if (biased && Bernoulli(rng, config.p2)) {
          response = side;
        } else {
          response = rank_of[left] < rank_of[right] ? 1.0 : -1.0;
          if (Bernoulli(rng, config.p1)) response = -response;
        }
        records.push_back({name, "item" + std::to_string(left + 1),
                           "item" + std::to_string(right + 1), response});
      }
    }
  }

  SimulatedData data{ComparisonDataset::FromRecords(std::move(records)), {},
                     {}};
  for (int a = config.n_good; a < num_annotators; ++a) {
    data.truth.push_back(
        *data.dataset.annotators().Find("a" + std::to_string(a + 1)));
  }
  std::sort(data.truth.begin(), data.truth.end());
  for (int r = 0; r < n; ++r) {
    data.item_order.push_back(
        *data.dataset.items().Find("item" + std::to_string(order[r] + 1)));
  }
  return data;
}

TrialMetrics ScoreSelection(const std::vector<int>& selected,
                            const std::vector<int>& truth) {
  TrialMetrics m;
  m.selected_size = static_cast<int>(selected.size());
  for (int j : selected) {
    if (std::binary_search(truth.begin(), truth.end(), j)) {
      ++m.true_discoveries;
    }
  }
  const int false_positives = m.selected_size - m.true_discoveries;
  m.fdp = static_cast<double>(false_positives) /
          std::max(m.selected_size, 1);
  return m;
}

TrialMetrics RunTrial(const SimulationConfig& config, std::uint64_t seed) {
  const SimulatedData data = Generate(config, seed);
  DetectionConfig detection = config.detection;
  detection.seed = Mix(seed ^ 0x6b6e6f636b6f6666ULL);
  const DetectionReport report = Detect(data.dataset, detection);
  return ScoreSelection(report.selection.selected, data.truth);
}

std::vector<GridCell> RunGrid(const std::vector<double>& p1_list,
                              const std::vector<double>& p2_list,
                              const SimulationConfig& base) {
  base.Validate();
  const int rows = static_cast<int>(p1_list.size());
  const int cols = static_cast<int>(p2_list.size());
  std::vector<GridCell> grid(static_cast<std::size_t>(rows) * cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      GridCell& cell = grid[i * cols + j];
      cell.p1 = p1_list[i];
      cell.p2 = p2_list[j];
      cell.trials.resize(base.reps);
      SimulationConfig check = base;
      check.p1 = cell.p1;
      check.p2 = cell.p2;
      check.Validate();
    }
  }

  const std::size_t total = grid.size() * base.reps;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t t = next++; t < total; t = next++) {
      const std::size_t c = t / base.reps;
      const int rep = static_cast<int>(t % base.reps);
      const int i = static_cast<int>(c) / cols;
      const int j = static_cast<int>(c) % cols;
      SimulationConfig cfg = base;
      cfg.p1 = grid[c].p1;
      cfg.p2 = grid[c].p2;
      try {
        grid[c].trials[rep] = RunTrial(cfg, ChildSeed(base.seed, i, j, rep));
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = total;
      }
    }
  };
  int threads = base.threads > 0
                    ? base.threads
                    : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, static_cast<int>(std::max<std::size_t>(
                                       total, 1)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  for (GridCell& cell : grid) {
    double fdp = 0.0;
    double td = 0.0;
    for (const TrialMetrics& m : cell.trials) {
      fdp += m.fdp;
      td += m.true_discoveries;
    }
    cell.mean_fdp = fdp / base.reps;
    cell.mean_true_discoveries = td / base.reps;
  }
  return grid;
}

void WriteGridCsv(const std::vector<GridCell>& grid,
                  const SimulationConfig& base, std::ostream& out) {
  out << "p1,p2,mean_fdp,mean_true_discoveries,reps,engine,q\n";
  for (const GridCell& cell : grid) {
    out << internal::FormatDouble(cell.p1) << ','
        << internal::FormatDouble(cell.p2) << ','
        << internal::FormatDouble(cell.mean_fdp) << ','
        << internal::FormatDouble(cell.mean_true_discoveries) << ','
        << base.reps << ',' << EngineName(base.detection.engine) << ','
        << internal::FormatDouble(base.detection.q) << '\n';
  }
}

}  // namespace posbias
