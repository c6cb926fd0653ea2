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

// Synthetic crowdsourced comparisons with planted position-biased
// annotators, and the Monte-Carlo harness that measures FDP and power.

#ifndef POSBIAS_SIMULATION_H_
#define POSBIAS_SIMULATION_H_

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "posbias/comparison_data.h"
#include "posbias/detection.h"

namespace posbias {

enum class BiasSide {
  kLeft,    // biased annotators click left when the bias fires
  kRandom,  // each biased annotator draws a fixed side once
};

struct SimulationConfig {
  int n_items = 16;
  int n_good = 100;
  int n_biased = 50;
  double p1 = 0.1;  // error rate of every annotator outside bias events
  double p2 = 0.5;  // bias activation rate of biased annotators
  int reps = 20;
  BiasSide bias_side = BiasSide::kLeft;
  // Worker threads for RunGrid (0: hardware concurrency).
  int threads = 0;
  DetectionConfig detection;
  std::uint64_t seed = 0;

  // Throws ConfigError when a field is out of range.
  void Validate() const;
};

struct SimulatedData {
  ComparisonDataset dataset;
  std::vector<int> truth;        // biased annotator indices, ascending
  std::vector<int> item_order;   // item indices, best first
};

// Annotators are named a1.. (good ones first), items item1..; every
// annotator judges every unordered pair once with a uniform left/right
// placement.
SimulatedData Generate(const SimulationConfig& config, std::uint64_t seed);

struct TrialMetrics {
  double fdp = 0.0;
  int true_discoveries = 0;
  int selected_size = 0;

  friend bool operator==(const TrialMetrics&, const TrialMetrics&) = default;
};

// Scores a selection against the planted support.
TrialMetrics ScoreSelection(const std::vector<int>& selected,
                            const std::vector<int>& truth);

TrialMetrics RunTrial(const SimulationConfig& config, std::uint64_t seed);

// Seed of replicate `rep` in grid cell (i, j).
std::uint64_t ChildSeed(std::uint64_t seed, int i, int j, int rep);

struct GridCell {
  double p1 = 0.0;
  double p2 = 0.0;
  double mean_fdp = 0.0;
  double mean_true_discoveries = 0.0;
  std::vector<TrialMetrics> trials;
};

// Cells in row-major (p1, p2) order. Trials run on a thread pool and are
// merged by index.
std::vector<GridCell> RunGrid(const std::vector<double>& p1_list,
                              const std::vector<double>& p2_list,
                              const SimulationConfig& base);

// CSV `p1,p2,mean_fdp,mean_true_discoveries,reps,engine,q`.
void WriteGridCsv(const std::vector<GridCell>& grid,
                  const SimulationConfig& base, std::ostream& out);

}  // namespace posbias

#endif  // POSBIAS_SIMULATION_H_
