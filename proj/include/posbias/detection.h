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

// End-to-end detection of position-biased annotators: knockoff paths on the
// extended design, selection at a target FDR, least-squares re-estimation,
// and the good/bad/ugly classification.

#ifndef POSBIAS_DETECTION_H_
#define POSBIAS_DETECTION_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "posbias/comparison_data.h"
#include "posbias/knockoff.h"
#include "posbias/path_algorithms.h"

namespace posbias {

struct DetectionConfig {
  double q = 0.1;
  bool plus = false;
  PathEngine engine = PathEngine::kIssExact;
  SMode s_mode = SMode::kEquicorrelated;
  bool normalize = true;
  PathConfig path;
  std::uint64_t seed = 0;
};

enum class AnnotatorClass { kGood, kBad, kUgly };

std::string_view ClassName(AnnotatorClass c);

struct Estimate {
  Eigen::VectorXd theta;  // |V|, mean zero on every component
  Eigen::VectorXd gamma;  // |U|, zero off the support
};

struct DetectionReport {
  KnockoffStats stats;
  SelectionResult selection;
  Eigen::VectorXd theta_original;  // fit with no annotator removed
  Eigen::VectorXd theta_hat;
  Eigen::VectorXd gamma_hat;
  std::vector<AnnotatorClass> classes;
  // Present for dichotomous data only.
  std::optional<std::vector<ClickCounts>> counts;
  std::vector<double> match_ratio;  // against theta_original
  DetectionConfig config;
};

DetectionReport Detect(const ComparisonDataset& dataset,
                       const DetectionConfig& config);

// Joint least squares of y on [grad, annot restricted to `support`],
// minimum-norm in gamma when the support columns are dependent.
Estimate Reestimate(const DesignOperators& ops, const Eigen::VectorXd& y,
                    const std::vector<int>& support);
Estimate Reestimate(const ComparisonDataset& dataset,
                    const std::vector<int>& support);

// good: not selected. bad: selected with one side never clicked.
// ugly: selected otherwise. Without counts every selected annotator is ugly.
std::vector<AnnotatorClass> ClassifyAnnotators(
    int num_annotators, const std::vector<int>& selected,
    const std::optional<std::vector<ClickCounts>>& counts);

// Fraction of the annotator's records whose response sign equals
// sign(theta_left - theta_right). Ties in theta count as disagreement.
double MatchRatio(const ComparisonDataset& dataset, int annotator,
                  const Eigen::VectorXd& theta);
double MatchRatio(const ComparisonDataset& dataset,
                  std::string_view annotator, const Eigen::VectorXd& theta);

// 1-based rank by decreasing score; ties go to the lower index.
std::vector<int> RankPositions(const Eigen::VectorXd& theta);

// Key-value header followed by [annotators] and [items] CSV sections.
void WriteReport(const ComparisonDataset& dataset,
                 const DetectionReport& report, std::ostream& out);

// CSV `id,theta_original,rank_original,theta_corrected,rank_corrected`.
void WriteItemsCsv(const ComparisonDataset& dataset,
                   const DetectionReport& report, std::ostream& out);

}  // namespace posbias

#endif  // POSBIAS_DETECTION_H_
