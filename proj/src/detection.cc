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

#include "posbias/detection.h"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <string>

#include <Eigen/QR>

#include "format.h"
#include "posbias/errors.h"
#include "posbias/linear_solvers.h"

namespace posbias {

using internal::FormatDouble;

std::string_view ClassName(AnnotatorClass c) {
  switch (c) {
    case AnnotatorClass::kGood:
      return "good";
    case AnnotatorClass::kBad:
      return "bad";
    case AnnotatorClass::kUgly:
      return "ugly";
  }
  return "good";
}

Estimate Reestimate(const DesignOperators& ops, const Eigen::VectorXd& y,
                    const std::vector<int>& support) {
  const LaplacianSystem sys = LaplacianSystem::FromGrad(ops.grad);
  const Eigen::Index k = static_cast<Eigen::Index>(support.size());
  Estimate est;
  est.gamma = Eigen::VectorXd::Zero(ops.num_annotators());
  Eigen::VectorXd residual = y;
  if (k > 0) {
    Eigen::MatrixXd cols(ops.num_edges(), k);
    for (Eigen::Index i = 0; i < k; ++i) {
      const int j = support[i];
      if (j < 0 || j >= ops.num_annotators()) {
        throw ConfigError("support index out of range");
      }
      cols.col(i) = Eigen::VectorXd(ops.annot.col(j));
    }
    const Eigen::MatrixXd resid_cols = ProjectOffGradient(sys, ops.grad, cols);
    Eigen::MatrixXd gram = cols.transpose() * resid_cols;
    gram = 0.5 * (gram + gram.transpose()).eval();
    const Eigen::VectorXd rhs = resid_cols.transpose() * y;
    const Eigen::VectorXd sub =
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(gram).solve(rhs);
    for (Eigen::Index i = 0; i < k; ++i) est.gamma[support[i]] = sub[i];
    residual.noalias() -= cols * sub;
  }
  est.theta = sys.Solve(Eigen::VectorXd(ops.grad.transpose() * residual));
  return est;
}

Estimate Reestimate(const ComparisonDataset& dataset,
                    const std::vector<int>& support) {
  return Reestimate(BuildOperators(dataset), dataset.Responses(), support);
}

std::vector<AnnotatorClass> ClassifyAnnotators(
    int num_annotators, const std::vector<int>& selected,
    const std::optional<std::vector<ClickCounts>>& counts) {
  std::vector<AnnotatorClass> classes(num_annotators, AnnotatorClass::kGood);
  for (int j : selected) {
    AnnotatorClass c = AnnotatorClass::kUgly;
    if (counts) {
      const ClickCounts& n = (*counts)[j];
      if (n.left == 0 || n.right == 0) c = AnnotatorClass::kBad;
    }
    classes[j] = c;
  }
  return classes;
}

double MatchRatio(const ComparisonDataset& dataset, int annotator,
                  const Eigen::VectorXd& theta) {
  if (annotator < 0 || annotator >= dataset.num_annotators()) {
    throw ConfigError("unknown annotator index " + std::to_string(annotator));
  }
  int total = 0;
  int agree = 0;
  for (int k = 0; k < dataset.num_edges(); ++k) {
    if (dataset.annotator_index(k) != annotator) continue;
    ++total;
    const double diff =
        theta[dataset.left_index(k)] - theta[dataset.right_index(k)];
    const double response = dataset.records()[k].response;
    if ((diff > 0.0 && response > 0.0) || (diff < 0.0 && response < 0.0)) {
      ++agree;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(agree) / total;
}

double MatchRatio(const ComparisonDataset& dataset,
                  std::string_view annotator, const Eigen::VectorXd& theta) {
  const std::optional<int> index = dataset.annotators().Find(annotator);
  if (!index) {
    throw ConfigError("unknown annotator '" + std::string(annotator) + "'");
  }
  return MatchRatio(dataset, *index, theta);
}

std::vector<int> RankPositions(const Eigen::VectorXd& theta) {
  std::vector<int> order(theta.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return theta[a] > theta[b]; });
  std::vector<int> rank(theta.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    rank[order[r]] = static_cast<int>(r) + 1;
  }
  return rank;
}

DetectionReport Detect(const ComparisonDataset& dataset,
                       const DetectionConfig& config) {
  if (!(config.q >= 0.0 && config.q <= 1.0)) {
    throw ConfigError("q must lie in [0, 1]");
  }
  const DesignOperators ops = BuildOperators(dataset);
  const Eigen::VectorXd y = dataset.Responses();

  KnockoffOptions options;
  options.mode = config.s_mode;
  options.normalize = config.normalize;
  options.seed = config.seed;
  const KnockoffFeatures features = ConstructKnockoffs(ops, options);
  const PathProblem problem = KnockoffPathProblem(ops, features, y);

  DetectionReport report;
  report.config = config;
  report.stats = PathKnockoffStatistics(problem, config.engine, config.path);
  report.selection =
      KnockoffThreshold(report.stats.w, config.q, config.plus);

  const Estimate original = Reestimate(ops, y, {});
  const Estimate corrected = Reestimate(ops, y, report.selection.selected);
  report.theta_original = original.theta;
  report.theta_hat = corrected.theta;
  report.gamma_hat = corrected.gamma;

  if (dataset.IsDichotomous()) report.counts = LeftRightCounts(dataset);
  report.classes = ClassifyAnnotators(dataset.num_annotators(),
                                      report.selection.selected, report.counts);
  report.match_ratio.resize(dataset.num_annotators());
  for (int j = 0; j < dataset.num_annotators(); ++j) {
    report.match_ratio[j] = MatchRatio(dataset, j, report.theta_original);
  }
  return report;
}

void WriteItemsCsv(const ComparisonDataset& dataset,
                   const DetectionReport& report, std::ostream& out) {
  const std::vector<int> rank_original = RankPositions(report.theta_original);
  const std::vector<int> rank_corrected = RankPositions(report.theta_hat);
  out << "id,theta_original,rank_original,theta_corrected,rank_corrected\n";
  for (int i = 0; i < dataset.num_items(); ++i) {
    out << dataset.items().Name(i) << ','
        << FormatDouble(report.theta_original[i]) << ',' << rank_original[i]
        << ',' << FormatDouble(report.theta_hat[i]) << ',' << rank_corrected[i]
        << '\n';
  }
}

void WriteReport(const ComparisonDataset& dataset,
                 const DetectionReport& report, std::ostream& out) {
  const DetectionConfig& cfg = report.config;
  out << "engine = " << EngineName(cfg.engine) << '\n'
      << "q = " << FormatDouble(cfg.q) << '\n'
      << "plus = " << (cfg.plus ? "true" : "false") << '\n'
      << "s_mode = " << SModeName(cfg.s_mode) << '\n'
      << "normalize = " << (cfg.normalize ? "true" : "false") << '\n'
      << "seed = " << cfg.seed << '\n'
      << "num_items = " << dataset.num_items() << '\n'
      << "num_annotators = " << dataset.num_annotators() << '\n'
      << "num_records = " << dataset.num_edges() << '\n'
      << "threshold = " << FormatDouble(report.selection.threshold) << '\n'
      << "num_selected = " << report.selection.selected.size() << '\n';

  std::vector<char> chosen(dataset.num_annotators(), 0);
  for (int j : report.selection.selected) chosen[j] = 1;
  out << "\n[annotators]\n"
      << "id,left,right,z,z_tilde,w,selected,class,gamma_hat,match_ratio\n";
  for (int j = 0; j < dataset.num_annotators(); ++j) {
    out << dataset.annotators().Name(j) << ',';
    if (report.counts) {
      out << (*report.counts)[j].left << ',' << (*report.counts)[j].right;
    } else {
      out << ',';
    }
    out << ',' << FormatDouble(report.stats.z[j]) << ','
        << FormatDouble(report.stats.z_tilde[j]) << ','
        << FormatDouble(report.stats.w[j]) << ',' << int(chosen[j]) << ','
        << ClassName(report.classes[j]) << ','
        << FormatDouble(report.gamma_hat[j]) << ','
        << FormatDouble(report.match_ratio[j]) << '\n';
  }
  out << "\n[items]\n";
  WriteItemsCsv(dataset, report, out);
}

}  // namespace posbias
