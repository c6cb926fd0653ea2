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

#include "posbias/knockoff.h"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "format.h"
#include "posbias/errors.h"
#include "posbias/linear_solvers.h"

namespace posbias {
namespace {

constexpr int kSdpSweeps = 200;

void RequireDesignSize(const DesignOperators& ops) {
  const int e = ops.num_edges();
  const int u = ops.num_annotators();
  const int v = ops.num_items();
  if (e < 2 * u + v) {
    std::ostringstream msg;
    msg << "knockoff construction requires |E| >= 2|U| + |V|, but |E| = " << e
        << " < 2*" << u << " + " << v << " = " << 2 * u + v;
    throw DimensionError(msg.str());
  }
}

Eigen::VectorXd SdpCoordinateAscent(const Eigen::MatrixXd& sigma,
                                    const Eigen::VectorXd& equi) {
  const Eigen::Index p = sigma.rows();
  // Start strictly inside the feasible set so that 2 sigma - diag(s) stays
  // invertible and its inverse can be carried by rank-one updates.
  Eigen::VectorXd s = 0.999 * equi;
  Eigen::MatrixXd slack = 2.0 * sigma;
  slack.diagonal() -= s;
  Eigen::LLT<Eigen::MatrixXd> llt(slack);
  if (llt.info() != Eigen::Success) return equi;
  Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(p, p));

  for (int sweep = 0; sweep < kSdpSweeps; ++sweep) {
    double gained = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double inv_jj = inv(j, j);
      if (!(inv_jj > 0.0)) continue;
      // s_j may grow by up to 1 / inv_jj before 2 sigma - diag(s) becomes
      // singular; move halfway to keep a margin for the other coordinates.
      const double delta = std::min(1.0 - s[j], 0.5 / inv_jj);
      if (delta <= 0.0) continue;
      const Eigen::VectorXd col = inv.col(j);
      inv += (delta / (1.0 - delta * inv_jj)) * col * col.transpose();
      s[j] += delta;
      gained += delta;
    }
    if (gained <= 1e-10 * std::max(1.0, s.sum())) break;
  }
  return s;
}

double MinEigenvalue(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

}  // namespace

std::string_view SModeName(SMode mode) {
  return mode == SMode::kSdp ? "sdp" : "equicorrelated";
}

SMode ParseSMode(std::string_view name) {
  if (name == "equicorrelated" || name == "equi") return SMode::kEquicorrelated;
  if (name == "sdp") return SMode::kSdp;
  throw ConfigError("unknown s mode '" + std::string(name) + "'");
}

Eigen::MatrixXd ResidualAnnotatorGram(const DesignOperators& ops) {
  const LaplacianSystem sys = LaplacianSystem::FromGrad(ops.grad);
  const Eigen::MatrixXd cross = ops.grad.transpose() * ops.annot;
  const Eigen::MatrixXd solved = sys.Solve(cross);
  Eigen::MatrixXd sigma = Eigen::MatrixXd(ops.annot.transpose() * ops.annot);
  sigma.noalias() -= cross.transpose() * solved;
  return 0.5 * (sigma + sigma.transpose());
}

Eigen::VectorXd ComputeS(const Eigen::MatrixXd& sigma, SMode mode) {
  const Eigen::Index p = sigma.rows();
  if (p == 0) return Eigen::VectorXd(0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma,
                                                     Eigen::EigenvaluesOnly);
  const double lambda_min = eig.eigenvalues().minCoeff();
  const double lambda_max = eig.eigenvalues().maxCoeff();
  if (lambda_min <= 1e-12 * std::max(1.0, lambda_max)) {
    std::ostringstream msg;
    msg << "A^T (I - H) A is singular (minimum eigenvalue " << lambda_min
        << "): some annotator column lies in the span of the score "
           "differences, knockoffs are degenerate";
    throw NumericalError(msg.str());
  }
  const Eigen::VectorXd equi =
      Eigen::VectorXd::Constant(p, std::min(1.0, 2.0 * lambda_min));
  if (mode == SMode::kEquicorrelated) return equi;

  Eigen::VectorXd s = SdpCoordinateAscent(sigma, equi);
  Eigen::MatrixXd slack = 2.0 * sigma;
  slack.diagonal() -= s;
  const bool feasible = MinEigenvalue(slack) >= -1e-10 * lambda_max &&
                        s.minCoeff() >= 0.0 && s.maxCoeff() <= 1.0;
  if (!feasible || s.sum() < equi.sum()) return equi;
  return s;
}

KnockoffFeatures ConstructKnockoffs(const DesignOperators& ops,
                                    const KnockoffOptions& options) {
  RequireDesignSize(ops);
  const int u = ops.num_annotators();
  const LaplacianSystem sys = LaplacianSystem::FromGrad(ops.grad);
  const Eigen::MatrixXd annot = ops.annot;
  const Eigen::MatrixXd resid_annot = ProjectOffGradient(sys, ops.grad, annot);

  KnockoffFeatures ko;
  ko.mode = options.mode;
  ko.sigma = annot.transpose() * resid_annot;
  ko.sigma = 0.5 * (ko.sigma + ko.sigma.transpose()).eval();

  ko.column_scale = Eigen::VectorXd::Ones(u);
  if (options.normalize) {
    ko.column_scale = ko.sigma.diagonal().cwiseSqrt();
    const Eigen::VectorXd inv_scale = ko.column_scale.cwiseInverse();
    const Eigen::MatrixXd unit =
        inv_scale.asDiagonal() * ko.sigma * inv_scale.asDiagonal();
    ko.s = ComputeS(unit, options.mode).cwiseProduct(
        ko.column_scale.cwiseAbs2());
  } else {
    ko.s = ComputeS(ko.sigma, options.mode);
  }

  Eigen::LLT<Eigen::MatrixXd> sigma_llt(ko.sigma);
  if (sigma_llt.info() != Eigen::Success) {
    throw NumericalError("A^T (I - H) A is not positive definite");
  }
  const Eigen::MatrixXd sigma_inv_s =
      sigma_llt.solve(Eigen::MatrixXd(ko.s.asDiagonal()));
  Eigen::MatrixXd c_gram = -(ko.s.asDiagonal() * sigma_inv_s);
  c_gram.diagonal() += 2.0 * ko.s;
  c_gram = 0.5 * (c_gram + c_gram.transpose()).eval();
  ko.c_factor = PsdSquareRoot(c_gram);

  ko.q_basis = ComplementBasis(ops.grad, ops.annot, u, options.seed);

  ko.a_tilde = annot;
  ko.a_tilde.noalias() -= resid_annot * sigma_inv_s;
  ko.a_tilde.noalias() += ko.q_basis * ko.c_factor;

  const GramConditionErrors errors = CheckGramConditions(ops, ko);
  const double scale =
      std::max(1.0, ko.sigma.diagonal().cwiseAbs().maxCoeff());
  if (errors.max() > 1e-6 * scale) {
    std::ostringstream msg;
    msg << "knockoff Gram conditions violated: " << errors.tilde_gram << ", "
        << errors.cross << ", " << errors.grad;
    throw NumericalError(msg.str());
  }
  return ko;
}

GramConditionErrors CheckGramConditions(const DesignOperators& ops,
                                        const KnockoffFeatures& features) {
  const Eigen::MatrixXd annot = ops.annot;
  const Eigen::MatrixXd ata = annot.transpose() * annot;
  const Eigen::MatrixXd& tilde = features.a_tilde;
  GramConditionErrors errors;
  errors.tilde_gram = (tilde.transpose() * tilde - ata).cwiseAbs().maxCoeff();
  Eigen::MatrixXd cross_target = ata;
  cross_target.diagonal() -= features.s;
  errors.cross =
      (annot.transpose() * tilde - cross_target).cwiseAbs().maxCoeff();
  errors.grad = Eigen::MatrixXd(ops.grad.transpose() * (tilde - annot))
                    .cwiseAbs()
                    .maxCoeff();
  return errors;
}

Eigen::MatrixXd ExtendedDesign(const DesignOperators& ops,
                               const KnockoffFeatures& features) {
  const int u = ops.num_annotators();
  Eigen::MatrixXd design(ops.num_edges(), 2 * u);
  design.leftCols(u) = Eigen::MatrixXd(ops.annot);
  design.rightCols(u) = features.a_tilde;
  return design;
}

KnockoffStats KnockoffStatistics(const Eigen::VectorXd& z,
                                 const Eigen::VectorXd& z_tilde) {
  if (z.size() != z_tilde.size()) {
    throw ConfigError("z and z_tilde must have equal lengths");
  }
  KnockoffStats stats{z, z_tilde, Eigen::VectorXd(z.size())};
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    const double diff = z[j] - z_tilde[j];
    const double sign = (diff > 0.0) - (diff < 0.0);
    stats.w[j] = sign == 0.0 ? 0.0 : std::max(z[j], z_tilde[j]) * sign;
  }
  return stats;
}

SelectionResult KnockoffThreshold(const Eigen::VectorXd& w, double q,
                                  bool plus) {
  if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("q must lie in [0, 1]");
  SelectionResult result;
  result.q = q;
  result.plus = plus;
  std::vector<double> candidates;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    if (w[j] != 0.0) candidates.push_back(std::abs(w[j]));
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()),
                   candidates.end());
  const double offset = plus ? 1.0 : 0.0;
  for (double t : candidates) {
    int negatives = 0;
    int positives = 0;
    for (Eigen::Index j = 0; j < w.size(); ++j) {
      if (w[j] <= -t) ++negatives;
      if (w[j] >= t) ++positives;
    }
    if (positives == 0) continue;
    if ((offset + negatives) / positives <= q) {
      result.threshold = t;
      break;
    }
  }
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    if (w[j] >= result.threshold) result.selected.push_back(static_cast<int>(j));
  }
  return result;
}

ReducedModel BuildReducedModel(const DesignOperators& ops,
                               const Eigen::VectorXd& y) {
  const Eigen::MatrixXd grad = ops.grad;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(grad, Eigen::ComputeFullU);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double cutoff =
      1e-10 * std::max(1.0, sv.size() > 0 ? sv.maxCoeff() : 0.0);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv[i] > cutoff) ++rank;
  }
  ReducedModel model;
  model.basis = svd.matrixU().rightCols(grad.rows() - rank);
  model.x = model.basis.transpose() * Eigen::MatrixXd(ops.annot);
  model.y = model.basis.transpose() * y;
  return model;
}

PathProblem KnockoffPathProblem(const DesignOperators& ops,
                                const KnockoffFeatures& features,
                                const Eigen::VectorXd& y) {
  return MakePathProblem(ops.grad, ExtendedDesign(ops, features), y);
}

KnockoffStats PathKnockoffStatistics(const PathProblem& problem,
                                     PathEngine engine,
                                     const PathConfig& config) {
  const int u = problem.num_coords() / 2;
  const Eigen::VectorXd z = EnteringTimes(ComputePath(engine, problem, config));
  return KnockoffStatistics(z.head(u), z.tail(u));
}

EquivalenceReport EquivalenceCheck(const DesignOperators& ops,
                                   const Eigen::VectorXd& y,
                                   PathEngine engine,
                                   const KnockoffOptions& options,
                                   const PathConfig& config,
                                   double tolerance) {
  if (engine == PathEngine::kLbi) {
    throw ConfigError(
        "equivalence holds for the exact ISS and LASSO paths, not LBI");
  }
  const KnockoffFeatures ko = ConstructKnockoffs(ops, options);
  const PathProblem full = KnockoffPathProblem(ops, ko, y);

  const ReducedModel reduced = BuildReducedModel(ops, y);
  const int u = ops.num_annotators();
  Eigen::MatrixXd reduced_design(reduced.x.rows(), 2 * u);
  reduced_design.leftCols(u) = reduced.x;
  reduced_design.rightCols(u) = reduced.basis.transpose() * ko.a_tilde;
  const PathProblem plain = MakePathProblem(reduced_design, reduced.y);

  PathConfig shared = config;
  if (engine == PathEngine::kLasso && shared.lambda_grid.empty()) {
    const double lambda_max = Profile(full).xty.cwiseAbs().maxCoeff();
    if (lambda_max > 0.0) {
      shared.lambda_grid = LogLambdaGrid(lambda_max, shared.lambda_count,
                                         shared.lambda_min_ratio);
    }
  }

  EquivalenceReport report;
  report.w_full = PathKnockoffStatistics(full, engine, shared).w;
  report.w_reduced = PathKnockoffStatistics(plain, engine, shared).w;
  report.max_diff =
      u > 0 ? (report.w_full - report.w_reduced).cwiseAbs().maxCoeff() : 0.0;
  report.pass = report.max_diff <= tolerance;
  return report;
}

void WriteKnockoffCsv(const Registry& annotators, const KnockoffStats& stats,
                      const SelectionResult& selection, std::ostream& out) {
  std::vector<char> chosen(stats.w.size(), 0);
  for (int j : selection.selected) chosen[j] = 1;
  out << "annotator,z,z_tilde,w,selected\n";
  for (Eigen::Index j = 0; j < stats.w.size(); ++j) {
    out << annotators.Name(static_cast<int>(j)) << ','
        << internal::FormatDouble(stats.z[j]) << ','
        << internal::FormatDouble(stats.z_tilde[j]) << ','
        << internal::FormatDouble(stats.w[j]) << ',' << int(chosen[j]) << '\n';
  }
}

}  // namespace posbias
