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

// Knockoff features for the annotator columns of the position-bias model,
// knockoff statistics and thresholds, and the theta-free reduced model used
// as an equivalence oracle.

#ifndef POSBIAS_KNOCKOFF_H_
#define POSBIAS_KNOCKOFF_H_

#include <algorithm>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "posbias/comparison_data.h"
#include "posbias/path_algorithms.h"

namespace posbias {

enum class SMode { kEquicorrelated, kSdp };

std::string_view SModeName(SMode mode);
SMode ParseSMode(std::string_view name);

struct KnockoffOptions {
  SMode mode = SMode::kEquicorrelated;
  // Compute s on the unit-diagonal version of Sigma = A^T (I - H) A and
  // map it back (s_j = d_j^2 s'_j with d_j = |(I - H) A_j|). With `false`
  // s is computed on the raw Sigma and capped at 1.
  bool normalize = true;
  std::uint64_t seed = 0;
};

// Knockoff matrix with
//   Ã^T Ã = A^T A,  A^T Ã = A^T A - diag(s),  grad^T Ã = grad^T A.
struct KnockoffFeatures {
  Eigen::MatrixXd a_tilde;   // |E| x |U|
  Eigen::VectorXd s;         // in the units of A^T A
  Eigen::MatrixXd q_basis;   // |E| x |U|, orthogonal to grad and A
  Eigen::MatrixXd c_factor;  // |U| x |U|, C^T C = 2 diag(s) - diag(s) Sigma^-1 diag(s)
  Eigen::MatrixXd sigma;     // A^T (I - H) A
  Eigen::VectorXd column_scale;  // d_j (all ones when not normalized)
  SMode mode = SMode::kEquicorrelated;
};

// Sigma = A^T (I - H) A, with H applied through Laplacian solves.
Eigen::MatrixXd ResidualAnnotatorGram(const DesignOperators& ops);

// Maximizes sum(s) subject to 0 <= s_j <= 1 and diag(s) <= 2 sigma.
// Equicorrelated: s_j = min(1, 2 lambda_min(sigma)). Sdp: coordinate ascent
// from the equicorrelated point, at most 200 sweeps.
Eigen::VectorXd ComputeS(const Eigen::MatrixXd& sigma, SMode mode);

KnockoffFeatures ConstructKnockoffs(const DesignOperators& ops,
                                    const KnockoffOptions& options);

// Max absolute entrywise violations of the three Gram conditions.
struct GramConditionErrors {
  double tilde_gram = 0.0;
  double cross = 0.0;
  double grad = 0.0;
  double max() const { return std::max({tilde_gram, cross, grad}); }
};
GramConditionErrors CheckGramConditions(const DesignOperators& ops,
                                        const KnockoffFeatures& features);

// [A, Ã] as a dense |E| x 2|U| matrix.
Eigen::MatrixXd ExtendedDesign(const DesignOperators& ops,
                               const KnockoffFeatures& features);

struct KnockoffStats {
  Eigen::VectorXd z;
  Eigen::VectorXd z_tilde;
  Eigen::VectorXd w;
};

// w_j = max(z_j, z̃_j) * sign(z_j - z̃_j), with sign(0) = 0.
KnockoffStats KnockoffStatistics(const Eigen::VectorXd& z,
                                 const Eigen::VectorXd& z_tilde);

struct SelectionResult {
  double threshold = std::numeric_limits<double>::infinity();
  std::vector<int> selected;  // ascending
  double q = 0.0;
  bool plus = false;
};

// Smallest t among {|w_j| : w_j != 0} with
//   (offset + #{w_j <= -t}) / #{w_j >= t} <= q,
// offset 0 for knockoff and 1 for knockoff+. Selects {j : w_j >= t}.
SelectionResult KnockoffThreshold(const Eigen::VectorXd& w, double q,
                                  bool plus);

// y = U2^T Y and X = U2^T A with U2 an orthonormal basis of ker(grad^T).
struct ReducedModel {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  Eigen::MatrixXd basis;  // U2
};
ReducedModel BuildReducedModel(const DesignOperators& ops,
                               const Eigen::VectorXd& y);

// Extended-design path problem [grad, A, Ã] with response y.
PathProblem KnockoffPathProblem(const DesignOperators& ops,
                                const KnockoffFeatures& features,
                                const Eigen::VectorXd& y);

// Runs a path engine on the extended design and splits the entering times
// into (Z, Z̃).
KnockoffStats PathKnockoffStatistics(const PathProblem& problem,
                                     PathEngine engine,
                                     const PathConfig& config);

struct EquivalenceReport {
  Eigen::VectorXd w_full;
  Eigen::VectorXd w_reduced;
  double max_diff = 0.0;
  bool pass = false;
};

// Runs the full model (theta profiled through the Laplacian) and the
// reduced model (explicit U2 projection, X̃ = U2^T Ã) and compares W.
// Supports the exact ISS and LASSO engines; LASSO shares one lambda grid.
EquivalenceReport EquivalenceCheck(const DesignOperators& ops,
                                   const Eigen::VectorXd& y,
                                   PathEngine engine,
                                   const KnockoffOptions& options,
                                   const PathConfig& config = {},
                                   double tolerance = 1e-6);

// CSV `annotator,z,z_tilde,w,selected`.
void WriteKnockoffCsv(const Registry& annotators, const KnockoffStats& stats,
                      const SelectionResult& selection, std::ostream& out);

}  // namespace posbias

#endif  // POSBIAS_KNOCKOFF_H_
