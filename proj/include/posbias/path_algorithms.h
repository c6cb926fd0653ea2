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

// Solution paths of the sparse-bias model: Linearized Bregman Iteration,
// the exact Inverse Scale Space path, and the LASSO path, all computed from
// Gram quantities of the design.

#ifndef POSBIAS_PATH_ALGORITHMS_H_
#define POSBIAS_PATH_ALGORITHMS_H_

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "posbias/comparison_data.h"
#include "posbias/linear_solvers.h"

namespace posbias {

struct PathConfig {
  // LBI damping factor and step. `dt` defaults to 1 / (2 kappa |X|^2), where
  // X = [grad, design]; a user value must satisfy kappa dt |X|^2 < 2.
  double kappa = 256.0;
  std::optional<double> dt;
  // LBI stops once k dt > t_max. Default: 100 / |c|_inf, i.e. a hundred
  // times the first entering time of the inverse scale space path.
  std::optional<double> t_max;
  int record_stride = 1000;
  // Stop as soon as this many coordinates have entered (0: no limit).
  int max_entered = 0;
  // LBI also stops once every coordinate has entered. Disable to follow the
  // estimates up to t_max.
  bool stop_when_all_entered = true;

  // LASSO: explicit decreasing grid, or `lambda_count` log-spaced points
  // from lambda_max down to lambda_min_ratio * lambda_max.
  std::vector<double> lambda_grid;
  int lambda_count = 100;
  double lambda_min_ratio = 1e-3;
  int bisection_steps = 40;
  double lasso_tol = 1e-12;

  // Exact ISS: cap on the number of knots (0: 50 * #coordinates + 100).
  int max_knots = 0;
};

enum class PathParam { kTime, kLambda };

struct PathKnot {
  double param = 0.0;
  Eigen::VectorXd gamma;
  Eigen::VectorXd theta;
  // Dual variable: the subgradient p of |gamma|_1 for exact ISS, the
  // accumulator w (gamma = kappa * shrink(w)) for LBI, empty for LASSO.
  Eigen::VectorXd dual;
};

struct SolutionPath {
  PathParam kind = PathParam::kTime;
  // Sorted by increasing t, or by decreasing lambda.
  std::vector<PathKnot> knots;
  // First entering time t (or last nonzero lambda) per coordinate.
  std::vector<std::optional<double>> entering;
};

// Gram form of a design [grad, X] with response Y. Every path engine reads
// only these cross products. `grad` may be absent (no score block), as in
// the reduced model.
struct PathProblem {
  Eigen::MatrixXd gram;     // X^T X
  Eigen::VectorXd xty;      // X^T Y
  Eigen::MatrixXd grad_x;   // grad^T X   (|V| x P), empty without scores
  Eigen::VectorXd grad_y;   // grad^T Y
  std::optional<LaplacianSystem> scores;  // grad^T grad
  double y_norm = 0.0;

  int num_coords() const { return static_cast<int>(xty.size()); }
  int num_scores() const { return scores ? scores->dim() : 0; }
};

PathProblem MakePathProblem(const SparseMatrix& grad,
                            const Eigen::MatrixXd& design,
                            const Eigen::VectorXd& y);
// Plain regression y = X gamma + e without a score block.
PathProblem MakePathProblem(const Eigen::MatrixXd& design,
                            const Eigen::VectorXd& y);

// The problem with theta profiled out:
//   gram = X^T (I - H) X,  xty = X^T (I - H) Y.
struct ProfiledProblem {
  Eigen::MatrixXd gram;
  Eigen::VectorXd xty;
};
ProfiledProblem Profile(const PathProblem& problem);

// Least-squares score given gamma: (grad^T grad)^+ grad^T (Y - X gamma).
Eigen::VectorXd RecoverScore(const PathProblem& problem,
                             const Eigen::VectorXd& gamma);

// Largest eigenvalue of [grad, X]^T [grad, X] (upper estimate).
double DesignNormSquared(const PathProblem& problem);

// Resolved LBI step: the configured dt, or the default stability choice.
double LbiStep(const PathProblem& problem, const PathConfig& config);

SolutionPath LbiPath(const PathProblem& problem, const PathConfig& config);
SolutionPath IssPathExact(const PathProblem& problem,
                          const PathConfig& config);
SolutionPath LassoPath(const PathProblem& problem, const PathConfig& config);

enum class PathEngine { kLbi, kIssExact, kLasso };

std::string_view EngineName(PathEngine engine);
// Accepts "lbi", "iss", "iss_exact", "lasso".
PathEngine ParseEngine(std::string_view name);

SolutionPath ComputePath(PathEngine engine, const PathProblem& problem,
                         const PathConfig& config);

// Z_j: 1/t for time paths, lambda for lambda paths, 0 if never entered.
Eigen::VectorXd EnteringTimes(const SolutionPath& path);

// Log-spaced decreasing grid from lambda_max to min_ratio * lambda_max.
std::vector<double> LogLambdaGrid(double lambda_max, int count,
                                  double min_ratio);

// Minimizes 0.5 g^T G g - c^T g + lambda |g|_1 by cyclic coordinate descent
// starting at `gamma`.
void SolveLassoProfiled(const ProfiledProblem& problem, double lambda,
                        double tol, Eigen::VectorXd& gamma);

// CSV `param,coord,value`, one row per knot and coordinate.
void WritePathCsv(const SolutionPath& path, std::ostream& out);

}  // namespace posbias

#endif  // POSBIAS_PATH_ALGORITHMS_H_
