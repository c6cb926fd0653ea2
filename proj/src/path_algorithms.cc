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

#include "posbias/path_algorithms.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "format.h"
#include "posbias/errors.h"

namespace posbias {
namespace {

double Shrink(double x) {
  if (x > 1.0) return x - 1.0;
  if (x < -1.0) return x + 1.0;
  return 0.0;
}

double SoftThreshold(double x, double lambda) {
  if (x > lambda) return x - lambda;
  if (x < -lambda) return x + lambda;
  return 0.0;
}

int Sign(double x) { return (x > 0.0) - (x < 0.0); }

Eigen::MatrixXd SymmetricGram(const Eigen::MatrixXd& design) {
  const Eigen::Index p = design.cols();
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(p, p);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(design.transpose());
  gram.triangularView<Eigen::StrictlyUpper>() =
      gram.triangularView<Eigen::StrictlyLower>().transpose();
  return gram;
}

PathKnot MakeKnot(const PathProblem& problem, double param,
                  const Eigen::VectorXd& gamma) {
  PathKnot knot;
  knot.param = param;
  knot.gamma = gamma;
  knot.theta = RecoverScore(problem, gamma);
  return knot;
}

}  // namespace

PathProblem MakePathProblem(const SparseMatrix& grad,
                            const Eigen::MatrixXd& design,
                            const Eigen::VectorXd& y) {
  if (grad.rows() != design.rows() || design.rows() != y.size()) {
    throw ConfigError("design, grad and response sizes disagree");
  }
  PathProblem problem;
  problem.gram = SymmetricGram(design);
  problem.xty = design.transpose() * y;
  problem.grad_x = grad.transpose() * design;
  problem.grad_y = grad.transpose() * y;
  problem.scores = LaplacianSystem::FromGrad(grad);
  problem.y_norm = y.norm();
  return problem;
}

PathProblem MakePathProblem(const Eigen::MatrixXd& design,
                            const Eigen::VectorXd& y) {
  if (design.rows() != y.size()) {
    throw ConfigError("design and response sizes disagree");
  }
  PathProblem problem;
  problem.gram = SymmetricGram(design);
  problem.xty = design.transpose() * y;
  problem.grad_x = Eigen::MatrixXd(0, design.cols());
  problem.grad_y = Eigen::VectorXd(0);
  problem.y_norm = y.norm();
  return problem;
}

ProfiledProblem Profile(const PathProblem& problem) {
  ProfiledProblem out{problem.gram, problem.xty};
  if (!problem.scores) return out;
  const Eigen::MatrixXd solved = problem.scores->Solve(problem.grad_x);
  out.gram.noalias() -= problem.grad_x.transpose() * solved;
  out.gram = 0.5 * (out.gram + out.gram.transpose()).eval();
  out.xty.noalias() -= solved.transpose() * problem.grad_y;
  return out;
}

Eigen::VectorXd RecoverScore(const PathProblem& problem,
                             const Eigen::VectorXd& gamma) {
  if (!problem.scores) return Eigen::VectorXd(0);
  return problem.scores->Solve(
      Eigen::VectorXd(problem.grad_y - problem.grad_x * gamma));
}

double DesignNormSquared(const PathProblem& problem) {
  const int v = problem.num_scores();
  const int p = problem.num_coords();
  Eigen::MatrixXd full(v + p, v + p);
  if (v > 0) {
    full.topLeftCorner(v, v) = Eigen::MatrixXd(problem.scores->laplacian());
    full.topRightCorner(v, p) = problem.grad_x;
    full.bottomLeftCorner(p, v) = problem.grad_x.transpose();
  }
  full.bottomRightCorner(p, p) = problem.gram;
  return SpectralNormUpperBound(full);
}

double LbiStep(const PathProblem& problem, const PathConfig& config) {
  if (!(config.kappa > 0.0)) throw ConfigError("kappa must be positive");
  const double norm2 = DesignNormSquared(problem);
  if (norm2 <= 0.0) return config.dt.value_or(1.0);
  if (config.dt) {
    if (!(*config.dt > 0.0)) throw ConfigError("dt must be positive");
    if (config.kappa * *config.dt * norm2 >= 2.0) {
      std::ostringstream msg;
      msg << "unstable LBI step: kappa * dt * |X|^2 = "
          << config.kappa * *config.dt * norm2 << " must be < 2";
      throw ConfigError(msg.str());
    }
    return *config.dt;
  }
  return 1.0 / (2.0 * config.kappa * norm2);
}

SolutionPath LbiPath(const PathProblem& problem, const PathConfig& config) {
  const int p = problem.num_coords();
  const double kappa = config.kappa;
  const double dt = LbiStep(problem, config);
  const bool has_scores = problem.scores.has_value();

  Eigen::VectorXd theta = RecoverScore(problem, Eigen::VectorXd::Zero(p));
  Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd grad_gamma(p);
  Eigen::VectorXd grad_theta(problem.num_scores());

  Eigen::VectorXd start_corr = problem.xty;
  if (has_scores) start_corr.noalias() -= problem.grad_x.transpose() * theta;
  const double max_corr = p > 0 ? start_corr.cwiseAbs().maxCoeff() : 0.0;
  double t_max = 0.0;
  if (config.t_max) {
    t_max = *config.t_max;
  } else if (max_corr > 0.0) {
    t_max = 100.0 / max_corr;
  }

  SolutionPath path;
  path.kind = PathParam::kTime;
  path.entering.assign(p, std::nullopt);
  auto record = [&](double t) {
    PathKnot knot;
    knot.param = t;
    knot.gamma = gamma;
    knot.theta = theta;
    knot.dual = w;
    path.knots.push_back(std::move(knot));
  };
  record(0.0);

  const double blowup = 1e8 * std::max(problem.y_norm, 1e-300);
  std::vector<int> signs(p, 0);
  std::vector<int> active;
  int entered = 0;
  long long k = 0;
  while (static_cast<double>(k) * dt <= t_max) {
    // Gradients at (theta^k, gamma^k) through the Gram blocks; identical to
    // A^T(Y - grad theta - A gamma) and grad^T(...).
    grad_gamma = problem.xty;
    if (has_scores) grad_gamma.noalias() -= problem.grad_x.transpose() * theta;
    for (int j : active) grad_gamma -= gamma[j] * problem.gram.col(j);
    if (has_scores) {
      grad_theta = problem.grad_y;
      grad_theta.noalias() -= problem.scores->laplacian() * theta;
      for (int j : active) grad_theta -= gamma[j] * problem.grad_x.col(j);
    }

    w += dt * grad_gamma;
    if (has_scores) theta += (kappa * dt) * grad_theta;
    ++k;
    const double t = static_cast<double>(k) * dt;

    bool pattern_changed = false;
    active.clear();
    for (int j = 0; j < p; ++j) {
      gamma[j] = kappa * Shrink(w[j]);
      const int s = Sign(gamma[j]);
      if (s != 0) active.push_back(j);
      if (s != signs[j]) {
        pattern_changed = true;
        signs[j] = s;
        if (s != 0 && !path.entering[j]) {
          // Entry happened somewhere inside the last step.
          path.entering[j] = (static_cast<double>(k) - 0.5) * dt;
          ++entered;
        }
      }
    }
    if (gamma.norm() > blowup) {
      throw NumericalError("LBI diverged; reduce kappa * dt");
    }
    const bool stride_hit =
        config.record_stride > 0 && k % config.record_stride == 0;
    if (pattern_changed || stride_hit) record(t);
    if (config.max_entered > 0 && entered >= config.max_entered) break;
    if (config.stop_when_all_entered && entered == p) break;
  }
  const double t_end = static_cast<double>(k) * dt;
  if (path.knots.back().param != t_end) record(t_end);
  return path;
}

SolutionPath IssPathExact(const PathProblem& problem,
                          const PathConfig& config) {
  const ProfiledProblem prof = Profile(problem);
  const int p = problem.num_coords();
  const Eigen::MatrixXd& sigma = prof.gram;
  const Eigen::VectorXd& corr = prof.xty;
  const double scale = p > 0 ? std::max(corr.cwiseAbs().maxCoeff(), 1e-300)
                             : 1.0;
  // Relative to the largest correlation, with an absolute floor at the
  // roundoff level of X^T (I - H) Y so a null signal yields no entries.
  const double col_norm =
      p > 0 ? std::sqrt(std::max(sigma.diagonal().maxCoeff(), 0.0)) : 0.0;
  const double r_tol = std::max(1e-10 * scale, 1e-8 * col_norm * problem.y_norm);
  const int max_knots = config.max_knots > 0 ? config.max_knots : 50 * p + 100;
  const double t_max = config.t_max.value_or(
      std::numeric_limits<double>::infinity());

  Eigen::VectorXd subgrad = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(p);
  std::vector<char> on_boundary(p, 0);

  SolutionPath path;
  path.kind = PathParam::kTime;
  path.entering.assign(p, std::nullopt);
  auto record = [&](double t) {
    PathKnot knot = MakeKnot(problem, t, gamma);
    knot.dual = subgrad;
    path.knots.push_back(std::move(knot));
  };
  record(0.0);

  double t = 0.0;
  int entered = 0;
  for (int knot_count = 0; knot_count < max_knots; ++knot_count) {
    const Eigen::VectorXd residual_corr = corr - sigma * gamma;

    // Next coordinate of the inactive set whose subgradient reaches +-1.
    double best = std::numeric_limits<double>::infinity();
    int hit = -1;
    for (int j = 0; j < p; ++j) {
      if (gamma[j] != 0.0) continue;
      const double r = residual_corr[j];
      if (std::abs(r) <= r_tol) continue;
      // Boundary coordinates pushing outward are held at zero by the sign
      // constrained fit.
      if (on_boundary[j] && subgrad[j] * r > 0.0) continue;
      const double target = r > 0.0 ? 1.0 : -1.0;
      const double delta = std::max(0.0, (target - subgrad[j]) / r);
      if (delta < best) {
        best = delta;
        hit = j;
      }
    }
    if (hit < 0 || t + best > t_max) break;
    t += best;

    for (int j = 0; j < p; ++j) {
      if (gamma[j] != 0.0) {
        subgrad[j] = gamma[j] > 0.0 ? 1.0 : -1.0;
      } else {
        subgrad[j] = std::clamp(subgrad[j] + best * residual_corr[j], -1.0,
                                1.0);
      }
    }
    subgrad[hit] = residual_corr[hit] > 0.0 ? 1.0 : -1.0;
    on_boundary[hit] = 1;
    for (int j = 0; j < p; ++j) {
      if (on_boundary[j] && gamma[j] == 0.0 && j != hit &&
          std::abs(subgrad[j]) < 1.0 - 1e-12) {
        on_boundary[j] = 0;
      }
    }

    // gamma on the boundary set solves the sign-constrained least squares
    //   min |Y - grad theta - X_B diag(p_B) u|^2, u >= 0.
    std::vector<int> bset;
    for (int j = 0; j < p; ++j) {
      if (on_boundary[j]) bset.push_back(j);
    }
    const int m = static_cast<int>(bset.size());
    Eigen::MatrixXd block(m, m);
    Eigen::VectorXd rhs(m);
    std::vector<int> warm;
    for (int a = 0; a < m; ++a) {
      const int ja = bset[a];
      rhs[a] = subgrad[ja] * corr[ja];
      for (int b = 0; b < m; ++b) {
        block(a, b) = subgrad[ja] * sigma(ja, bset[b]) * subgrad[bset[b]];
      }
      if (gamma[ja] != 0.0) warm.push_back(a);
    }
    const Eigen::VectorXd u = NnlsGram(block, rhs, warm);
    gamma.setZero();
    for (int a = 0; a < m; ++a) {
      if (u[a] > 0.0) gamma[bset[a]] = subgrad[bset[a]] * u[a];
    }
    for (int j = 0; j < p; ++j) {
      if (gamma[j] != 0.0 && !path.entering[j]) {
        path.entering[j] = t;
        ++entered;
      }
    }
    record(t);
    if (config.max_entered > 0 && entered >= config.max_entered) break;
  }
  return path;
}

std::vector<double> LogLambdaGrid(double lambda_max, int count,
                                  double min_ratio) {
  if (count < 1) throw ConfigError("lambda grid needs at least one point");
  if (!(min_ratio > 0.0 && min_ratio < 1.0)) {
    throw ConfigError("lambda_min_ratio must lie in (0, 1)");
  }
  std::vector<double> grid(count);
  if (count == 1) {
    grid[0] = lambda_max;
    return grid;
  }
  const double log_ratio = std::log(min_ratio);
  for (int i = 0; i < count; ++i) {
    grid[i] = lambda_max * std::exp(log_ratio * i / (count - 1));
  }
  return grid;
}

void SolveLassoProfiled(const ProfiledProblem& problem, double lambda,
                        double tol, Eigen::VectorXd& gamma) {
  const Eigen::MatrixXd& sigma = problem.gram;
  const Eigen::VectorXd& corr = problem.xty;
  const int p = static_cast<int>(corr.size());
  if (gamma.size() != p) gamma = Eigen::VectorXd::Zero(p);
  const double scale = std::max(
      1.0, p > 0 ? corr.cwiseAbs().maxCoeff() : 0.0);
  const double abs_tol = tol * scale;
  Eigen::VectorXd resid = corr - sigma * gamma;

  auto sweep = [&](bool active_only) {
    double max_change = 0.0;
    for (int j = 0; j < p; ++j) {
      if (active_only && gamma[j] == 0.0) continue;
      const double d = sigma(j, j);
      if (d <= 0.0) continue;
      const double updated = SoftThreshold(resid[j] + d * gamma[j], lambda) / d;
      const double change = updated - gamma[j];
      if (change != 0.0) {
        resid -= change * sigma.col(j);
        gamma[j] = updated;
        max_change = std::max(max_change, std::abs(change) * d);
      }
    }
    return max_change;
  };

  constexpr int kMaxSweeps = 200000;
  for (int outer = 0; outer < kMaxSweeps; ++outer) {
    // Converge on the current support, then confirm with a full sweep.
    for (int inner = 0; inner < kMaxSweeps; ++inner) {
      if (sweep(true) <= 0.1 * abs_tol) break;
    }
    const double full_change = sweep(false);
    resid = corr - sigma * gamma;
    if (full_change > 0.1 * abs_tol) continue;
    bool kkt = true;
    for (int j = 0; j < p && kkt; ++j) {
      if (sigma(j, j) <= 0.0) continue;
      if (gamma[j] == 0.0) {
        kkt = std::abs(resid[j]) <= lambda + abs_tol;
      } else {
        kkt = std::abs(resid[j] - lambda * Sign(gamma[j])) <= abs_tol;
      }
    }
    if (kkt) return;
  }
  std::ostringstream msg;
  msg << "LASSO coordinate descent did not converge at lambda " << lambda;
  throw NumericalError(msg.str());
}

SolutionPath LassoPath(const PathProblem& problem, const PathConfig& config) {
  const ProfiledProblem prof = Profile(problem);
  const int p = problem.num_coords();
  const double lambda_max = p > 0 ? prof.xty.cwiseAbs().maxCoeff() : 0.0;

  std::vector<double> grid = config.lambda_grid;
  if (grid.empty()) {
    if (lambda_max <= 0.0) {
      grid = {1.0};
    } else {
      grid = LogLambdaGrid(lambda_max, config.lambda_count,
                           config.lambda_min_ratio);
    }
  }
  for (size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0) || (i > 0 && !(grid[i] < grid[i - 1]))) {
      throw ConfigError("lambda grid must be positive and strictly decreasing");
    }
  }

  SolutionPath path;
  path.kind = PathParam::kLambda;
  path.entering.assign(p, std::nullopt);
  std::vector<Eigen::VectorXd> solutions;
  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(p);
  for (double lambda : grid) {
    SolveLassoProfiled(prof, lambda, config.lasso_tol, gamma);
    solutions.push_back(gamma);
    path.knots.push_back(MakeKnot(problem, lambda, gamma));
  }

  // Refine each coordinate's last nonzero lambda between the first grid
  // point where it is active and the grid point above it.
  const double width_floor = 1e-13 * std::max(lambda_max, grid.front());
  for (int j = 0; j < p; ++j) {
    int first = -1;
    for (size_t k = 0; k < grid.size(); ++k) {
      if (solutions[k][j] != 0.0) {
        first = static_cast<int>(k);
        break;
      }
    }
    if (first < 0) continue;
    double lo = grid[first];
    double hi = first > 0 ? grid[first - 1] : std::max(lambda_max, lo);
    for (int step = 0; step < config.bisection_steps && hi - lo > width_floor;
         ++step) {
      const double mid = 0.5 * (lo + hi);
      Eigen::VectorXd trial = solutions[first];
      SolveLassoProfiled(prof, mid, config.lasso_tol, trial);
      if (trial[j] != 0.0) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    path.entering[j] = 0.5 * (lo + hi);
  }
  return path;
}

std::string_view EngineName(PathEngine engine) {
  switch (engine) {
    case PathEngine::kLbi:
      return "lbi";
    case PathEngine::kIssExact:
      return "iss_exact";
    case PathEngine::kLasso:
      return "lasso";
  }
  return "unknown";
}

PathEngine ParseEngine(std::string_view name) {
  if (name == "lbi") return PathEngine::kLbi;
  if (name == "iss" || name == "iss_exact") return PathEngine::kIssExact;
  if (name == "lasso") return PathEngine::kLasso;
  throw ConfigError("unknown path engine '" + std::string(name) + "'");
}

SolutionPath ComputePath(PathEngine engine, const PathProblem& problem,
                         const PathConfig& config) {
  switch (engine) {
    case PathEngine::kLbi:
      return LbiPath(problem, config);
    case PathEngine::kIssExact:
      return IssPathExact(problem, config);
    case PathEngine::kLasso:
      return LassoPath(problem, config);
  }
  throw ConfigError("unknown path engine");
}

Eigen::VectorXd EnteringTimes(const SolutionPath& path) {
  Eigen::VectorXd z = Eigen::VectorXd::Zero(path.entering.size());
  for (size_t j = 0; j < path.entering.size(); ++j) {
    if (!path.entering[j]) continue;
    const double value = *path.entering[j];
    if (path.kind == PathParam::kLambda) {
      z[j] = value;
    } else if (value > 0.0) {
      z[j] = 1.0 / value;
    } else {
      z[j] = std::numeric_limits<double>::infinity();
    }
  }
  return z;
}

void WritePathCsv(const SolutionPath& path, std::ostream& out) {
  out << "param,coord,value\n";
  for (const PathKnot& knot : path.knots) {
    const std::string param = internal::FormatDouble(knot.param);
    for (Eigen::Index j = 0; j < knot.gamma.size(); ++j) {
      out << param << ',' << j << ',' << internal::FormatDouble(knot.gamma[j])
          << '\n';
    }
  }
}

}  // namespace posbias
