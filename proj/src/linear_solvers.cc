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

#include "posbias/linear_solvers.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "posbias/errors.h"

namespace posbias {
namespace {

std::vector<int> LaplacianComponents(const SparseMatrix& laplacian) {
  std::vector<std::pair<int, int>> edges;
  for (int row = 0; row < laplacian.outerSize(); ++row) {
    for (SparseMatrix::InnerIterator it(laplacian, row); it; ++it) {
      if (it.col() > row && it.value() != 0.0) {
        edges.emplace_back(row, static_cast<int>(it.col()));
      }
    }
  }
  return ComponentLabels(static_cast<int>(laplacian.rows()), edges);
}

}  // namespace

LaplacianSystem LaplacianSystem::FromGrad(const SparseMatrix& grad,
                                          double tol, int max_iter) {
  SparseMatrix laplacian = (grad.transpose() * grad).pruned();
  return FromLaplacian(std::move(laplacian), tol, max_iter);
}

LaplacianSystem LaplacianSystem::FromLaplacian(SparseMatrix laplacian,
                                               double tol, int max_iter) {
  if (!(tol > 0.0)) throw ConfigError("Laplacian tolerance must be positive");
  if (laplacian.rows() != laplacian.cols()) {
    throw ConfigError("Laplacian must be square");
  }
  LaplacianSystem sys;
  const int n = static_cast<int>(laplacian.rows());
  sys.tol_ = tol;
  sys.max_iter_ = max_iter > 0 ? max_iter : 10 * std::max(n, 1);
  sys.inv_diag_ = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    const double d = laplacian.coeff(i, i);
    if (d > 0.0) sys.inv_diag_[i] = 1.0 / d;
  }
  sys.components_ = LaplacianComponents(laplacian);
  sys.num_components_ = 0;
  for (int c : sys.components_) {
    sys.num_components_ = std::max(sys.num_components_, c + 1);
  }
  sys.component_sizes_.assign(sys.num_components_, 0);
  for (int c : sys.components_) ++sys.component_sizes_[c];
  sys.laplacian_ = std::move(laplacian);
  return sys;
}

void LaplacianSystem::Center(Eigen::Ref<Eigen::VectorXd> v) const {
  std::vector<double> sums(num_components_, 0.0);
  for (int i = 0; i < v.size(); ++i) sums[components_[i]] += v[i];
  for (int i = 0; i < v.size(); ++i) {
    v[i] -= sums[components_[i]] / component_sizes_[components_[i]];
  }
}

Eigen::VectorXd LaplacianSystem::Solve(const Eigen::VectorXd& rhs) const {
  const int n = dim();
  if (rhs.size() != n) throw ConfigError("rhs length does not match Laplacian");
  Eigen::VectorXd b = rhs;
  Center(b);
  const double b_norm = b.norm();
  const double target = tol_ * (1.0 + rhs.norm());
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  if (b_norm <= target) return x;

  Eigen::VectorXd r = b;
  Eigen::VectorXd z = inv_diag_.cwiseProduct(r);
  Center(z);
  Eigen::VectorXd p = z;
  Eigen::VectorXd lp(n);
  double rz = r.dot(z);
  double r_norm = b_norm;
  for (int iter = 0; iter < max_iter_; ++iter) {
    lp.noalias() = laplacian_ * p;
    const double denom = p.dot(lp);
    if (!(denom > 0.0)) break;
    const double alpha = rz / denom;
    x += alpha * p;
    r -= alpha * lp;
    r_norm = r.norm();
    // Stop well inside the contract so callers see a clean residual.
    if (r_norm <= 1e-3 * target) break;
    z = inv_diag_.cwiseProduct(r);
    Center(z);
    const double rz_next = r.dot(z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  Center(x);
  r_norm = (b - laplacian_ * x).norm();
  if (r_norm > target) {
    std::ostringstream msg;
    msg << "Laplacian solve did not converge in " << max_iter_
        << " iterations; residual " << r_norm;
    throw NumericalError(msg.str());
  }
  return x;
}

Eigen::MatrixXd LaplacianSystem::Solve(const Eigen::MatrixXd& rhs) const {
  Eigen::MatrixXd out(rhs.rows(), rhs.cols());
  for (Eigen::Index j = 0; j < rhs.cols(); ++j) {
    out.col(j) = Solve(Eigen::VectorXd(rhs.col(j)));
  }
  return out;
}

Eigen::MatrixXd ProjectOffGradient(const LaplacianSystem& system,
                                   const SparseMatrix& grad,
                                   const Eigen::MatrixXd& v) {
  const Eigen::MatrixXd scores = system.Solve(Eigen::MatrixXd(grad.transpose() * v));
  Eigen::MatrixXd out = v;
  out.noalias() -= grad * scores;
  return out;
}

Eigen::MatrixXd ComplementBasis(const SparseMatrix& grad,
                                const SparseMatrix& annot, int k,
                                std::uint64_t seed) {
  const int num_edges = static_cast<int>(grad.rows());
  const int num_items = static_cast<int>(grad.cols());
  const int num_annotators = static_cast<int>(annot.cols());
  if (annot.rows() != grad.rows()) {
    throw ConfigError("grad and annot must have the same number of rows");
  }
  if (num_edges < 2 * num_annotators + num_items) {
    std::ostringstream msg;
    msg << "knockoff construction requires |E| >= 2|U| + |V|, but |E| = "
        << num_edges << " < 2*" << num_annotators << " + " << num_items
        << " = " << 2 * num_annotators + num_items;
    throw DimensionError(msg.str());
  }
  if (k < 0) throw ConfigError("basis size must be nonnegative");

  const LaplacianSystem sys = LaplacianSystem::FromGrad(grad);
  const Eigen::MatrixXd resid_annot =
      ProjectOffGradient(sys, grad, Eigen::MatrixXd(annot));
  const Eigen::MatrixXd sigma = Eigen::MatrixXd(annot.transpose() * resid_annot);
  Eigen::LLT<Eigen::MatrixXd> sigma_llt(sigma);
  if (sigma_llt.info() != Eigen::Success) {
    throw NumericalError(
        "annotator columns are linearly dependent on the score space");
  }
  const int complement_dim =
      num_edges - (num_items - sys.num_components()) - num_annotators;
  if (k > complement_dim) {
    std::ostringstream msg;
    msg << "requested " << k << " complement directions but only "
        << complement_dim << " exist";
    throw DimensionError(msg.str());
  }
  if (k == 0) return Eigen::MatrixXd(num_edges, 0);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd basis(num_edges, k);
  for (int j = 0; j < k; ++j) {
    for (int i = 0; i < num_edges; ++i) basis(i, j) = normal(rng);
  }

  auto project = [&](Eigen::MatrixXd& m) {
    m = ProjectOffGradient(sys, grad, m);
    const Eigen::MatrixXd coef =
        sigma_llt.solve(Eigen::MatrixXd(resid_annot.transpose() * m));
    m.noalias() -= resid_annot * coef;
  };
  auto orthonormalize = [&](Eigen::MatrixXd& m) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
    const Eigen::MatrixXd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    const double scale = r.diagonal().cwiseAbs().maxCoeff();
    if (!(r.diagonal().cwiseAbs().minCoeff() > 1e-10 * scale)) {
      throw NumericalError("complement basis is rank deficient");
    }
    m = qr.householderQ() * Eigen::MatrixXd::Identity(num_edges, k);
  };
  for (int pass = 0; pass < 2; ++pass) {
    project(basis);
    orthonormalize(basis);
  }

  const double ortho_err =
      (basis.transpose() * basis - Eigen::MatrixXd::Identity(k, k))
          .cwiseAbs()
          .maxCoeff();
  const double grad_err =
      Eigen::MatrixXd(grad.transpose() * basis).cwiseAbs().maxCoeff();
  const double annot_err =
      Eigen::MatrixXd(annot.transpose() * basis).cwiseAbs().maxCoeff();
  if (ortho_err > 1e-8 || grad_err > 1e-8 || annot_err > 1e-8) {
    std::ostringstream msg;
    msg << "complement basis failed its checks: orthonormality " << ortho_err
        << ", grad " << grad_err << ", annot " << annot_err;
    throw NumericalError(msg.str());
  }
  return basis;
}

Eigen::MatrixXd PsdSquareRoot(const Eigen::MatrixXd& m,
                              std::optional<double> clip_tol) {
  if (m.rows() != m.cols()) throw ConfigError("matrix must be square");
  if (m.rows() == 0) return m;
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) {
    throw NumericalError("eigendecomposition failed");
  }
  const Eigen::VectorXd& values = eig.eigenvalues();
  const double norm = values.cwiseAbs().maxCoeff();
  const double clip = clip_tol.value_or(1e-10 * norm);
  if (values.minCoeff() < -clip) {
    std::ostringstream msg;
    msg << "matrix is indefinite: minimum eigenvalue " << values.minCoeff()
        << " below -" << clip;
    throw NumericalError(msg.str());
  }
  Eigen::VectorXd roots(values.size());
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    roots[i] = values[i] < clip ? 0.0 : std::sqrt(values[i]);
  }
  const Eigen::MatrixXd& vecs = eig.eigenvectors();
  return vecs * roots.asDiagonal() * vecs.transpose();
}

namespace {

// Solves gram[P,P] z = rhs[P]; minimum-norm when the block is singular.
Eigen::VectorXd SolvePassive(const Eigen::MatrixXd& gram,
                             const Eigen::VectorXd& rhs,
                             const std::vector<int>& passive) {
  const int m = static_cast<int>(passive.size());
  Eigen::MatrixXd block(m, m);
  Eigen::VectorXd b(m);
  for (int a = 0; a < m; ++a) {
    b[a] = rhs[passive[a]];
    for (int c = 0; c < m; ++c) block(a, c) = gram(passive[a], passive[c]);
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(block);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive() &&
      ldlt.rcond() > 1e-12) {
    return ldlt.solve(b);
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(block);
  cod.setThreshold(1e-12);
  return cod.solve(b);
}

}  // namespace

Eigen::VectorXd NnlsGram(const Eigen::MatrixXd& gram,
                         const Eigen::VectorXd& rhs,
                         const std::vector<int>& warm_start,
                         const NnlsOptions& options) {
  const int n = static_cast<int>(rhs.size());
  if (gram.rows() != n || gram.cols() != n) {
    throw ConfigError("NNLS Gram matrix does not match the right-hand side");
  }
  const int max_iter = options.max_iter > 0 ? options.max_iter : 3 * n + 10;
  const double scale =
      std::max({1.0, n > 0 ? rhs.cwiseAbs().maxCoeff() : 0.0,
                n > 0 ? gram.diagonal().cwiseAbs().maxCoeff() : 0.0});
  const double grad_tol = options.tol * scale;

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  std::vector<char> is_passive(n, 0);
  std::vector<int> passive;

  // Drives x toward the unconstrained passive solution, dropping coordinates
  // that would turn negative.
  auto settle = [&]() {
    for (int guard = 0; guard <= n; ++guard) {
      if (passive.empty()) return;
      const Eigen::VectorXd z = SolvePassive(gram, rhs, passive);
      double alpha = 1.0;
      bool feasible = true;
      for (size_t a = 0; a < passive.size(); ++a) {
        if (z[a] <= 0.0) {
          feasible = false;
          const double xi = x[passive[a]];
          const double step = xi / (xi - z[a]);
          alpha = std::min(alpha, step);
        }
      }
      if (feasible) {
        for (size_t a = 0; a < passive.size(); ++a) x[passive[a]] = z[a];
        return;
      }
      for (size_t a = 0; a < passive.size(); ++a) {
        x[passive[a]] += alpha * (z[a] - x[passive[a]]);
      }
      std::vector<int> kept;
      for (int i : passive) {
        if (x[i] > 1e-14 * scale) {
          kept.push_back(i);
        } else {
          x[i] = 0.0;
          is_passive[i] = 0;
        }
      }
      passive = std::move(kept);
    }
  };

  for (int i : warm_start) {
    if (i >= 0 && i < n && !is_passive[i]) {
      is_passive[i] = 1;
      passive.push_back(i);
    }
  }
  if (!passive.empty()) {
    // Start from the passive solution clipped at zero, which is feasible.
    const Eigen::VectorXd z = SolvePassive(gram, rhs, passive);
    std::vector<int> kept;
    for (size_t a = 0; a < passive.size(); ++a) {
      if (z[a] > 0.0) {
        x[passive[a]] = z[a];
        kept.push_back(passive[a]);
      } else {
        is_passive[passive[a]] = 0;
      }
    }
    passive = std::move(kept);
    settle();
  }

  for (int iter = 0; iter < max_iter; ++iter) {
    const Eigen::VectorXd w = rhs - gram * x;
    int best = -1;
    double best_value = grad_tol;
    for (int i = 0; i < n; ++i) {
      if (!is_passive[i] && w[i] > best_value) {
        best_value = w[i];
        best = i;
      }
    }
    if (best < 0) return x;
    is_passive[best] = 1;
    passive.push_back(best);
    settle();
    if (!is_passive[best]) {
      // The entering coordinate was dropped immediately: numerically stalled.
      return x;
    }
  }
  throw NumericalError("NNLS exceeded its iteration cap");
}

Eigen::VectorXd Nnls(const Eigen::MatrixXd& g, const Eigen::VectorXd& b,
                     const NnlsOptions& options) {
  if (g.rows() != b.size()) throw ConfigError("NNLS dimension mismatch");
  const Eigen::MatrixXd gram = g.transpose() * g;
  const Eigen::VectorXd rhs = g.transpose() * b;
  return NnlsGram(gram, rhs, {}, options);
}

double SpectralNormUpperBound(const Eigen::MatrixXd& sym_psd) {
  const Eigen::Index n = sym_psd.rows();
  if (n == 0) return 0.0;
  if (n <= 400) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym_psd,
                                                       Eigen::EigenvaluesOnly);
    return eig.eigenvalues().cwiseAbs().maxCoeff() * (1.0 + 1e-9);
  }
  Eigen::VectorXd v = Eigen::VectorXd::Ones(n) / std::sqrt(double(n));
  double estimate = 0.0;
  for (int iter = 0; iter < 500; ++iter) {
    Eigen::VectorXd next = sym_psd * v;
    const double norm = next.norm();
    if (norm == 0.0) return 0.0;
    const double previous = estimate;
    estimate = v.dot(next);
    v = next / norm;
    if (iter > 20 && std::abs(estimate - previous) <= 1e-10 * estimate) break;
  }
  // Gershgorin gives a hard cap; power iteration is a lower bound, so pad it.
  const double gershgorin = sym_psd.cwiseAbs().rowwise().sum().maxCoeff();
  return std::min(gershgorin, 1.05 * estimate);
}

}  // namespace posbias
