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

// Numerical kernels shared by the path engines and the knockoff
// construction: graph-Laplacian least squares, complement bases, PSD square
// roots and nonnegative least squares.

#ifndef POSBIAS_LINEAR_SOLVERS_H_
#define POSBIAS_LINEAR_SOLVERS_H_

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "posbias/comparison_data.h"

namespace posbias {

// Applies the pseudo-inverse of a graph Laplacian L = grad^T grad with
// preconditioned conjugate gradients, one connected component at a time
// through mean-zero projection.
class LaplacianSystem {
 public:
  static LaplacianSystem FromGrad(const SparseMatrix& grad, double tol = 1e-10,
                                  int max_iter = 0);
  // `laplacian` must be symmetric with zero row sums.
  static LaplacianSystem FromLaplacian(SparseMatrix laplacian,
                                       double tol = 1e-10, int max_iter = 0);

  // Minimum-norm solution of L theta = rhs. The component means of rhs are
  // removed first; the result has zero mean on every component. Throws
  // NumericalError if the residual exceeds tol * (1 + |rhs|).
  Eigen::VectorXd Solve(const Eigen::VectorXd& rhs) const;
  Eigen::MatrixXd Solve(const Eigen::MatrixXd& rhs) const;

  // Removes per-component means in place.
  void Center(Eigen::Ref<Eigen::VectorXd> v) const;

  const SparseMatrix& laplacian() const { return laplacian_; }
  const std::vector<int>& components() const { return components_; }
  int num_components() const { return num_components_; }
  int dim() const { return static_cast<int>(laplacian_.rows()); }
  double tol() const { return tol_; }
  int max_iter() const { return max_iter_; }

 private:
  LaplacianSystem() = default;

  SparseMatrix laplacian_;
  Eigen::VectorXd inv_diag_;
  std::vector<int> components_;
  std::vector<int> component_sizes_;
  int num_components_ = 0;
  double tol_ = 1e-10;
  int max_iter_ = 0;
};

inline Eigen::VectorXd SolveScore(const LaplacianSystem& system,
                                  const Eigen::VectorXd& rhs) {
  return system.Solve(rhs);
}

// (I - H) v with H = grad (grad^T grad)^+ grad^T, never forming H.
Eigen::MatrixXd ProjectOffGradient(const LaplacianSystem& system,
                                   const SparseMatrix& grad,
                                   const Eigen::MatrixXd& v);

// Orthonormal |E| x k matrix Q with grad^T Q = 0 and annot^T Q = 0, drawn by
// randomized range finding with two projection/orthonormalization passes.
// Requires |E| >= 2|U| + |V| and k <= the complement dimension.
Eigen::MatrixXd ComplementBasis(const SparseMatrix& grad,
                                const SparseMatrix& annot, int k,
                                std::uint64_t seed);

// Returns symmetric C with C^T C equal to `m` after clipping eigenvalues
// below clip_tol to zero. Default clip_tol is 1e-10 * |m|. Throws
// NumericalError when an eigenvalue is below -clip_tol.
Eigen::MatrixXd PsdSquareRoot(const Eigen::MatrixXd& m,
                              std::optional<double> clip_tol = std::nullopt);

struct NnlsOptions {
  double tol = 1e-10;  // relative KKT tolerance
  int max_iter = 0;    // 0 means 3 * dimension + 10
};

// Minimizes 0.5 x^T gram x - rhs^T x subject to x >= 0 (Lawson-Hanson
// active set on the normal equations). `warm_start` lists coordinates to
// try as the initial passive set. Singular passive blocks are solved in the
// minimum-norm sense.
Eigen::VectorXd NnlsGram(const Eigen::MatrixXd& gram,
                         const Eigen::VectorXd& rhs,
                         const std::vector<int>& warm_start = {},
                         const NnlsOptions& options = {});

// argmin_{x >= 0} |g x - b|^2.
Eigen::VectorXd Nnls(const Eigen::MatrixXd& g, const Eigen::VectorXd& b,
                     const NnlsOptions& options = {});

// Largest eigenvalue of a symmetric PSD matrix by power iteration, inflated
// by a small safety factor so it bounds the true value from above in
// practice.
double SpectralNormUpperBound(const Eigen::MatrixXd& sym_psd);

}  // namespace posbias

#endif  // POSBIAS_LINEAR_SOLVERS_H_
