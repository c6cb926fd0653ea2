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

#include "test_util.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include <Eigen/Eigenvalues>

namespace posbias::testing {

ComparisonDataset RandomDataset(int n_items, int n_annotators,
                                int records_per_annotator,
                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> item(0, n_items - 1);
  std::vector<ComparisonRecord> records;
  auto name = [](const char* prefix, int i) {
    return std::string(prefix) + std::to_string(i + 1);
  };
  int path_step = 0;
  for (int a = 0; a < n_annotators; ++a) {
    for (int r = 0; r < records_per_annotator; ++r) {
      int i;
      int j;
      if (path_step < n_items - 1) {
        i = path_step;
        j = path_step + 1;
        ++path_step;
      } else {
        do {
          i = item(rng);
          j = item(rng);
        } while (i == j);
      }
      if (rng() & 1) std::swap(i, j);
      const double response = (rng() & 1) ? 1.0 : -1.0;
      records.push_back(
          {name("a", a), name("item", i), name("item", j), response});
    }
  }
  return ComparisonDataset::FromRecords(std::move(records));
}

SimulatedData SmallSimulation(int n_items, int n_good, int n_biased,
                              double p1, double p2, std::uint64_t seed) {
  SimulationConfig cfg;
  cfg.n_items = n_items;
  cfg.n_good = n_good;
  cfg.n_biased = n_biased;
  cfg.p1 = p1;
  cfg.p2 = p2;
  return Generate(cfg, seed);
}

Eigen::VectorXd PlantedResponses(const DesignOperators& ops,
                                 const Eigen::VectorXd& theta,
                                 const Eigen::VectorXd& gamma) {
  return ops.grad * theta + ops.annot * gamma;
}

Eigen::MatrixXd DensePinvSym(const Eigen::MatrixXd& m, double tol) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  Eigen::VectorXd inv = eig.eigenvalues();
  const double scale = std::max(1.0, inv.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < inv.size(); ++i) {
    inv[i] = std::abs(inv[i]) > tol * scale ? 1.0 / inv[i] : 0.0;
  }
  return eig.eigenvectors() * inv.asDiagonal() *
         eig.eigenvectors().transpose();
}

Eigen::MatrixXd DenseResidualProjector(const SparseMatrix& grad) {
  const Eigen::MatrixXd g = grad;
  const Eigen::MatrixXd h = g * DensePinvSym(g.transpose() * g) * g.transpose();
  return Eigen::MatrixXd::Identity(g.rows(), g.rows()) - h;
}

ComparisonDataset DatasetFromResponses(const ComparisonDataset& base,
                                       const Eigen::VectorXd& y) {
  std::vector<ComparisonRecord> records = base.records();
  for (std::size_t k = 0; k < records.size(); ++k) records[k].response = y[k];
  return ComparisonDataset::FromRecords(std::move(records));
}

int KendallDistance(const std::vector<int>& order_a,
                    const std::vector<int>& order_b) {
  const std::size_t n = order_a.size();
  std::vector<int> pos_b(n);
  for (std::size_t r = 0; r < n; ++r) pos_b[order_b[r]] = static_cast<int>(r);
  int discordant = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (pos_b[order_a[i]] > pos_b[order_a[j]]) ++discordant;
    }
  }
  return discordant;
}

}  // namespace posbias::testing
