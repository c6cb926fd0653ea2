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

// Pairwise-comparison records, their registries, and the sparse design
// operators of the position-bias model Y = grad * theta + annot * gamma + e.

#ifndef POSBIAS_COMPARISON_DATA_H_
#define POSBIAS_COMPARISON_DATA_H_

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace posbias {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// One judgment. A positive response means the annotator preferred the item
// shown on the left.
struct ComparisonRecord {
  std::string annotator;
  std::string left;
  std::string right;
  double response = 0.0;

  friend bool operator==(const ComparisonRecord&,
                         const ComparisonRecord&) = default;
};

// Keys indexed in first-appearance order.
class Registry {
 public:
  int Intern(std::string_view key);
  std::optional<int> Find(std::string_view key) const;
  const std::string& Name(int index) const { return names_[index]; }
  const std::vector<std::string>& names() const { return names_; }
  int size() const { return static_cast<int>(names_.size()); }

  friend bool operator==(const Registry& a, const Registry& b) {
    return a.names_ == b.names_;
  }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> index_;
};

// An ordered multiset of judgments plus item and annotator registries.
// Immutable once built.
class ComparisonDataset {
 public:
  // Throws ParseError (line 0) on self-comparisons or non-finite responses.
  static ComparisonDataset FromRecords(std::vector<ComparisonRecord> records);

  const std::vector<ComparisonRecord>& records() const { return records_; }
  const Registry& items() const { return items_; }
  const Registry& annotators() const { return annotators_; }

  int num_edges() const { return static_cast<int>(records_.size()); }
  int num_items() const { return items_.size(); }
  int num_annotators() const { return annotators_.size(); }

  int left_index(int k) const { return left_[k]; }
  int right_index(int k) const { return right_[k]; }
  int annotator_index(int k) const { return annotator_[k]; }

  // True when every response is exactly +1 or -1.
  bool IsDichotomous() const;
  Eigen::VectorXd Responses() const;

 private:
  std::vector<ComparisonRecord> records_;
  Registry items_;
  Registry annotators_;
  std::vector<int> left_;
  std::vector<int> right_;
  std::vector<int> annotator_;
};

enum class DataFormat { kCsv };

// Reads `annotator,left,right,response` CSV. Lines starting with '#' and
// blank lines are skipped.
ComparisonDataset ParseDataset(std::istream& in,
                               DataFormat format = DataFormat::kCsv);
ComparisonDataset LoadDataset(const std::filesystem::path& path);
void WriteDataset(const ComparisonDataset& dataset, std::ostream& out);

struct DesignOperators {
  SparseMatrix grad;   // |E| x |V|, +1 at the left item, -1 at the right
  SparseMatrix annot;  // |E| x |U|, one +1 per row
  std::vector<int> component_labels;  // item -> connected component
  int num_components = 0;

  int num_edges() const { return static_cast<int>(grad.rows()); }
  int num_items() const { return static_cast<int>(grad.cols()); }
  int num_annotators() const { return static_cast<int>(annot.cols()); }
};

DesignOperators BuildOperators(const ComparisonDataset& dataset);

// Connected components of an undirected graph on `num_nodes` vertices,
// labelled 0.. in order of the smallest member.
std::vector<int> ComponentLabels(
    int num_nodes, const std::vector<std::pair<int, int>>& edges);

struct ClickCounts {
  int left = 0;
  int right = 0;

  friend bool operator==(const ClickCounts&, const ClickCounts&) = default;
};

// Per-annotator counts in registry order. Requires dichotomous responses.
std::vector<ClickCounts> LeftRightCounts(const ComparisonDataset& dataset);

}  // namespace posbias

#endif  // POSBIAS_COMPARISON_DATA_H_
