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

#include "posbias/comparison_data.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>
#include <system_error>
#include <utility>

#include "posbias/errors.h"

namespace posbias {
namespace {

constexpr std::string_view kHeader = "annotator,left,right,response";

std::string_view Trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> SplitFields(std::string_view line) {
  std::vector<std::string_view> fields;
  size_t start = 0;
  while (true) {
    const size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(Trim(line.substr(start)));
      break;
    }
    fields.push_back(Trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return fields;
}

double ParseResponse(std::string_view text, int line) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  if (!text.empty() && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ParseError("non-numeric response '" + std::string(text) + "'",
                     line);
  }
  if (!std::isfinite(value)) {
    throw ParseError("non-finite response '" + std::string(text) + "'", line);
  }
  return value;
}

class DisjointSets {
 public:
  explicit DisjointSets(int n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  int Find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void Union(int a, int b) {
    a = Find(a);
    b = Find(b);
    if (a == b) return;
    if (a < b) std::swap(a, b);
    parent_[a] = b;
  }

 private:
  std::vector<int> parent_;
};

}  // namespace

int Registry::Intern(std::string_view key) {
  auto it = index_.find(std::string(key));
  if (it != index_.end()) return it->second;
  const int id = size();
  names_.emplace_back(key);
  index_.emplace(names_.back(), id);
  return id;
}

std::optional<int> Registry::Find(std::string_view key) const {
  auto it = index_.find(std::string(key));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

ComparisonDataset ComparisonDataset::FromRecords(
    std::vector<ComparisonRecord> records) {
  ComparisonDataset ds;
  ds.left_.reserve(records.size());
  ds.right_.reserve(records.size());
  ds.annotator_.reserve(records.size());
  for (const ComparisonRecord& r : records) {
    if (r.left == r.right) {
      throw ParseError("self-comparison of item '" + r.left + "'", 0);
    }
    if (!std::isfinite(r.response)) {
      throw ParseError("non-finite response", 0);
    }
    ds.annotator_.push_back(ds.annotators_.Intern(r.annotator));
    ds.left_.push_back(ds.items_.Intern(r.left));
    ds.right_.push_back(ds.items_.Intern(r.right));
  }
  ds.records_ = std::move(records);
  return ds;
}

bool ComparisonDataset::IsDichotomous() const {
  for (const ComparisonRecord& r : records_) {
    if (r.response != 1.0 && r.response != -1.0) return false;
  }
  return true;
}

Eigen::VectorXd ComparisonDataset::Responses() const {
  Eigen::VectorXd y(num_edges());
  for (int k = 0; k < num_edges(); ++k) y[k] = records_[k].response;
  return y;
}

ComparisonDataset ParseDataset(std::istream& in, DataFormat format) {
  if (format != DataFormat::kCsv) throw ConfigError("unsupported format");
  std::vector<ComparisonRecord> records;
  std::string line;
  int line_no = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = Trim(line);
    if (view.empty() || view.front() == '#') continue;
    if (!seen_header) {
      std::string normalized;
      for (std::string_view f : SplitFields(view)) {
        if (!normalized.empty()) normalized += ',';
        normalized += f;
      }
      if (normalized != kHeader) {
        throw ParseError("expected header '" + std::string(kHeader) + "'",
                         line_no);
      }
      seen_header = true;
      continue;
    }
    const auto fields = SplitFields(view);
    if (fields.size() != 4) {
      throw ParseError("expected 4 fields, found " +
                           std::to_string(fields.size()),
                       line_no);
    }
    for (int f = 0; f < 3; ++f) {
      if (fields[f].empty()) throw ParseError("empty key", line_no);
    }
    if (fields[1] == fields[2]) {
      throw ParseError("self-comparison of item '" + std::string(fields[1]) +
                           "'",
                       line_no);
    }
    records.push_back({std::string(fields[0]), std::string(fields[1]),
                       std::string(fields[2]),
                       ParseResponse(fields[3], line_no)});
  }
  if (!seen_header) throw ParseError("missing header", line_no);
  return ComparisonDataset::FromRecords(std::move(records));
}

ComparisonDataset LoadDataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  return ParseDataset(in);
}

void WriteDataset(const ComparisonDataset& dataset, std::ostream& out) {
  out << kHeader << '\n';
  char buf[64];
  for (const ComparisonRecord& r : dataset.records()) {
    const auto res = std::to_chars(buf, buf + sizeof(buf), r.response);
    out << r.annotator << ',' << r.left << ',' << r.right << ','
        << std::string_view(buf, res.ptr - buf) << '\n';
  }
}

std::vector<int> ComponentLabels(
    int num_nodes, const std::vector<std::pair<int, int>>& edges) {
  DisjointSets sets(num_nodes);
  for (const auto& [a, b] : edges) sets.Union(a, b);
  // Roots are the smallest member, so labelling roots in index order gives
  // labels ordered by smallest member.
  std::vector<int> root_label(num_nodes, -1);
  std::vector<int> labels(num_nodes);
  int next = 0;
  for (int v = 0; v < num_nodes; ++v) {
    const int root = sets.Find(v);
    if (root_label[root] < 0) root_label[root] = next++;
    labels[v] = root_label[root];
  }
  return labels;
}

DesignOperators BuildOperators(const ComparisonDataset& dataset) {
  const int num_edges = dataset.num_edges();
  if (num_edges == 0) throw ConfigError("dataset has no comparisons");
  using Triplet = Eigen::Triplet<double>;
  std::vector<Triplet> grad_entries;
  std::vector<Triplet> annot_entries;
  std::vector<std::pair<int, int>> edges;
  grad_entries.reserve(2 * num_edges);
  annot_entries.reserve(num_edges);
  edges.reserve(num_edges);
  for (int k = 0; k < num_edges; ++k) {
    grad_entries.emplace_back(k, dataset.left_index(k), 1.0);
    grad_entries.emplace_back(k, dataset.right_index(k), -1.0);
    annot_entries.emplace_back(k, dataset.annotator_index(k), 1.0);
    edges.emplace_back(dataset.left_index(k), dataset.right_index(k));
  }
  DesignOperators ops;
  ops.grad.resize(num_edges, dataset.num_items());
  ops.grad.setFromTriplets(grad_entries.begin(), grad_entries.end());
  ops.annot.resize(num_edges, dataset.num_annotators());
  ops.annot.setFromTriplets(annot_entries.begin(), annot_entries.end());
  ops.component_labels = ComponentLabels(dataset.num_items(), edges);
  ops.num_components = 0;
  for (int label : ops.component_labels) {
    ops.num_components = std::max(ops.num_components, label + 1);
  }
  return ops;
}

std::vector<ClickCounts> LeftRightCounts(const ComparisonDataset& dataset) {
  if (!dataset.IsDichotomous()) {
    throw ConfigError("left/right counts need dichotomous (+1/-1) responses");
  }
  std::vector<ClickCounts> counts(dataset.num_annotators());
  for (int k = 0; k < dataset.num_edges(); ++k) {
    ClickCounts& c = counts[dataset.annotator_index(k)];
    if (dataset.records()[k].response > 0) {
      ++c.left;
    } else {
      ++c.right;
    }
  }
  return counts;
}

}  // namespace posbias
