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

#include <queue>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "posbias/errors.h"
#include "test_util.h"

namespace posbias {
namespace {

ComparisonDataset Parse(const std::string& text) {
  std::istringstream in(text);
  return ParseDataset(in);
}

TEST(ParseDatasetTest, SingleRecord) {
  const ComparisonDataset ds =
      Parse("annotator,left,right,response\na1,i1,i2,1\n");
  EXPECT_EQ(ds.num_items(), 2);
  EXPECT_EQ(ds.num_annotators(), 1);
  EXPECT_EQ(ds.num_edges(), 1);
  EXPECT_EQ(ds.records()[0].response, 1.0);
}

TEST(ParseDatasetTest, CountsMatchAgeSizedFile) {
  std::mt19937_64 rng(5);
  std::ostringstream text;
  text << "annotator,left,right,response\n";
  // Touch every item and annotator once, then fill randomly.
  for (int k = 0; k < 14011; ++k) {
    const int a = k < 94 ? k : static_cast<int>(rng() % 94);
    int i = k < 30 ? k : static_cast<int>(rng() % 30);
    int j = (i + 1 + static_cast<int>(rng() % 29)) % 30;
    text << "u" << a << ",v" << i << ",v" << j << ',' << ((rng() & 1) ? 1 : -1)
         << '\n';
  }
  const ComparisonDataset ds = Parse(text.str());
  EXPECT_EQ(ds.num_edges(), 14011);
  EXPECT_EQ(ds.num_items(), 30);
  EXPECT_EQ(ds.num_annotators(), 94);
}

TEST(ParseDatasetTest, DuplicatesAreDistinctEdges) {
  const ComparisonDataset ds = Parse(
      "annotator,left,right,response\n"
      "a1,x,y,1\n"
      "a1,x,y,1\n"
      "a1,x,y,-1\n"
      "a2,y,x,1\n"
      "a1,x,y,1\n");
  EXPECT_EQ(ds.num_edges(), 5);
  EXPECT_EQ(ds.num_items(), 2);
}

TEST(ParseDatasetTest, SkipsCommentsAndBlankLines) {
  const ComparisonDataset ds = Parse(
      "# exported\n\nannotator,left,right,response\n# note\na1,x,y,-1\n\n");
  EXPECT_EQ(ds.num_edges(), 1);
}

TEST(ParseDatasetTest, ErrorsCarryLineNumbers) {
  auto line_of = [](const std::string& text) {
    try {
      Parse(text);
    } catch (const ParseError& e) {
      return e.line();
    }
    return -1;
  };
  EXPECT_EQ(line_of("annotator,left,right,response\na1,x,y\n"), 2);
  EXPECT_EQ(line_of("annotator,left,right,response\na1,x,y,1\na1,x,x,1\n"),
            3);
  EXPECT_EQ(line_of("annotator,left,right,response\na1,x,y,abc\n"), 2);
  EXPECT_EQ(line_of("annotator,left,right,response\na1,x,y,inf\n"), 2);
  EXPECT_EQ(line_of("who,what\n"), 1);
}

TEST(ParseDatasetTest, RoundTripIsIdentity) {
  const ComparisonDataset ds = testing::RandomDataset(7, 5, 9, 3);
  std::vector<ComparisonRecord> records = ds.records();
  records[2].response = 0.125;
  records[4].response = -3.5;
  const ComparisonDataset mixed =
      ComparisonDataset::FromRecords(std::move(records));
  std::ostringstream out;
  WriteDataset(mixed, out);
  const ComparisonDataset back = Parse(out.str());
  EXPECT_EQ(back.records(), mixed.records());
  EXPECT_EQ(back.items(), mixed.items());
  EXPECT_EQ(back.annotators(), mixed.annotators());
}

TEST(BuildOperatorsTest, SingleRecord) {
  const ComparisonDataset ds =
      Parse("annotator,left,right,response\na1,i1,i2,1\n");
  const DesignOperators ops = BuildOperators(ds);
  const Eigen::MatrixXd grad = ops.grad;
  const Eigen::MatrixXd annot = ops.annot;
  EXPECT_EQ(grad(0, 0), 1.0);
  EXPECT_EQ(grad(0, 1), -1.0);
  EXPECT_EQ(annot(0, 0), 1.0);
}

TEST(BuildOperatorsTest, RowStructure) {
  const ComparisonDataset ds = testing::RandomDataset(9, 6, 12, 8);
  const DesignOperators ops = BuildOperators(ds);
  const Eigen::MatrixXd grad = ops.grad;
  const Eigen::MatrixXd annot = ops.annot;
  for (int k = 0; k < ds.num_edges(); ++k) {
    EXPECT_EQ(grad.row(k).sum(), 0.0);
    EXPECT_EQ(grad.row(k).cwiseAbs().sum(), 2.0);
    EXPECT_EQ(grad(k, ds.left_index(k)), 1.0);
    EXPECT_EQ(grad(k, ds.right_index(k)), -1.0);
    EXPECT_EQ(annot.row(k).sum(), 1.0);
    EXPECT_EQ(annot(k, ds.annotator_index(k)), 1.0);
  }
}

TEST(BuildOperatorsTest, LinearActionMatchesPerRecordEvaluation) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 50; ++trial) {
    const ComparisonDataset ds =
        testing::RandomDataset(3 + trial % 8, 1 + trial % 5, 6, 100 + trial);
    const DesignOperators ops = BuildOperators(ds);
    Eigen::VectorXd theta(ds.num_items());
    Eigen::VectorXd gamma(ds.num_annotators());
    for (auto& v : theta) v = normal(rng);
    for (auto& v : gamma) v = normal(rng);
    const Eigen::VectorXd y = ops.grad * theta + ops.annot * gamma;
    for (int k = 0; k < ds.num_edges(); ++k) {
      const double expected = theta[ds.left_index(k)] -
                              theta[ds.right_index(k)] +
                              gamma[ds.annotator_index(k)];
      EXPECT_NEAR(y[k], expected, 1e-14);
    }
  }
}

TEST(BuildOperatorsTest, ConstantVectorsPerComponentAreInNullSpace) {
  const ComparisonDataset ds = Parse(
      "annotator,left,right,response\na1,p,q,1\na1,q,r,-1\na2,s,t,1\n");
  const DesignOperators ops = BuildOperators(ds);
  EXPECT_EQ(ops.num_components, 2);
  for (int c = 0; c < ops.num_components; ++c) {
    Eigen::VectorXd indicator = Eigen::VectorXd::Zero(ds.num_items());
    for (int i = 0; i < ds.num_items(); ++i) {
      if (ops.component_labels[i] == c) indicator[i] = 1.0;
    }
    EXPECT_EQ((ops.grad * indicator).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(ComponentLabelsTest, TwoDisjointPairs) {
  const std::vector<int> labels = ComponentLabels(4, {{0, 1}, {2, 3}});
  EXPECT_EQ(labels, (std::vector<int>{0, 0, 1, 1}));
}

// Breadth-first search oracle.
std::vector<int> BfsLabels(int n, const std::vector<std::pair<int, int>>& e) {
  std::vector<std::vector<int>> adj(n);
  for (auto [a, b] : e) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<int> label(n, -1);
  int next = 0;
  for (int s = 0; s < n; ++s) {
    if (label[s] >= 0) continue;
    std::queue<int> queue;
    queue.push(s);
    label[s] = next;
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop();
      for (int v : adj[u]) {
        if (label[v] < 0) {
          label[v] = next;
          queue.push(v);
        }
      }
    }
    ++next;
  }
  return label;
}

TEST(ComponentLabelsTest, MatchesBreadthFirstSearch) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 30);
    const int m = static_cast<int>(rng() % (2 * n));
    std::vector<std::pair<int, int>> edges;
    for (int k = 0; k < m; ++k) {
      edges.emplace_back(static_cast<int>(rng() % n),
                         static_cast<int>(rng() % n));
    }
    EXPECT_EQ(ComponentLabels(n, edges), BfsLabels(n, edges));
  }
}

TEST(LeftRightCountsTest, Examples) {
  std::ostringstream text;
  text << "annotator,left,right,response\n";
  for (int k = 0; k < 40; ++k) text << "id40,x,y,1\n";
  text << "mixed,x,y,1\nmixed,y,x,-1\nmixed,x,y,-1\n";
  for (int k = 0; k < 360; ++k) text << "id12,x,y," << (k < 90 ? 1 : -1) << '\n';
  const ComparisonDataset ds = Parse(text.str());
  const std::vector<ClickCounts> counts = LeftRightCounts(ds);
  EXPECT_EQ(counts[*ds.annotators().Find("id40")], (ClickCounts{40, 0}));
  EXPECT_EQ(counts[*ds.annotators().Find("mixed")], (ClickCounts{1, 2}));
  EXPECT_EQ(counts[*ds.annotators().Find("id12")], (ClickCounts{90, 270}));
}

TEST(LeftRightCountsTest, RejectsGradedResponses) {
  const ComparisonDataset ds =
      Parse("annotator,left,right,response\na1,x,y,0.5\n");
  EXPECT_FALSE(ds.IsDichotomous());
  EXPECT_THROW(LeftRightCounts(ds), ConfigError);
}

}  // namespace
}  // namespace posbias
