// Copyright 2026 The Chatlink Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "chatlink/eval.hpp"

#include <cmath>
#include <functional>
#include <set>

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace chatlink {
namespace {

using testing::make_chat;

AnnotationSet set_of(std::string id, std::vector<std::vector<int>> per_annotator) {
  AnnotationSet s{std::move(id), {}};
  for (std::size_t a = 0; a < per_annotator.size(); ++a)
    s.entries["r" + std::to_string(a + 1)] = labels_from_distances(per_annotator[a]);
  return s;
}

TEST(Rules, Rule1) {
  EXPECT_EQ(distances_of(rule1(make_chat("C"))), (std::vector<int>{0}));
  EXPECT_EQ(distances_of(rule1(make_chat("CACA"))), (std::vector<int>{0, 1, 1, 1}));
  EXPECT_EQ(rule1(make_chat("CAAACCA")).size(), 7u);
}

TEST(Rules, Rule2) {
  EXPECT_EQ(distances_of(rule2(make_chat("CAC"))), (std::vector<int>{0, 1, 0}));
  EXPECT_EQ(distances_of(rule2(make_chat("CCC"))), (std::vector<int>{0, 1, 1}));
  EXPECT_EQ(distances_of(rule2(make_chat("AA"))), (std::vector<int>{0, 0}));
}

TEST(Accuracy, Examples) {
  const auto s = set_of("x", {{0, 1}, {0, 1}, {0, 1}});
  EXPECT_DOUBLE_EQ(accuracy_vs_random_annotator(labels_from_distances({0, 1}), s), 1.0);
  const auto t = set_of("x", {{0, 1}, {0, 0}, {0, 0}});
  EXPECT_NEAR(accuracy_vs_random_annotator(labels_from_distances({0, 1}), t), 2.0 / 3.0, 1e-15);
  const auto u = set_of("x", {{0, 0}, {0, 0}, {0, 0}});
  EXPECT_DOUBLE_EQ(accuracy_vs_random_annotator(labels_from_distances({1, 1}), u), 0.0);
  EXPECT_THROW(accuracy_vs_random_annotator(labels_from_distances({0}), AnnotationSet{"x", {}}),
               ValidationError);
}

// The expectation equals the mean of a Monte-Carlo draw of one annotator.
TEST(Accuracy, MatchesRandomAnnotatorSimulation) {
  const auto s = set_of("x", {{0, 1, 2, 1, 0}, {0, 0, 2, 3, 1}, {0, 1, 1, 3, 4}});
  const auto pred = labels_from_distances({0, 1, 1, 3, 0});
  Rng rng(4);
  double hits = 0.0;
  const int draws = 200000;
  std::vector<const std::vector<LinkLabel>*> ann;
  for (const auto& [_, l] : s.entries) ann.push_back(&l);
  for (int d = 0; d < draws; ++d) {
    const std::size_t i = rng.below(5);
    hits += (*ann[rng.below(3)])[i].distance == pred[i].distance;
  }
  EXPECT_NEAR(accuracy_vs_random_annotator(pred, s), hits / draws, 5e-3);
}

TEST(WeightedF1, Examples) {
  const auto gold = labels_from_distances({0, 1, 1, 1});
  EXPECT_DOUBLE_EQ(weighted_f1(gold, gold).weighted_f1, 1.0);
  const auto r = weighted_f1(labels_from_distances({0, 0, 0, 0}), gold);
  EXPECT_NEAR(r.weighted_f1, 0.1, 1e-15);
  ASSERT_EQ(r.per_class.size(), 2u);
  EXPECT_DOUBLE_EQ(r.per_class[0].precision, 0.25);
  EXPECT_DOUBLE_EQ(r.per_class[0].recall, 1.0);
  EXPECT_NEAR(r.per_class[0].f1, 0.4, 1e-15);
  EXPECT_EQ(r.per_class[0].support, 1u);
  EXPECT_DOUBLE_EQ(r.per_class[1].f1, 0.0);
  EXPECT_EQ(r.per_class[1].support, 3u);
  EXPECT_THROW(weighted_f1(gold, labels_from_distances({0})), ValidationError);
}

TEST(WeightedF1, PredictedOnlyClassHasNoWeight) {
  // class 2 appears only in predictions: support 0
  const auto r = weighted_f1(labels_from_distances({0, 2, 1}), labels_from_distances({0, 1, 1}));
  std::size_t support = 0;
  for (const auto& c : r.per_class) {
    support += c.support;
    if (c.label == 2) {
      EXPECT_EQ(c.support, 0u);
    }
    EXPECT_GE(c.f1, 0.0);
    EXPECT_LE(c.f1, 1.0);
  }
  EXPECT_EQ(support, r.n_messages);
  // class 0: F1 1 (support 1); class 1: P=1, R=0.5, F1=2/3 (support 2)
  EXPECT_NEAR(r.weighted_f1, (1.0 + 2.0 * (2.0 / 3.0)) / 3.0, 1e-15);
}

TEST(FleissKappa, WorkedExample) {
  // items {0,0,1} and {1,1,1}: Pbar = 2/3, Pe = 5/9
  const auto s = set_of("x", {{0, 1}, {0, 1}, {1, 1}});
  EXPECT_EQ(fleiss_kappa({s}), 0.25);
}

TEST(FleissKappa, UnanimousAndDegenerate) {
  const auto s = set_of("x", {{0, 1, 2, 1}, {0, 1, 2, 1}, {0, 1, 2, 1}});
  EXPECT_DOUBLE_EQ(fleiss_kappa({s}), 1.0);
  const auto single = set_of("y", {{0, 0}, {0, 0}});
  EXPECT_DOUBLE_EQ(fleiss_kappa({single}), 1.0);
  EXPECT_THROW(fleiss_kappa({set_of("z", {{0, 1}})}), ValidationError);
  EXPECT_THROW(fleiss_kappa({set_of("a", {{0}, {0}}), set_of("b", {{0}, {0}, {0}})}),
               ValidationError);
}

TEST(FleissKappa, InvariantUnderCategoryPermutation) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<int>> labels(3, std::vector<int>(8));
    for (auto& a : labels)
      for (auto& d : a) d = static_cast<int>(rng.below(4));
    std::vector<int> perm = {0, 1, 2, 3};
    for (std::size_t i = 4; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    auto permuted = labels;
    for (auto& a : permuted)
      for (auto& d : a) d = perm[d];
    // label bounds are not checked by kappa itself
    EXPECT_NEAR(fleiss_kappa({set_of("x", labels)}), fleiss_kappa({set_of("x", permuted)}), 1e-12);
  }
}

TEST(HumanPerformance, Unanimous) {
  const auto s = set_of("x", {{0, 1, 1}, {0, 1, 1}, {0, 1, 1}});
  const auto h = human_performance({s});
  EXPECT_DOUBLE_EQ(h.mean, 1.0);
  EXPECT_DOUBLE_EQ(h.std, 0.0);
}

TEST(HumanPerformance, HandComputedThreeAnnotators) {
  // messages: r1 {0,1,1}, r2 {0,1,0}, r3 {0,0,0}
  // r1 vs {r2,r3}: (1 + 1/2 + 0)/3 = 1/2
  // r2 vs {r1,r3}: (1 + 1/2 + 1/2)/3 = 2/3
  // r3 vs {r1,r2}: (1 + 0 + 1/2)/3 = 1/2
  const auto s = set_of("x", {{0, 1, 1}, {0, 1, 0}, {0, 0, 0}});
  const auto h = human_performance({s});
  const double mean = (0.5 + 2.0 / 3.0 + 0.5) / 3.0;
  EXPECT_NEAR(h.mean, mean, 1e-15);
  const double var = (2 * (0.5 - mean) * (0.5 - mean) + (2.0 / 3.0 - mean) * (2.0 / 3.0 - mean)) / 3.0;
  EXPECT_NEAR(h.std, std::sqrt(var), 1e-15);
  EXPECT_NEAR(h.per_annotator.at("r2"), 2.0 / 3.0, 1e-15);
  EXPECT_THROW(human_performance({set_of("y", {{0}})}), ValidationError);
}

// Per-annotator components equal accuracy of that annotator against the
// others, pooled over the chats they labeled.
TEST(HumanPerformance, ComponentsMatchAccuracyAgainstOthers) {
  Rng rng(6);
  std::vector<AnnotationSet> sets;
  const std::vector<std::string> pool = {"p1", "p2", "p3", "p4", "p5", "p6"};
  for (int c = 0; c < 12; ++c) {
    AnnotationSet s{"c" + std::to_string(c), {}};
    const std::size_t n = 2 + rng.below(8);
    std::vector<std::string> who = pool;
    for (std::size_t i = who.size(); i > 1; --i) std::swap(who[i - 1], who[rng.below(i)]);
    for (int a = 0; a < 3; ++a) {
      std::vector<int> d(n);
      for (std::size_t i = 0; i < n; ++i) d[i] = static_cast<int>(rng.below(std::min<std::size_t>(i, 5) + 1));
      s.entries[who[a]] = labels_from_distances(d);
    }
    sets.push_back(s);
  }
  const auto h = human_performance(sets);
  for (const auto& [id, value] : h.per_annotator) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& s : sets) {
      auto it = s.entries.find(id);
      if (it == s.entries.end()) continue;
      AnnotationSet others = s;
      others.entries.erase(id);
      sum += accuracy_vs_random_annotator(it->second, others) * static_cast<double>(it->second.size());
      count += it->second.size();
    }
    EXPECT_NEAR(value, sum / static_cast<double>(count), 1e-12) << id;
  }
}

TEST(UpperBound, Examples) {
  EXPECT_DOUBLE_EQ(agreement_upper_bound({set_of("x", {{0, 1, 2}, {0, 1, 2}, {0, 1, 2}})}), 1.0);
  EXPECT_NEAR(agreement_upper_bound({set_of("x", {{0, 0, 0}, {0, 1, 1}, {0, 0, 2}})}),
              (1.0 + 2.0 / 3.0 + 1.0 / 3.0) / 3.0, 1e-15);
}

// Brute force over every label assignment for chats of <= 3 messages, W <= 2.
TEST(UpperBound, DominatesEveryAssignment) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int W = 1 + static_cast<int>(rng.below(2));
    const std::size_t n = 1 + rng.below(3);
    std::vector<std::vector<int>> per(3, std::vector<int>(n));
    for (auto& a : per)
      for (std::size_t i = 0; i < n; ++i)
        a[i] = static_cast<int>(rng.below(std::min<std::size_t>(i, W) + 1));
    const auto s = set_of("x", per);
    const double bound = agreement_upper_bound({s});
    std::vector<int> assign(n, 0);
    std::function<void(std::size_t)> rec = [&](std::size_t i) {
      if (i == n) {
        EXPECT_LE(accuracy_vs_random_annotator(labels_from_distances(assign), s), bound + 1e-15);
        return;
      }
      for (int d = 0; d <= std::min<int>(static_cast<int>(i), W); ++d) {
        assign[i] = d;
        rec(i + 1);
      }
    };
    rec(0);
  }
}

TEST(AgreementSummary, Fractions) {
  const auto s = set_of("x", {{0, 1, 1, 0}, {0, 1, 0, 1}, {0, 0, 2, 1}});
  const auto a = agreement_summary({s});
  EXPECT_EQ(a.n_messages, 4u);
  EXPECT_DOUBLE_EQ(a.unanimous, 0.25);
  EXPECT_DOUBLE_EQ(a.at_least_two, 0.75);
}

TEST(KFold, Examples) {
  const auto folds = kfold_split(10, 5, 1);
  ASSERT_EQ(folds.size(), 5u);
  std::set<std::size_t> all;
  for (const auto& f : folds) {
    EXPECT_EQ(f.test.size(), 2u);
    EXPECT_EQ(f.train.size(), 8u);
    for (auto i : f.test) EXPECT_TRUE(all.insert(i).second) << "chat in two test folds";
    for (auto i : f.test) EXPECT_EQ(std::count(f.train.begin(), f.train.end(), i), 0);
  }
  EXPECT_EQ(all.size(), 10u);
  const auto again = kfold_split(10, 5, 1);
  for (std::size_t f = 0; f < 5; ++f) EXPECT_EQ(again[f].test, folds[f].test);
  EXPECT_THROW(kfold_split(10, 1, 1), ValidationError);
  EXPECT_THROW(kfold_split(3, 5, 1), ValidationError);
}

TEST(KFold, UnevenSizesDifferByAtMostOne) {
  for (std::size_t n : {7u, 11u, 23u}) {
    const auto folds = kfold_split(n, 5, 42);
    std::size_t lo = n, hi = 0, total = 0;
    for (const auto& f : folds) {
      lo = std::min(lo, f.test.size());
      hi = std::max(hi, f.test.size());
      total += f.test.size();
    }
    EXPECT_LE(hi - lo, 1u);
    EXPECT_EQ(total, n);
  }
}

TEST(Evaluate, RandomAnnotatorAccuracyAndMajorityF1) {
  const auto s = set_of("x", {{0, 1, 1, 1}, {0, 1, 1, 0}, {0, 0, 1, 1}});
  const auto r = evaluate({labels_from_distances({0, 0, 0, 0})}, {s});
  EXPECT_NEAR(r.accuracy, (1.0 + 1.0 / 3.0 + 0.0 + 1.0 / 3.0) / 4.0, 1e-15);
  EXPECT_NEAR(r.weighted_f1, 0.1, 1e-15);  // majority gold is {0,1,1,1}
}

TEST(Report, TableHasOneLinePerRow) {
  MetricReport r;
  r.accuracy = 0.5;
  r.weighted_f1 = 0.25;
  const auto t = format_table({{"Rule-based Baseline 1", r}, {"Discriminative", r}});
  EXPECT_EQ(std::count(t.begin(), t.end(), '\n'), 3);
  EXPECT_NE(t.find("0.5000"), std::string::npos);
  EXPECT_EQ(report_to_json(r)["weighted_f1"], 0.25);
}

}  // namespace
}  // namespace chatlink
