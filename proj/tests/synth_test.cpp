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

#include "chatlink/synth.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "chatlink/eval.hpp"
#include "chatlink/train.hpp"

namespace chatlink {
namespace {

SynthConfig base_config(std::size_t n, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.n_chats = n;
  cfg.theta_star = default_theta_star();
  cfg.seed = seed;
  return cfg;
}

TEST(Synth, DeterministicPerSeed) {
  const auto a = sample_corpus(base_config(20, 3));
  const auto b = sample_corpus(base_config(20, 3));
  const auto c = sample_corpus(base_config(20, 4));
  ASSERT_EQ(a.chats.size(), 20u);
  bool differs = false;
  for (std::size_t i = 0; i < a.chats.size(); ++i) {
    EXPECT_EQ(chat_to_json(a.chats[i]), chat_to_json(b.chats[i]));
    EXPECT_EQ(distances_of(a.gold[i]), distances_of(b.gold[i]));
    differs = differs || chat_to_json(a.chats[i]) != chat_to_json(c.chats[i]);
  }
  EXPECT_TRUE(differs);
}

TEST(Synth, ShapeAndRanges) {
  auto cfg = base_config(50, 5);
  cfg.min_len = 3;
  cfg.max_len = 9;
  const auto s = sample_corpus(cfg);
  for (std::size_t c = 0; c < s.chats.size(); ++c) {
    const auto& chat = s.chats[c];
    EXPECT_EQ(chat.chat_id, synth_chat_id(c));
    EXPECT_GE(chat.size(), 3u);
    EXPECT_LE(chat.size(), 9u);
    EXPECT_NO_THROW(validate_labels(s.gold[c], chat.size(), kDefaultWindow));
    EXPECT_EQ(s.annotations[c].entries.size(), 3u);
    for (const auto& [_, labels] : s.annotations[c].entries)
      EXPECT_EQ(distances_of(labels), distances_of(s.gold[c]));
  }
}

TEST(Synth, TokensReproduceFeatures) {
  auto cfg = base_config(30, 6);
  cfg.feature_noise = 0.2;
  const auto s = sample_corpus(cfg);
  const auto lx = LexiconSet::english();
  for (const auto& chat : s.chats) {
    const auto typed = with_features(replace_types(chat, lx), lx);
    for (std::size_t i = 0; i < chat.size(); ++i)
      EXPECT_EQ(typed.messages[i].flags, chat.messages[i].flags) << chat.chat_id << " " << i;
  }
}

TEST(Synth, AlternationOneGivesRatioOne) {
  auto cfg = base_config(20, 7);
  cfg.alternation = 1.0;
  for (const auto& chat : sample_corpus(cfg).chats) {
    EXPECT_DOUBLE_EQ(exchange_ratio(chat), 1.0);
    for (std::size_t i = 1; i < chat.size(); ++i)
      EXPECT_NE(chat.messages[i].speaker, chat.messages[i - 1].speaker);
  }
}

// With theta* = 0 every candidate is equally likely. Chi-squared over messages
// that have the full window, 5 degrees of freedom.
TEST(Synth, ZeroThetaGivesUniformLinks) {
  auto cfg = base_config(4200, 8);
  cfg.min_len = 25;
  cfg.max_len = 35;
  cfg.theta_star = Parameters(ParamIndexer(kFeatureCount, kDefaultWindow, Mode::Base));
  const auto s = sample_corpus(cfg);
  std::vector<double> counts(kDefaultWindow + 1, 0.0);
  double n = 0.0;
  for (const auto& g : s.gold)
    for (const auto& l : g)
      if (l.message_index >= kDefaultWindow) {
        counts[static_cast<std::size_t>(l.distance)] += 1.0;
        n += 1.0;
      }
  ASSERT_GE(n, 1e5);
  double chi2 = 0.0;
  const double expected = n / static_cast<double>(counts.size());
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  EXPECT_LT(chi2, 20.52);  // p = 0.001
}

TEST(Synth, DominantTauConcentratesLinks) {
  auto cfg = base_config(200, 9);
  cfg.theta_star = Parameters(ParamIndexer(kFeatureCount, kDefaultWindow, Mode::Base));
  cfg.theta_star[cfg.theta_star.indexer.tau(1)] = 5.0;
  const auto s = sample_corpus(cfg);
  double hits = 0.0, n = 0.0;
  for (const auto& g : s.gold)
    for (const auto& l : g)
      if (l.message_index > 0) {
        hits += l.distance == 1;
        n += 1.0;
      }
  EXPECT_GT(hits / n, 0.95);
}

TEST(Synth, OracleAccuracyLimits) {
  auto cfg = base_config(100, 10);
  cfg.theta_star = Parameters(ParamIndexer(kFeatureCount, kDefaultWindow, Mode::Base));
  cfg.theta_star[cfg.theta_star.indexer.tau(1)] = 50.0;
  const auto s = sample_corpus(cfg);
  EXPECT_DOUBLE_EQ(oracle_accuracy(cfg.theta_star, s.chats, s.gold), 1.0);

  auto flat = base_config(2000, 11);
  flat.theta_star = Parameters(ParamIndexer(kFeatureCount, kDefaultWindow, Mode::Base));
  flat.min_len = 30;
  flat.max_len = 35;
  const auto u = sample_corpus(flat);
  // zero theta predicts self; each message hits with probability 1/|candidates|
  double expected = 0.0, n = 0.0;
  for (const auto& chat : u.chats)
    for (std::size_t i = 0; i < chat.size(); ++i, n += 1.0)
      expected += 1.0 / static_cast<double>(std::min<std::size_t>(i, kDefaultWindow) + 1);
  EXPECT_NEAR(oracle_accuracy(flat.theta_star, u.chats, u.gold), expected / n, 0.01);
}

TEST(Synth, DisagreementCorruptsSomeLabels) {
  auto cfg = base_config(40, 12);
  cfg.disagreement = 0.3;
  const auto s = sample_corpus(cfg);
  double changed = 0.0, eligible = 0.0;
  for (std::size_t c = 0; c < s.chats.size(); ++c)
    for (const auto& [_, labels] : s.annotations[c].entries) {
      EXPECT_NO_THROW(validate_labels(labels, s.chats[c].size(), kDefaultWindow));
      for (std::size_t i = 1; i < labels.size(); ++i) {
        changed += labels[i].distance != s.gold[c][i].distance;
        eligible += 1.0;
      }
    }
  EXPECT_NEAR(changed / eligible, 0.3, 0.04);
}

TEST(Synth, Errors) {
  auto cfg = base_config(1, 0);
  cfg.alternation = 1.5;
  EXPECT_THROW(sample_corpus(cfg), ValidationError);
  cfg = base_config(1, 0);
  cfg.min_len = 5;
  cfg.max_len = 4;
  EXPECT_THROW(sample_corpus(cfg), ValidationError);
  cfg = base_config(1, 0);
  cfg.theta_star = Parameters(ParamIndexer(kFeatureCount, kDefaultWindow, Mode::WithLda));
  EXPECT_THROW(sample_corpus(cfg), ValidationError);
}

// Training on 500 synthetic chats recovers a model whose held-out accuracy is
// close to that of theta* itself and beats both rules.
TEST(Synth, ParameterRecovery) {
  const auto train_set = sample_corpus(base_config(500, 13));
  const auto test_set = sample_corpus(base_config(200, 14));
  std::vector<ChatGold> gold;
  for (const auto& g : train_set.gold) gold.push_back(gold_from_labels(g));
  TrainConfig tc;
  tc.lambda = 0.1;
  tc.threads = 4;
  const ParamIndexer ix(kFeatureCount, kDefaultWindow, Mode::Base);
  const auto fit = train(ix, train_set.chats, gold, tc);
  EXPECT_EQ(fit.report.status, OptimStatus::Converged);

  std::vector<std::vector<LinkLabel>> model, r1, r2;
  for (const auto& chat : test_set.chats) {
    model.push_back(predict(chat, fit.params));
    r1.push_back(rule1(chat));
    r2.push_back(rule2(chat));
  }
  const double oracle = oracle_accuracy(default_theta_star(), test_set.chats, test_set.gold);
  const double acc = accuracy_vs_random_annotator(model, test_set.annotations);
  EXPECT_GE(acc, oracle - 0.03);
  EXPECT_GT(acc, accuracy_vs_random_annotator(r1, test_set.annotations));
  EXPECT_GT(acc, accuracy_vs_random_annotator(r2, test_set.annotations));
}

}  // namespace
}  // namespace chatlink
