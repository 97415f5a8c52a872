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

#include "chatlink/features.hpp"

#include <set>
#include <tuple>

#include <gtest/gtest.h>

#include "chatlink/rng.hpp"

namespace chatlink {
namespace {

Message msg(Speaker s, std::vector<std::string> tokens) {
  Message m;
  m.speaker = s;
  m.tokens = std::move(tokens);
  return m;
}

TEST(MessageFeatures, Examples) {
  const LexiconSet en = LexiconSet::english();
  EXPECT_EQ(message_features(msg(Speaker::Agent, {"<URL>"}), en), (FeatureVec{0, 0, 0, 1, 0, 0}));

  LexiconSet zh;
  zh.answer_words = {"好的"};
  const FeatureVec q = message_features(msg(Speaker::Customer, {"价格", "?"}), zh);
  EXPECT_EQ(q[kSpeakerFeature], 1);
  EXPECT_EQ(q[kQuestionFeature], 1);
  EXPECT_EQ(message_features(msg(Speaker::Customer, {"价格", "\xEF\xBC\x9F"}), zh)[kQuestionFeature], 1);
  const FeatureVec a = message_features(msg(Speaker::Customer, {"好的"}), zh);
  EXPECT_EQ(a[kAnswerFeature], 1);
  EXPECT_EQ(a[kQuestionFeature], 0);

  EXPECT_EQ(message_features(msg(Speaker::Customer, {"how", "<IMG>", "<EMO>"}), en),
            (FeatureVec{1, 1, 0, 0, 1, 1}));
}

TEST(CandidateSet, Examples) {
  EXPECT_EQ(candidate_set(0, 5), (std::vector<int>{0}));
  EXPECT_EQ(candidate_set(3, 5), (std::vector<int>{0, 1, 2, 3}));
  EXPECT_EQ(candidate_set(9, 5), (std::vector<int>{4, 5, 6, 7, 8, 9}));
}

TEST(ParamIndexer, LayoutAndDimension) {
  for (std::size_t K : {1u, 2u, 6u}) {
    for (int W : {1, 3, 5}) {
      const ParamIndexer base(K, W, Mode::Base), lda(K, W, Mode::WithLda);
      EXPECT_EQ(base.dimension(), 4 * K * K + W + 2 * K);
      EXPECT_EQ(lda.dimension(), base.dimension() + 1);
      EXPECT_EQ(base.tau_offset(), base.eta_offset() + base.eta_size());
      EXPECT_EQ(base.pi_offset(), base.tau_offset() + base.tau_size());
      EXPECT_EQ(lda.cross(), lda.dimension() - 1);
      EXPECT_THROW(base.cross(), ValidationError);
    }
  }
  EXPECT_EQ(ParamIndexer().dimension(), 4u * 36 + 5 + 12);
}

TEST(ParamIndexer, EncodeDecodeRoundTrip) {
  const ParamIndexer ix(3, 4, Mode::WithLda);
  std::set<std::size_t> seen;
  for (std::size_t i = 0; i < ix.dimension(); ++i) {
    const auto c = ix.decode(i);
    EXPECT_EQ(ix.encode(c), i);
    seen.insert(i);
  }
  EXPECT_EQ(seen.size(), ix.dimension());
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t l = 0; l < 3; ++l)
      for (std::size_t a = 0; a < 2; ++a)
        for (std::size_t b = 0; b < 2; ++b) {
          ParamIndexer::Coord c{ParamIndexer::Block::Eta, k, l, a, b, 0};
          EXPECT_EQ(ix.decode(ix.encode(c)), c);
        }
  EXPECT_THROW(ix.decode(ix.dimension()), ValidationError);
}

TEST(ActiveIndices, SelfAndPairBranches) {
  const ParamIndexer ix;
  const FeatureVec f{1, 0, 1, 0, 0, 1}, g{0, 1, 0, 0, 1, 0};
  const auto self = active_indices(4, 4, f, f, ix);
  ASSERT_EQ(self.size(), kFeatureCount);
  for (const auto& a : self) EXPECT_EQ(ix.decode(a.index).block, ParamIndexer::Block::Pi);

  const auto pair = active_indices(4, 2, f, g, ix);
  ASSERT_EQ(pair.size(), kFeatureCount * kFeatureCount + 1);
  std::size_t eta = 0, tau = 0;
  for (const auto& a : pair) {
    const auto c = ix.decode(a.index);
    eta += c.block == ParamIndexer::Block::Eta;
    if (c.block == ParamIndexer::Block::Tau) {
      ++tau;
      EXPECT_EQ(c.m, 2);
    }
  }
  EXPECT_EQ(eta, kFeatureCount * kFeatureCount);
  EXPECT_EQ(tau, 1u);
}

TEST(ActiveIndices, WorkedTwoFeatureExample) {
  const ParamIndexer ix(2, 5);
  const auto act = active_indices(5, 4, FeatureVec{1, 0}, FeatureVec{0, 1}, ix);
  std::set<std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>> eta;
  int tau_m = -1;
  for (const auto& a : act) {
    EXPECT_EQ(a.value, 1.0);
    const auto c = ix.decode(a.index);
    if (c.block == ParamIndexer::Block::Eta) eta.insert({c.k, c.l, c.a, c.b});
    if (c.block == ParamIndexer::Block::Tau) tau_m = c.m;
  }
  const std::set<std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>> expected = {
      {0, 0, 1, 0}, {0, 1, 1, 1}, {1, 0, 0, 0}, {1, 1, 0, 1}};
  EXPECT_EQ(eta, expected);
  EXPECT_EQ(tau_m, 1);
  EXPECT_EQ(act.size(), 5u);
}

TEST(ActiveIndices, CrossWeightInLdaMode) {
  const ParamIndexer ix(2, 5, Mode::WithLda);
  const auto act = active_indices(3, 1, FeatureVec{1, 0}, FeatureVec{0, 1}, ix, -0.75);
  ASSERT_EQ(act.size(), 6u);
  EXPECT_EQ(act.back().index, ix.cross());
  EXPECT_EQ(act.back().value, -0.75);
  EXPECT_THROW(active_indices(3, 1, FeatureVec{1, 0}, FeatureVec{0, 1}, ix), ValidationError);
  EXPECT_THROW(active_indices(3, 1, FeatureVec{1, 0}, FeatureVec{0, 1}, ParamIndexer(2, 5), -0.5),
               ValidationError);
}

TEST(ActiveIndices, RejectsJOutsideCandidates) {
  const ParamIndexer ix(2, 2);
  const FeatureVec f{0, 0};
  EXPECT_THROW(active_indices(5, 2, f, f, ix), ValidationError);
  EXPECT_THROW(active_indices(2, 3, f, f, ix), ValidationError);
  EXPECT_THROW(active_indices(2, -1, f, f, ix), ValidationError);
  EXPECT_THROW(active_indices(2, 1, FeatureVec{0, 0, 0}, f, ix), ValidationError);
}

// Exactly one (a, b) cell per (k, l); indices in bounds and distinct.
TEST(ActiveIndices, RandomizedProperties) {
  Rng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t K = 1 + rng.below(6);
    const int W = 1 + static_cast<int>(rng.below(6));
    const ParamIndexer ix(K, W);
    FeatureVec fi{std::vector<std::uint8_t>(K)}, fj{std::vector<std::uint8_t>(K)};
    for (std::size_t k = 0; k < K; ++k) fi[k] = rng.bernoulli(0.5), fj[k] = rng.bernoulli(0.5);
    const int i = static_cast<int>(rng.below(20));
    const auto cands = candidate_set(i, W);
    const int j = cands[rng.below(cands.size())];
    const auto act = active_indices(i, j, fi, fj, ix);
    std::set<std::size_t> idx;
    std::set<std::pair<std::size_t, std::size_t>> kl;
    for (const auto& a : act) {
      ASSERT_LT(a.index, ix.dimension());
      idx.insert(a.index);
      const auto c = ix.decode(a.index);
      if (c.block == ParamIndexer::Block::Eta) {
        kl.emplace(c.k, c.l);
        EXPECT_EQ(c.a, fi[c.k]);
        EXPECT_EQ(c.b, fj[c.l]);
      }
    }
    EXPECT_EQ(idx.size(), act.size());
    if (i != j) {
      EXPECT_EQ(kl.size(), K * K);
    } else {
      EXPECT_EQ(act.size(), K);
    }
  }
}

}  // namespace
}  // namespace chatlink
