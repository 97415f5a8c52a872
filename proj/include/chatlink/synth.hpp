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

#pragma once

// Synthetic chats whose gold links are drawn from the link model itself under
// a known coefficient vector, for recovery and end-to-end checks.

#include <array>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "chatlink/corpus.hpp"
#include "chatlink/error.hpp"
#include "chatlink/features.hpp"
#include "chatlink/model.hpp"
#include "chatlink/rng.hpp"

namespace chatlink {

using FeatureRates = std::array<double, kFeatureCount>;

struct SynthConfig {
  std::size_t n_chats = 100;
  std::size_t min_len = 10;
  std::size_t max_len = 35;
  double alternation = 0.5;  // P(next speaker differs)
  double customer_first = 0.5;
  // Bernoulli rates per feature; entry 0 (speaker identity) is ignored.
  FeatureRates customer_rates{0.0, 0.40, 0.15, 0.05, 0.10, 0.15};
  FeatureRates agent_rates{0.0, 0.15, 0.40, 0.15, 0.05, 0.10};
  double feature_noise = 0.0;  // flip rate of observed (not generating) features
  int topics = 3;
  int words_per_topic = 20;
  std::size_t min_tokens = 2;
  std::size_t max_tokens = 6;
  double topic_follow = 0.8;  // P(message reuses its antecedent's topic)
  std::size_t annotators = 3;
  double disagreement = 0.0;  // per-annotator label corruption rate
  Parameters theta_star;
  std::uint64_t seed = 0;

  void validate() const {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    bool ok = prob(alternation) && prob(customer_first) && prob(feature_noise) &&
              prob(topic_follow) && prob(disagreement);
    for (std::size_t k = 0; k < kFeatureCount; ++k)
      ok = ok && prob(customer_rates[k]) && prob(agent_rates[k]);
    if (!ok) throw ValidationError("synthetic probabilities must lie in [0, 1]");
    if (min_len < 1 || min_len > max_len) throw ValidationError("bad synthetic length range");
    if (min_tokens > max_tokens) throw ValidationError("bad synthetic token range");
    if (topics < 1 || words_per_topic < 1) throw ValidationError("bad synthetic topic table");
    if (annotators < 1) throw ValidationError("need at least one synthetic annotator");
    if (theta_star.indexer.features() != kFeatureCount || theta_star.mode() != Mode::Base)
      throw ValidationError("theta_star must be a base-mode model over the six message features");
  }
};

// Pairwise-heavy generator: answers link back to questions, agents answer
// customers, emoticons follow emoticons. Neither rule baseline can express it.
inline Parameters default_theta_star(int window = kDefaultWindow) {
  ParamIndexer ix(kFeatureCount, window, Mode::Base);
  Parameters p(ix);
  const double tau[] = {1.2, 0.4, -0.2, -0.6, -1.0};
  for (int m = 1; m <= window; ++m) p[ix.tau(m)] = tau[std::min(m, 5) - 1];
  p[ix.pi(kSpeakerFeature, 1)] = 0.3;
  p[ix.pi(kQuestionFeature, 1)] = 0.5;
  p[ix.pi(kUrlFeature, 1)] = 0.4;
  p[ix.pi(kAnswerFeature, 1)] = -1.0;
  p[ix.eta(kAnswerFeature, kQuestionFeature, 1, 1)] = 2.0;
  p[ix.eta(kSpeakerFeature, kSpeakerFeature, 0, 1)] = 1.0;
  p[ix.eta(kSpeakerFeature, kSpeakerFeature, 0, 0)] = -0.8;
  p[ix.eta(kSpeakerFeature, kSpeakerFeature, 1, 0)] = 0.6;
  p[ix.eta(kEmoticonFeature, kEmoticonFeature, 1, 1)] = 0.8;
  p[ix.eta(kUrlFeature, kQuestionFeature, 1, 1)] = 0.7;
  p[ix.eta(kImageFeature, kSpeakerFeature, 1, 0)] = 0.5;
  return p;
}

inline std::string topic_word(int topic, int k) {
  return "t" + std::to_string(topic) + "w" + std::to_string(k);
}

// Zipf-shaped unigram table over a topic's private words.
inline std::vector<double> topic_table(int words_per_topic) {
  std::vector<double> p(static_cast<std::size_t>(words_per_topic));
  double z = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) z += (p[k] = 1.0 / static_cast<double>(k + 1));
  for (auto& v : p) v /= z;
  return p;
}

// Surface tokens that make message_features (with the English lexicon, after
// type replacement) reproduce a feature value.
inline constexpr std::array<const char*, kFeatureCount> kFeatureTokens = {
    "", "?", "ok", "http://example.com/item", "[img]", ":)"};

struct SynthCorpus {
  std::vector<Chat> chats;  // raw tokens, flags = observed features
  std::vector<std::vector<LinkLabel>> gold;
  std::vector<AnnotationSet> annotations;
  std::vector<std::vector<int>> message_topics;
};

inline std::string synth_chat_id(std::size_t c) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "synth-%05zu", c);
  return buf;
}

inline SynthCorpus sample_corpus(const SynthConfig& cfg) {
  cfg.validate();
  const auto& ix = cfg.theta_star.indexer;
  const int W = ix.window();
  const auto table = topic_table(cfg.words_per_topic);
  SynthCorpus out;
  for (std::size_t c = 0; c < cfg.n_chats; ++c) {
    Chat chat;
    chat.chat_id = synth_chat_id(c);
    Rng rng(derive_seed(cfg.seed, chat.chat_id));
    const std::size_t len = cfg.min_len + rng.below(cfg.max_len - cfg.min_len + 1);

    std::vector<FeatureVec> truth;
    Speaker s = rng.bernoulli(cfg.customer_first) ? Speaker::Customer : Speaker::Agent;
    for (std::size_t i = 0; i < len; ++i) {
      if (i > 0 && rng.bernoulli(cfg.alternation))
        s = s == Speaker::Customer ? Speaker::Agent : Speaker::Customer;
      const auto& rates = s == Speaker::Customer ? cfg.customer_rates : cfg.agent_rates;
      FeatureVec f(std::vector<std::uint8_t>(kFeatureCount, 0));
      f[kSpeakerFeature] = s == Speaker::Customer;
      for (std::size_t k = 1; k < kFeatureCount; ++k) f[k] = rng.bernoulli(rates[k]);
      truth.push_back(f);
      Message m;
      m.index = static_cast<int>(i);
      m.speaker = s;
      m.flags = f;
      chat.messages.push_back(std::move(m));
    }

    // Gold links under theta*, then topics that follow the links.
    const EncodedChat enc = encode_chat(chat, ix);
    std::vector<LinkLabel> gold;
    std::vector<int> topics;
    for (std::size_t i = 0; i < len; ++i) {
      const auto& cands = enc.messages[i].candidates;
      std::vector<double> p;
      for (const auto& cand : cands) p.push_back(dot(cand.active, cfg.theta_star.theta));
      softmax_inplace(p);
      const int d = cands[rng.categorical(p)].distance;
      gold.push_back({static_cast<int>(i), d});
      int topic;
      if (d > 0 && rng.bernoulli(cfg.topic_follow))
        topic = topics[i - static_cast<std::size_t>(d)];
      else
        topic = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.topics)));
      topics.push_back(topic);
    }

    for (std::size_t i = 0; i < len; ++i) {
      auto& m = chat.messages[i];
      FeatureVec observed = truth[i];
      for (std::size_t k = 1; k < kFeatureCount; ++k)
        if (cfg.feature_noise > 0.0 && rng.bernoulli(cfg.feature_noise)) observed[k] ^= 1;
      const std::size_t n = cfg.min_tokens + rng.below(cfg.max_tokens - cfg.min_tokens + 1);
      for (std::size_t q = 0; q < n; ++q)
        m.tokens.push_back(topic_word(topics[i], static_cast<int>(rng.categorical(table))));
      for (std::size_t k = 1; k < kFeatureCount; ++k)
        if (observed[k]) m.tokens.emplace_back(kFeatureTokens[k]);
      m.flags = observed;
      for (const auto& t : m.tokens) m.raw_text += (m.raw_text.empty() ? "" : " ") + t;
    }

    AnnotationSet ann{chat.chat_id, {}};
    for (std::size_t a = 0; a < cfg.annotators; ++a) {
      std::vector<LinkLabel> labels = gold;
      if (cfg.disagreement > 0.0) {
        for (auto& l : labels) {
          const int top = std::min(W, l.message_index);
          if (top > 0 && rng.bernoulli(cfg.disagreement)) {
            int d = static_cast<int>(rng.below(static_cast<std::uint64_t>(top)));
            l.distance = d >= l.distance ? d + 1 : d;
          }
        }
      }
      ann.entries.emplace("synth" + std::to_string(a + 1), std::move(labels));
    }

    out.chats.push_back(std::move(chat));
    out.gold.push_back(std::move(gold));
    out.annotations.push_back(std::move(ann));
    out.message_topics.push_back(std::move(topics));
  }
  return out;
}

// Exact-match accuracy of argmax decoding under theta* against the gold links.
inline double oracle_accuracy(const Parameters& theta_star, const std::vector<Chat>& chats,
                              const std::vector<std::vector<LinkLabel>>& gold) {
  if (chats.size() != gold.size()) throw ValidationError("gold does not match chats");
  std::size_t hit = 0, total = 0;
  for (std::size_t c = 0; c < chats.size(); ++c) {
    const auto pred = predict(chats[c], theta_star);
    for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i].distance == gold[c].at(i).distance;
    total += pred.size();
  }
  return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
}

}  // namespace chatlink
