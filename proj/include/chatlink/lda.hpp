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

// Collapsed Gibbs LDA with messages as documents, the per-message topic
// distributions and the Cross(i, j) similarity feature.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "chatlink/corpus.hpp"
#include "chatlink/error.hpp"
#include "chatlink/rng.hpp"

namespace chatlink {

inline constexpr int kLdaFileVersion = 1;

struct TopicDist {
  std::vector<double> phi;

  std::size_t size() const { return phi.size(); }
  double operator[](std::size_t t) const { return phi[t]; }
};

// Sum_t p_t ln q_t. Always <= 0 for normalized inputs.
inline double cross_feature(const TopicDist& p, const TopicDist& q) {
  if (p.size() != q.size() || p.size() == 0)
    throw ValidationError("topic distributions differ in length");
  double s = 0.0;
  for (std::size_t t = 0; t < p.size(); ++t) {
    if (!(q[t] > 0.0)) throw ValidationError("zero component in topic distribution");
    s += p[t] * std::log(q[t]);
  }
  return s;
}

struct LdaConfig {
  int topics = 20;
  double alpha = 0.1;
  double beta = 0.01;
  int iterations = 1000;
  int burn_in = 500;
  int sample_lag = 10;
  std::uint64_t seed = 0;
  int chain = 0;

  void validate() const {
    if (topics < 2) throw ValidationError("LDA needs at least 2 topics");
    if (!(alpha > 0.0) || !(beta > 0.0))
      throw ValidationError("LDA priors must be positive");
    if (iterations < 1 || burn_in < 0 || sample_lag < 1)
      throw ValidationError("LDA iteration settings must be positive");
  }
  std::uint64_t chain_seed() const {
    return derive_seed(seed, "lda-chain-" + std::to_string(chain));
  }
};

// Messages of a chat corpus as word-id documents.
struct LdaCorpus {
  std::vector<std::string> words;
  std::vector<std::vector<int>> docs;
  std::vector<std::pair<std::string, std::size_t>> documents;  // chat_id, n_messages
};

inline LdaCorpus lda_corpus_from_chats(const std::vector<Chat>& chats) {
  LdaCorpus out;
  std::map<std::string, int> ids;
  for (const auto& c : chats)
    for (const auto& m : c.messages)
      for (const auto& t : m.tokens) ids.emplace(t, 0);
  for (auto& [w, id] : ids) {
    id = static_cast<int>(out.words.size());
    out.words.push_back(w);
  }
  for (const auto& c : chats) {
    out.documents.emplace_back(c.chat_id, c.size());
    for (const auto& m : c.messages) {
      std::vector<int> doc;
      doc.reserve(m.tokens.size());
      for (const auto& t : m.tokens) doc.push_back(ids.at(t));
      out.docs.push_back(std::move(doc));
    }
  }
  return out;
}

// One collapsed Gibbs chain. Exposed so callers can step sweeps and inspect
// the instantaneous counts.
class GibbsSampler {
 public:
  GibbsSampler(const std::vector<std::vector<int>>& docs, std::size_t vocab_size,
               const LdaConfig& cfg)
      : docs_(docs),
        topics_(static_cast<std::size_t>(cfg.topics)),
        vocab_(vocab_size),
        alpha_(cfg.alpha),
        beta_(cfg.beta),
        rng_(cfg.chain_seed()),
        doc_topic_(docs.size() * topics_, 0),
        topic_word_(topics_ * vocab_size, 0),
        topic_total_(topics_, 0),
        weights_(topics_) {
    cfg.validate();
    if (vocab_size == 0) throw ValidationError("LDA needs a non-empty vocabulary");
    assignments_.resize(docs.size());
    for (std::size_t d = 0; d < docs.size(); ++d) {
      assignments_[d].resize(docs[d].size());
      for (std::size_t n = 0; n < docs[d].size(); ++n) {
        const auto w = static_cast<std::size_t>(docs[d][n]);
        if (w >= vocab_size) throw ValidationError("word id out of range");
        const auto t = static_cast<std::size_t>(rng_.below(topics_));
        assignments_[d][n] = static_cast<int>(t);
        add(d, w, t, 1);
      }
    }
  }

  void sweep() {
    const double vbeta = static_cast<double>(vocab_) * beta_;
    for (std::size_t d = 0; d < docs_.size(); ++d) {
      for (std::size_t n = 0; n < docs_[d].size(); ++n) {
        const auto w = static_cast<std::size_t>(docs_[d][n]);
        const auto old = static_cast<std::size_t>(assignments_[d][n]);
        add(d, w, old, -1);
        for (std::size_t t = 0; t < topics_; ++t) {
          weights_[t] = (doc_topic_[d * topics_ + t] + alpha_) *
                        (topic_word_[t * vocab_ + w] + beta_) /
                        (topic_total_[t] + vbeta);
        }
        const auto t = rng_.categorical(weights_);
        assignments_[d][n] = static_cast<int>(t);
        add(d, w, t, 1);
      }
    }
  }

  std::size_t topics() const { return topics_; }
  std::size_t vocab_size() const { return vocab_; }
  std::size_t doc_count() const { return docs_.size(); }
  std::int64_t doc_topic(std::size_t d, std::size_t t) const {
    return doc_topic_[d * topics_ + t];
  }
  std::int64_t topic_word(std::size_t t, std::size_t w) const {
    return topic_word_[t * vocab_ + w];
  }
  std::int64_t topic_total(std::size_t t) const { return topic_total_[t]; }
  const std::vector<std::vector<int>>& assignments() const { return assignments_; }

 private:
  void add(std::size_t d, std::size_t w, std::size_t t, int delta) {
    doc_topic_[d * topics_ + t] += delta;
    topic_word_[t * vocab_ + w] += delta;
    topic_total_[t] += delta;
  }

  const std::vector<std::vector<int>>& docs_;
  std::size_t topics_;
  std::size_t vocab_;
  double alpha_, beta_;
  Rng rng_;
  std::vector<std::vector<int>> assignments_;
  std::vector<std::int64_t> doc_topic_;
  std::vector<std::int64_t> topic_word_;
  std::vector<std::int64_t> topic_total_;
  std::vector<double> weights_;
};

class LdaModel {
 public:
  LdaModel() = default;
  LdaModel(int topics, double alpha, double beta, std::vector<std::string> words,
           std::vector<std::pair<std::string, std::size_t>> documents,
           std::vector<std::vector<double>> doc_topic,
           std::vector<std::vector<double>> topic_word)
      : topics_(topics),
        alpha_(alpha),
        beta_(beta),
        words_(std::move(words)),
        documents_(std::move(documents)),
        doc_topic_(std::move(doc_topic)),
        topic_word_(std::move(topic_word)) {
    check();
    index();
  }

  int topics() const { return topics_; }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  const std::vector<std::string>& words() const { return words_; }
  const std::vector<std::pair<std::string, std::size_t>>& documents() const {
    return documents_;
  }
  const std::vector<std::vector<double>>& doc_topic_counts() const { return doc_topic_; }
  const std::vector<std::vector<double>>& topic_word_counts() const { return topic_word_; }
  std::size_t doc_count() const { return doc_topic_.size(); }

  std::uint64_t vocab_hash() const {
    std::string blob;
    for (const auto& w : words_) blob += w + '\n';
    return fnv1a(blob);
  }

  // Offset of the chat's first message among the documents, if the chat was
  // part of the training corpus.
  std::optional<std::size_t> chat_offset(const std::string& chat_id,
                                         std::size_t n_messages) const {
    auto it = chat_offsets_.find(chat_id);
    if (it == chat_offsets_.end()) return std::nullopt;
    if (documents_[it->second.second].second != n_messages) return std::nullopt;
    return it->second.first;
  }

  std::optional<int> word_id(const std::string& w) const {
    auto it = word_ids_.find(w);
    if (it == word_ids_.end()) return std::nullopt;
    return it->second;
  }

  // Smoothed topic-word distribution of topic t.
  std::vector<double> topic_word_distribution(std::size_t t) const {
    const auto& row = topic_word_.at(t);
    double total = 0.0;
    for (double c : row) total += c;
    std::vector<double> out(row.size());
    const double denom = total + static_cast<double>(row.size()) * beta_;
    for (std::size_t w = 0; w < row.size(); ++w) out[w] = (row[w] + beta_) / denom;
    return out;
  }

 private:
  void check() const {
    if (topics_ < 2) throw ValidationError("LDA model needs at least 2 topics");
    for (const auto& row : doc_topic_)
      if (row.size() != static_cast<std::size_t>(topics_))
        throw ValidationError("doc_topic_counts row has wrong length");
    if (topic_word_.size() != static_cast<std::size_t>(topics_))
      throw ValidationError("topic_word_counts has wrong number of topics");
    for (const auto& row : topic_word_)
      if (row.size() != words_.size())
        throw ValidationError("topic_word_counts row has wrong length");
    std::size_t n = 0;
    for (const auto& d : documents_) n += d.second;
    if (n != doc_topic_.size())
      throw ValidationError("document index does not match doc_topic_counts");
  }

  void index() {
    std::size_t offset = 0;
    for (std::size_t i = 0; i < documents_.size(); ++i) {
      chat_offsets_.emplace(documents_[i].first, std::make_pair(offset, i));
      offset += documents_[i].second;
    }
    for (std::size_t w = 0; w < words_.size(); ++w)
      word_ids_.emplace(words_[w], static_cast<int>(w));
  }

  int topics_ = 2;
  double alpha_ = 0.1;
  double beta_ = 0.01;
  std::vector<std::string> words_;
  std::vector<std::pair<std::string, std::size_t>> documents_;
  std::vector<std::vector<double>> doc_topic_;
  std::vector<std::vector<double>> topic_word_;
  std::unordered_map<std::string, std::pair<std::size_t, std::size_t>> chat_offsets_;
  std::unordered_map<std::string, int> word_ids_;
};

namespace detail {
// Runs a chain and averages the counts of the retained samples (every
// sample_lag sweeps after burn_in). Falls back to the last state when no
// sweep qualifies.
template <typename OnSample>
void run_chain(GibbsSampler& s, const LdaConfig& cfg, OnSample&& on_sample) {
  int retained = 0;
  for (int it = 1; it <= cfg.iterations; ++it) {
    s.sweep();
    if (it > cfg.burn_in && (it - cfg.burn_in) % cfg.sample_lag == 0) {
      on_sample();
      ++retained;
    }
  }
  if (retained == 0) on_sample();
}
}  // namespace detail

inline LdaModel gibbs_train(const LdaCorpus& corpus, const LdaConfig& cfg) {
  cfg.validate();
  GibbsSampler s(corpus.docs, corpus.words.size(), cfg);
  const std::size_t T = s.topics();
  const std::size_t V = s.vocab_size();
  std::vector<std::vector<double>> dt(corpus.docs.size(), std::vector<double>(T, 0.0));
  std::vector<std::vector<double>> tw(T, std::vector<double>(V, 0.0));
  int samples = 0;
  detail::run_chain(s, cfg, [&] {
    ++samples;
    for (std::size_t d = 0; d < dt.size(); ++d)
      for (std::size_t t = 0; t < T; ++t) dt[d][t] += static_cast<double>(s.doc_topic(d, t));
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t w = 0; w < V; ++w) tw[t][w] += static_cast<double>(s.topic_word(t, w));
  });
  for (auto& row : dt)
    for (auto& c : row) c /= samples;
  for (auto& row : tw)
    for (auto& c : row) c /= samples;
  return LdaModel(cfg.topics, cfg.alpha, cfg.beta, corpus.words, corpus.documents,
                  std::move(dt), std::move(tw));
}

inline TopicDist topic_dist_from_counts(const std::vector<double>& counts, double alpha) {
  const double T = static_cast<double>(counts.size());
  double n = 0.0;
  for (double c : counts) n += c;
  TopicDist out{std::vector<double>(counts.size())};
  for (std::size_t t = 0; t < counts.size(); ++t)
    out.phi[t] = (counts[t] + alpha) / (n + T * alpha);
  return out;
}

// Phi_it = (nbar_it + alpha) / (nbar_i + T alpha).
inline TopicDist message_topic_dist(const LdaModel& model, std::size_t doc) {
  if (doc >= model.doc_count())
    throw ValidationError("unknown LDA document " + std::to_string(doc));
  return topic_dist_from_counts(model.doc_topic_counts()[doc], model.alpha());
}

// Topic distribution of a message outside the training corpus, sampled with
// the topic-word counts held fixed. Unknown words are ignored.
inline TopicDist fold_in(const LdaModel& model, const std::vector<std::string>& tokens,
                         const LdaConfig& cfg, std::uint64_t seed) {
  const std::size_t T = static_cast<std::size_t>(model.topics());
  std::vector<std::size_t> ids;
  for (const auto& t : tokens)
    if (auto id = model.word_id(t)) ids.push_back(static_cast<std::size_t>(*id));
  std::vector<double> avg(T, 0.0);
  if (ids.empty()) return topic_dist_from_counts(avg, model.alpha());

  const double V = static_cast<double>(model.words().size());
  std::vector<double> topic_total(T, 0.0);
  for (std::size_t t = 0; t < T; ++t)
    for (double c : model.topic_word_counts()[t]) topic_total[t] += c;

  Rng rng(seed);
  std::vector<std::size_t> z(ids.size());
  std::vector<double> counts(T, 0.0), weights(T);
  for (auto& zt : z) {
    zt = static_cast<std::size_t>(rng.below(T));
    counts[zt] += 1.0;
  }
  int samples = 0;
  for (int it = 1; it <= cfg.iterations; ++it) {
    for (std::size_t n = 0; n < ids.size(); ++n) {
      counts[z[n]] -= 1.0;
      for (std::size_t t = 0; t < T; ++t)
        weights[t] = (counts[t] + model.alpha()) *
                     (model.topic_word_counts()[t][ids[n]] + model.beta()) /
                     (topic_total[t] + V * model.beta());
      z[n] = rng.categorical(weights);
      counts[z[n]] += 1.0;
    }
    if (it > cfg.burn_in && (it - cfg.burn_in) % cfg.sample_lag == 0) {
      for (std::size_t t = 0; t < T; ++t) avg[t] += counts[t];
      ++samples;
    }
  }
  if (samples == 0) {
    avg = counts;
  } else {
    for (auto& c : avg) c /= samples;
  }
  return topic_dist_from_counts(avg, model.alpha());
}

// Phi for every message of a chat: looked up when the chat was in the LDA
// training corpus, folded in otherwise.
inline std::vector<TopicDist> chat_topic_dists(const LdaModel& model, const Chat& chat,
                                               const LdaConfig& cfg) {
  std::vector<TopicDist> out;
  out.reserve(chat.size());
  if (auto off = model.chat_offset(chat.chat_id, chat.size())) {
    for (std::size_t i = 0; i < chat.size(); ++i)
      out.push_back(message_topic_dist(model, *off + i));
    return out;
  }
  for (std::size_t i = 0; i < chat.size(); ++i)
    out.push_back(fold_in(model, chat.messages[i].tokens, cfg,
                          derive_seed(cfg.chain_seed(),
                                      chat.chat_id + "#" + std::to_string(i))));
  return out;
}

inline json lda_to_json(const LdaModel& m) {
  json docs = json::array();
  for (const auto& [id, n] : m.documents()) docs.push_back({id, n});
  return {{"version", kLdaFileVersion},
          {"T", m.topics()},
          {"alpha", m.alpha()},
          {"beta", m.beta()},
          {"vocab_hash", hash_hex(m.vocab_hash())},
          {"words", m.words()},
          {"documents", std::move(docs)},
          {"doc_topic_counts", m.doc_topic_counts()},
          {"topic_word_counts", m.topic_word_counts()}};
}

inline LdaModel lda_from_json(const json& j) {
  try {
    if (j.at("version").get<int>() != kLdaFileVersion)
      throw ValidationError("unsupported LDA model version");
    std::vector<std::pair<std::string, std::size_t>> docs;
    for (const auto& d : j.at("documents"))
      docs.emplace_back(d.at(0).get<std::string>(), d.at(1).get<std::size_t>());
    LdaModel m(j.at("T").get<int>(), j.at("alpha").get<double>(),
               j.at("beta").get<double>(),
               j.at("words").get<std::vector<std::string>>(), std::move(docs),
               j.at("doc_topic_counts").get<std::vector<std::vector<double>>>(),
               j.at("topic_word_counts").get<std::vector<std::vector<double>>>());
    if (j.at("vocab_hash").get<std::string>() != hash_hex(m.vocab_hash()))
      throw ValidationError("LDA vocab_hash does not match its word list");
    return m;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed LDA model: ") + e.what());
  }
}

inline void save_lda(const std::filesystem::path& path, const LdaModel& m,
                     const json& extra = json::object()) {
  json j = lda_to_json(m);
  for (const auto& [k, v] : extra.items()) j[k] = v;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << j.dump() << '\n';
}

inline LdaModel load_lda(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("malformed LDA model " + path.string() + ": " + e.what());
  }
  return lda_from_json(j);
}

}  // namespace chatlink
