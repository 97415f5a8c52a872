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

// Log-linear link model: scores, candidate distributions, the L2-regularized
// negative conditional log-likelihood with its gradient, prediction and the
// model file.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "chatlink/corpus.hpp"
#include "chatlink/error.hpp"
#include "chatlink/features.hpp"
#include "chatlink/lda.hpp"

namespace chatlink {

inline constexpr int kModelFileVersion = 1;

struct Parameters {
  ParamIndexer indexer;
  std::vector<double> theta;

  Parameters() : Parameters(ParamIndexer()) {}
  explicit Parameters(ParamIndexer ix)
      : indexer(ix), theta(ix.dimension(), 0.0) {}
  Parameters(ParamIndexer ix, std::vector<double> values)
      : indexer(ix), theta(std::move(values)) {
    if (theta.size() != indexer.dimension())
      throw ValidationError("parameter dimension " + std::to_string(theta.size()) +
                            " does not match indexer dimension " +
                            std::to_string(indexer.dimension()));
  }

  Mode mode() const { return indexer.mode(); }
  double& operator[](std::size_t i) { return theta[i]; }
  double operator[](std::size_t i) const { return theta[i]; }
};

inline void require_mode(const Parameters& p, Mode expected) {
  if (p.mode() != expected)
    throw ValidationError("mode mismatch: model is " + std::string(mode_name(p.mode())) +
                          ", expected " + std::string(mode_name(expected)));
}

enum class LabelPolicy { Majority, AllAnnotations };

inline LabelPolicy parse_label_policy(std::string_view s) {
  if (s == "majority") return LabelPolicy::Majority;
  if (s == "all") return LabelPolicy::AllAnnotations;
  throw ValidationError("unknown label policy \"" + std::string(s) + "\" (majority|all)");
}

struct TrainConfig {
  double lambda = 1.0;
  int window = kDefaultWindow;
  LabelPolicy label_policy = LabelPolicy::Majority;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

// A gold antecedent distance with its instance weight.
struct GoldLink {
  int distance = 0;
  double weight = 1.0;
};

// Gold links of one chat, one list per message.
using ChatGold = std::vector<std::vector<GoldLink>>;

inline ChatGold gold_from_labels(const std::vector<LinkLabel>& labels) {
  ChatGold out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i].push_back({labels[i].distance, 1.0});
  return out;
}

inline ChatGold gold_from_annotations(const AnnotationSet& set, LabelPolicy policy) {
  if (policy == LabelPolicy::Majority) return gold_from_labels(majority_labels(set));
  if (set.entries.empty()) throw ValidationError("empty annotation set for chat " + set.chat_id);
  const std::size_t n = set.entries.begin()->second.size();
  const double w = 1.0 / static_cast<double>(set.entries.size());
  ChatGold out(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& [_, labels] : set.entries) {
      const int d = labels.at(i).distance;
      auto it = std::find_if(out[i].begin(), out[i].end(),
                             [d](const GoldLink& g) { return g.distance == d; });
      if (it == out[i].end())
        out[i].push_back({d, w});
      else
        it->weight += w;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Encoding
// ---------------------------------------------------------------------------

struct EncodedCandidate {
  int distance = 0;
  std::vector<ActiveFeature> active;
};

// Candidates in ascending antecedent order (descending distance).
struct EncodedMessage {
  std::vector<EncodedCandidate> candidates;
};

struct EncodedChat {
  std::vector<EncodedMessage> messages;
};

namespace detail {
inline const FeatureVec& flags_of(const Message& m) {
  if (!m.flags) throw ValidationError("message features not computed");
  return *m.flags;
}

inline std::optional<double> cross_for(std::span<const TopicDist> phi, int i, int j) {
  if (phi.empty()) return std::nullopt;
  return cross_feature(phi[i], phi[j]);
}

inline void check_phi(const ParamIndexer& ix, const Chat& chat,
                      std::span<const TopicDist> phi) {
  if (ix.has_cross() && phi.empty())
    throw ValidationError("missing topic distributions for lda mode");
  if (!ix.has_cross() && !phi.empty())
    throw ValidationError("mode mismatch: topic distributions given to base model");
  if (!phi.empty() && phi.size() != chat.size())
    throw ValidationError("topic distributions do not cover the chat");
}
}  // namespace detail

inline EncodedChat encode_chat(const Chat& chat, const ParamIndexer& ix,
                               std::span<const TopicDist> phi = {}) {
  detail::check_phi(ix, chat, phi);
  EncodedChat out;
  out.messages.resize(chat.size());
  for (std::size_t i = 0; i < chat.size(); ++i) {
    const int ii = static_cast<int>(i);
    const auto& fi = detail::flags_of(chat.messages[i]);
    for (int j : candidate_set(ii, ix.window())) {
      out.messages[i].candidates.push_back(
          {ii - j, active_indices(ii, j, fi, detail::flags_of(chat.messages[j]), ix,
                                  detail::cross_for(phi, ii, j))});
    }
  }
  return out;
}

inline double dot(const std::vector<ActiveFeature>& active, std::span<const double> theta) {
  double s = 0.0;
  for (const auto& a : active) s += theta[a.index] * a.value;
  return s;
}

// ---------------------------------------------------------------------------
// Scores and distributions
// ---------------------------------------------------------------------------

inline double link_score(int i, int j, const Chat& chat, const Parameters& p,
                         std::span<const TopicDist> phi = {}) {
  detail::check_phi(p.indexer, chat, phi);
  if (i < 0 || static_cast<std::size_t>(i) >= chat.size())
    throw ValidationError("message index out of range");
  if (j < 0 || j > i)
    throw ValidationError("candidate " + std::to_string(j) +
                          " outside candidate set of message " + std::to_string(i));
  const auto active = active_indices(i, j, detail::flags_of(chat.messages[i]),
                                     detail::flags_of(chat.messages[j]), p.indexer,
                                     detail::cross_for(phi, i, j));
  return dot(active, p.theta);
}

// Softmax with max-subtraction; writes probabilities over `scores` in place.
inline void softmax_inplace(std::vector<double>& scores) {
  const double mx = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (auto& s : scores) z += (s = std::exp(s - mx));
  for (auto& s : scores) s /= z;
}

inline double log_sum_exp(const std::vector<double>& scores) {
  const double mx = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double s : scores) z += std::exp(s - mx);
  return mx + std::log(z);
}

// Probabilities over candidate_set(i), ascending antecedent order.
inline std::vector<double> link_distribution(int i, const Chat& chat, const Parameters& p,
                                             std::span<const TopicDist> phi = {}) {
  std::vector<double> scores;
  for (int j : candidate_set(i, p.indexer.window()))
    scores.push_back(link_score(i, j, chat, p, phi));
  softmax_inplace(scores);
  return scores;
}

// Argmax per message; ties go to the smallest distance (self first).
inline std::vector<LinkLabel> predict_encoded(const EncodedChat& chat, std::span<const double> theta) {
  std::vector<LinkLabel> out;
  out.reserve(chat.messages.size());
  for (std::size_t i = 0; i < chat.messages.size(); ++i) {
    double best = -std::numeric_limits<double>::infinity();
    int best_d = 0;
    for (const auto& c : chat.messages[i].candidates) {
      const double s = dot(c.active, theta);
      if (s > best || (s == best && c.distance < best_d)) {
        best = s;
        best_d = c.distance;
      }
    }
    out.push_back({static_cast<int>(i), best_d});
  }
  return out;
}

inline std::vector<LinkLabel> predict(const Chat& chat, const Parameters& p,
                                      std::span<const TopicDist> phi = {}) {
  return predict_encoded(encode_chat(chat, p.indexer, phi), p.theta);
}

// ---------------------------------------------------------------------------
// Objective
// ---------------------------------------------------------------------------

// Regularized negative conditional log-likelihood over encoded chats.
// Per-chat partial sums are combined in chat order, so the result does not
// depend on the thread count.
class LinkObjective {
 public:
  LinkObjective(std::vector<EncodedChat> chats, std::vector<ChatGold> gold,
                std::size_t dimension, double lambda, unsigned threads = 1)
      : chats_(std::move(chats)),
        gold_(std::move(gold)),
        dim_(dimension),
        lambda_(lambda),
        threads_(std::max(1u, threads)) {
    if (lambda < 0.0) throw ValidationError("lambda must be non-negative");
    if (chats_.size() != gold_.size())
      throw ValidationError("gold labels do not match chats");
    for (std::size_t c = 0; c < chats_.size(); ++c) {
      if (gold_[c].size() != chats_[c].messages.size())
        throw ValidationError("gold labels do not cover every message");
      for (std::size_t i = 0; i < gold_[c].size(); ++i)
        for (const auto& g : gold_[c][i])
          if (!label_in_range(static_cast<int>(i), g.distance,
                              static_cast<int>(chats_[c].messages[i].candidates.size()) - 1))
            throw ValidationError("label out of candidate set: message " +
                                  std::to_string(i) + " distance " +
                                  std::to_string(g.distance));
    }
    partial_value_.assign(chats_.size(), 0.0);
    partial_grad_.assign(chats_.size(), std::vector<double>());
  }

  std::size_t dimension() const { return dim_; }
  std::size_t chat_count() const { return chats_.size(); }

  double operator()(std::span<const double> theta, std::span<double> grad) {
    if (theta.size() != dim_ || grad.size() != dim_)
      throw ValidationError("objective dimension mismatch");
    const std::size_t n = chats_.size();
    const unsigned nt = static_cast<unsigned>(std::min<std::size_t>(threads_, std::max<std::size_t>(n, 1)));
    if (nt <= 1) {
      for (std::size_t c = 0; c < n; ++c) evaluate_chat(c, theta);
    } else {
      std::vector<std::thread> pool;
      for (unsigned t = 0; t < nt; ++t) {
        pool.emplace_back([&, t] {
          for (std::size_t c = t; c < n; c += nt) evaluate_chat(c, theta);
        });
      }
      for (auto& th : pool) th.join();
    }
    double value = 0.0;
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t c = 0; c < n; ++c) {
      value += partial_value_[c];
      for (std::size_t k = 0; k < dim_; ++k) grad[k] += partial_grad_[c][k];
    }
    for (std::size_t k = 0; k < dim_; ++k) {
      value += lambda_ * theta[k] * theta[k];
      grad[k] += 2.0 * lambda_ * theta[k];
    }
    return value;
  }

  double value(std::span<const double> theta) {
    std::vector<double> g(dim_);
    return (*this)(theta, g);
  }

 private:
  void evaluate_chat(std::size_t c, std::span<const double> theta) {
    auto& g = partial_grad_[c];
    g.assign(dim_, 0.0);
    double v = 0.0;
    std::vector<double> scores;
    const auto& chat = chats_[c];
    for (std::size_t i = 0; i < chat.messages.size(); ++i) {
      const auto& cands = chat.messages[i].candidates;
      scores.resize(cands.size());
      for (std::size_t k = 0; k < cands.size(); ++k) scores[k] = dot(cands[k].active, theta);
      const double log_z = log_sum_exp(scores);
      double total_weight = 0.0;
      for (const auto& gl : gold_[c][i]) {
        // candidates are ordered by descending distance
        const auto& cand = cands[cands.size() - 1 - static_cast<std::size_t>(gl.distance)];
        v += gl.weight * (log_z - scores[cands.size() - 1 - static_cast<std::size_t>(gl.distance)]);
        for (const auto& a : cand.active) g[a.index] -= gl.weight * a.value;
        total_weight += gl.weight;
      }
      for (std::size_t k = 0; k < cands.size(); ++k) {
        const double p = std::exp(scores[k] - log_z) * total_weight;
        for (const auto& a : cands[k].active) g[a.index] += p * a.value;
      }
    }
    partial_value_[c] = v;
  }

  std::vector<EncodedChat> chats_;
  std::vector<ChatGold> gold_;
  std::size_t dim_;
  double lambda_;
  unsigned threads_;
  std::vector<double> partial_value_;
  std::vector<std::vector<double>> partial_grad_;
};

// One-shot evaluation; `phi` holds one entry per chat (empty in base mode).
struct ValueAndGradient {
  double value = 0.0;
  std::vector<double> grad;
};

inline ValueAndGradient nll_and_gradient(const Parameters& p, const std::vector<Chat>& chats,
                                         const std::vector<ChatGold>& gold,
                                         const TrainConfig& cfg,
                                         const std::vector<std::vector<TopicDist>>& phi = {}) {
  if (p.indexer.has_cross() && phi.size() != chats.size())
    throw ValidationError("missing topic distributions for lda mode");
  std::vector<EncodedChat> enc;
  enc.reserve(chats.size());
  for (std::size_t c = 0; c < chats.size(); ++c)
    enc.push_back(encode_chat(chats[c], p.indexer,
                              phi.empty() ? std::span<const TopicDist>{}
                                          : std::span<const TopicDist>(phi[c])));
  LinkObjective obj(std::move(enc), gold, p.indexer.dimension(), cfg.lambda, cfg.threads);
  ValueAndGradient out;
  out.grad.resize(p.indexer.dimension());
  out.value = obj(p.theta, out.grad);
  return out;
}

// ---------------------------------------------------------------------------
// Model file
// ---------------------------------------------------------------------------

struct ModelFile {
  Parameters params;
  std::string vocab_hash;
  std::string lexicon_hash;
  json metadata = json::object();
};

inline json model_to_json(const ModelFile& m) {
  const auto& ix = m.params.indexer;
  const auto& th = m.params.theta;
  auto slice = [&](std::size_t off, std::size_t n) {
    return std::vector<double>(th.begin() + static_cast<std::ptrdiff_t>(off),
                               th.begin() + static_cast<std::ptrdiff_t>(off + n));
  };
  std::vector<std::string> order;
  for (std::size_t k = 0; k < ix.features(); ++k)
    order.emplace_back(k < kFeatureOrder.size() ? kFeatureOrder[k] : "f" + std::to_string(k));
  json blocks = {{"eta", slice(ix.eta_offset(), ix.eta_size())},
                 {"tau", slice(ix.tau_offset(), ix.tau_size())},
                 {"pi", slice(ix.pi_offset(), ix.pi_size())}};
  if (ix.has_cross()) blocks["w"] = th[ix.cross_offset()];
  json j = {{"version", kModelFileVersion},
            {"mode", mode_name(ix.mode())},
            {"K", ix.features()},
            {"W", ix.window()},
            {"feature_order", order},
            {"vocab_hash", m.vocab_hash},
            {"lexicon_hash", m.lexicon_hash},
            {"theta_blocks", std::move(blocks)}};
  if (!m.metadata.empty()) j["metadata"] = m.metadata;
  return j;
}

inline ModelFile model_from_json(const json& j) {
  try {
    if (j.at("version").get<int>() != kModelFileVersion)
      throw ValidationError("unsupported model version " + j.at("version").dump());
    const auto K = j.at("K").get<std::size_t>();
    const auto W = j.at("W").get<int>();
    const Mode mode = parse_mode(j.at("mode").get<std::string>());
    const auto order = j.at("feature_order").get<std::vector<std::string>>();
    if (order.size() != K) throw ValidationError("feature_order length does not match K");
    for (std::size_t k = 0; k < std::min(K, kFeatureOrder.size()); ++k)
      if (order[k] != kFeatureOrder[k])
        throw ValidationError("unsupported feature order: " + order[k]);
    ParamIndexer ix(K, W, mode);
    const auto& b = j.at("theta_blocks");
    const auto eta = b.at("eta").get<std::vector<double>>();
    const auto tau = b.at("tau").get<std::vector<double>>();
    const auto pi = b.at("pi").get<std::vector<double>>();
    if (eta.size() != ix.eta_size() || tau.size() != ix.tau_size() || pi.size() != ix.pi_size())
      throw ValidationError("dimension mismatch in theta_blocks");
    if (b.contains("w") != ix.has_cross())
      throw ValidationError("dimension mismatch: w presence does not match mode");
    std::vector<double> theta;
    theta.reserve(ix.dimension());
    theta.insert(theta.end(), eta.begin(), eta.end());
    theta.insert(theta.end(), tau.begin(), tau.end());
    theta.insert(theta.end(), pi.begin(), pi.end());
    if (ix.has_cross()) theta.push_back(b.at("w").get<double>());
    ModelFile m{Parameters(ix, std::move(theta)), j.value("vocab_hash", std::string()),
                j.value("lexicon_hash", std::string()), j.value("metadata", json::object())};
    for (double v : m.params.theta)
      if (!std::isfinite(v)) throw ValidationError("non-finite model coefficient");
    return m;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed model file: ") + e.what());
  }
}

inline void save_model(const std::filesystem::path& path, const ModelFile& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << model_to_json(m).dump(2) << '\n';
}

inline ModelFile load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("malformed model file " + path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace chatlink
