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

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chatlink/corpus.hpp"
#include "chatlink/error.hpp"

namespace chatlink {

inline constexpr std::size_t kFeatureCount = 6;

// Order is part of the model file format.
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureOrder = {
    "speaker", "question", "answer", "url", "image", "emoticon"};

enum FeatureId : std::size_t {
  kSpeakerFeature = 0,
  kQuestionFeature,
  kAnswerFeature,
  kUrlFeature,
  kImageFeature,
  kEmoticonFeature,
};

inline FeatureVec message_features(const Message& message, const LexiconSet& lx) {
  FeatureVec f(std::vector<std::uint8_t>(kFeatureCount, 0));
  f[kSpeakerFeature] = message.speaker == Speaker::Customer;
  for (const auto& t : message.tokens) {
    if (is_question_mark(t) || lx.question_words.count(t)) f[kQuestionFeature] = 1;
    if (lx.answer_words.count(t)) f[kAnswerFeature] = 1;
    if (t == tokens::kUrl) f[kUrlFeature] = 1;
    if (t == tokens::kImage) f[kImageFeature] = 1;
    if (t == tokens::kEmoticon) f[kEmoticonFeature] = 1;
  }
  return f;
}

// Fills Message::flags for every message of the chat.
inline Chat with_features(Chat chat, const LexiconSet& lx) {
  for (auto& m : chat.messages) m.flags = message_features(m, lx);
  return chat;
}

enum class Mode { Base, WithLda };

inline std::string_view mode_name(Mode m) {
  return m == Mode::Base ? "base" : "lda";
}

inline Mode parse_mode(std::string_view s) {
  if (s == "base") return Mode::Base;
  if (s == "lda") return Mode::WithLda;
  throw ValidationError("unknown mode \"" + std::string(s) + "\" (base|lda)");
}

// Flat layout of the coefficient blocks:
//   eta[k][l][a][b]  K*K*2*2 pairwise feature cells (i != j)
//   tau[m-1]         W distance indicators, m = 1..W
//   pi[k][a]         K*2 self-link feature cells
//   w                one Cross weight, WithLda mode only
class ParamIndexer {
 public:
  enum class Block { Eta, Tau, Pi, CrossWeight };

  struct Coord {
    Block block = Block::Eta;
    std::size_t k = 0, l = 0, a = 0, b = 0;
    int m = 0;
    bool operator==(const Coord&) const = default;
  };

  explicit ParamIndexer(std::size_t features = kFeatureCount,
                        int window = kDefaultWindow, Mode mode = Mode::Base)
      : k_(features), w_(window), mode_(mode) {
    if (features == 0) throw ValidationError("feature count must be positive");
    if (window < 1) throw ValidationError("window must be at least 1");
  }

  std::size_t features() const { return k_; }
  int window() const { return w_; }
  Mode mode() const { return mode_; }
  bool has_cross() const { return mode_ == Mode::WithLda; }

  std::size_t eta_offset() const { return 0; }
  std::size_t eta_size() const { return 4 * k_ * k_; }
  std::size_t tau_offset() const { return eta_size(); }
  std::size_t tau_size() const { return static_cast<std::size_t>(w_); }
  std::size_t pi_offset() const { return tau_offset() + tau_size(); }
  std::size_t pi_size() const { return 2 * k_; }
  std::size_t cross_offset() const { return pi_offset() + pi_size(); }
  std::size_t dimension() const { return cross_offset() + (has_cross() ? 1 : 0); }

  std::size_t eta(std::size_t k, std::size_t l, std::size_t a, std::size_t b) const {
    return ((k * k_ + l) * 2 + a) * 2 + b;
  }
  std::size_t tau(int m) const {
    return tau_offset() + static_cast<std::size_t>(m - 1);
  }
  std::size_t pi(std::size_t k, std::size_t a) const {
    return pi_offset() + k * 2 + a;
  }
  std::size_t cross() const {
    if (!has_cross()) throw ValidationError("mode mismatch: no Cross weight in base mode");
    return cross_offset();
  }

  std::size_t encode(const Coord& c) const {
    switch (c.block) {
      case Block::Eta:
        if (c.k >= k_ || c.l >= k_ || c.a > 1 || c.b > 1)
          throw ValidationError("eta coordinate out of range");
        return eta(c.k, c.l, c.a, c.b);
      case Block::Tau:
        if (c.m < 1 || c.m > w_) throw ValidationError("tau coordinate out of range");
        return tau(c.m);
      case Block::Pi:
        if (c.k >= k_ || c.a > 1) throw ValidationError("pi coordinate out of range");
        return pi(c.k, c.a);
      case Block::CrossWeight:
        return cross();
    }
    throw ValidationError("unknown block");
  }

  Coord decode(std::size_t index) const {
    if (index >= dimension()) throw ValidationError("flat index out of range");
    Coord c;
    if (index < tau_offset()) {
      c.block = Block::Eta;
      c.b = index % 2;
      c.a = (index / 2) % 2;
      c.l = (index / 4) % k_;
      c.k = index / (4 * k_);
    } else if (index < pi_offset()) {
      c.block = Block::Tau;
      c.m = static_cast<int>(index - tau_offset()) + 1;
    } else if (index < cross_offset()) {
      c.block = Block::Pi;
      c.k = (index - pi_offset()) / 2;
      c.a = (index - pi_offset()) % 2;
    } else {
      c.block = Block::CrossWeight;
    }
    return c;
  }

  bool operator==(const ParamIndexer&) const = default;

 private:
  std::size_t k_;
  int w_;
  Mode mode_;
};

// Candidates for message i: max(0, i-W) .. i, ascending.
inline std::vector<int> candidate_set(int i, int window) {
  std::vector<int> out;
  for (int j = std::max(0, i - window); j <= i; ++j) out.push_back(j);
  return out;
}

// A fired coefficient with its feature value (1 for indicators, Cross(i,j)
// for the w coordinate).
struct ActiveFeature {
  std::size_t index = 0;
  double value = 1.0;
  bool operator==(const ActiveFeature&) const = default;
};

// Coefficients that fire when message i links to candidate j. `cross` must
// be given exactly when the indexer is in WithLda mode.
inline std::vector<ActiveFeature> active_indices(int i, int j, const FeatureVec& fi,
                                                 const FeatureVec& fj,
                                                 const ParamIndexer& ix,
                                                 std::optional<double> cross = std::nullopt) {
  if (j < 0 || j > i || i - j > ix.window())
    throw ValidationError("candidate " + std::to_string(j) +
                          " outside candidate set of message " + std::to_string(i));
  const std::size_t K = ix.features();
  if (fi.size() != K || fj.size() != K)
    throw ValidationError("feature vector length does not match indexer");
  if (ix.has_cross() != cross.has_value())
    throw ValidationError(ix.has_cross() ? "missing topic distributions for lda mode"
                                         : "mode mismatch: topic feature given to base model");
  std::vector<ActiveFeature> out;
  if (i != j) {
    out.reserve(K * K + 2);
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t l = 0; l < K; ++l)
        out.push_back({ix.eta(k, l, fi[k], fj[l]), 1.0});
    out.push_back({ix.tau(i - j), 1.0});
  } else {
    out.reserve(K + 1);
    for (std::size_t k = 0; k < K; ++k) out.push_back({ix.pi(k, fi[k]), 1.0});
  }
  if (cross) out.push_back({ix.cross(), *cross});
  return out;
}

}  // namespace chatlink
