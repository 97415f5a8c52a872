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

// Rule baselines, accuracy against a random annotator, weighted F1,
// inter-annotator statistics and the cross-validation split.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "chatlink/corpus.hpp"
#include "chatlink/error.hpp"
#include "chatlink/rng.hpp"

namespace chatlink {

// Every message links to its immediate precedent.
inline std::vector<LinkLabel> rule1(const Chat& chat) {
  std::vector<LinkLabel> out;
  for (std::size_t i = 0; i < chat.size(); ++i)
    out.push_back({static_cast<int>(i), i == 0 ? 0 : 1});
  return out;
}

// Precedent if the precedent is from the customer, else a self-link.
inline std::vector<LinkLabel> rule2(const Chat& chat) {
  std::vector<LinkLabel> out;
  for (std::size_t i = 0; i < chat.size(); ++i) {
    const bool link = i > 0 && chat.messages[i - 1].speaker == Speaker::Customer;
    out.push_back({static_cast<int>(i), link ? 1 : 0});
  }
  return out;
}

// Expected agreement with an annotator drawn uniformly at random, summed over
// messages. Accuracy = sum / count.
struct AgreementTally {
  double sum = 0.0;
  std::size_t count = 0;

  double mean() const { return count == 0 ? 0.0 : sum / static_cast<double>(count); }
  AgreementTally& operator+=(const AgreementTally& o) {
    sum += o.sum;
    count += o.count;
    return *this;
  }
};

inline AgreementTally agreement_tally(const std::vector<LinkLabel>& preds,
                                      const AnnotationSet& annots) {
  if (annots.entries.empty())
    throw ValidationError("empty annotation set for chat " + annots.chat_id);
  AgreementTally t;
  const double n = static_cast<double>(annots.entries.size());
  for (const auto& [id, labels] : annots.entries)
    if (labels.size() != preds.size())
      throw ValidationError("annotator " + id + " does not cover every message of " +
                            annots.chat_id);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    int agree = 0;
    for (const auto& [_, labels] : annots.entries)
      agree += labels[i].distance == preds[i].distance;
    t.sum += agree / n;
  }
  t.count = preds.size();
  return t;
}

inline double accuracy_vs_random_annotator(const std::vector<LinkLabel>& preds,
                                           const AnnotationSet& annots) {
  return agreement_tally(preds, annots).mean();
}

// Corpus level: mean over all messages of all chats.
inline double accuracy_vs_random_annotator(const std::vector<std::vector<LinkLabel>>& preds,
                                           const std::vector<AnnotationSet>& annots) {
  if (preds.size() != annots.size())
    throw ValidationError("predictions and annotations cover different chats");
  if (annots.empty()) throw ValidationError("empty annotation set");
  AgreementTally t;
  for (std::size_t c = 0; c < preds.size(); ++c) t += agreement_tally(preds[c], annots[c]);
  return t.mean();
}

struct ClassMetrics {
  int label = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct MetricReport {
  double accuracy = 0.0;
  double weighted_f1 = 0.0;
  std::vector<ClassMetrics> per_class;
  std::size_t n_messages = 0;
};

// Per-class P/R/F1 (0/0 taken as 0) averaged with gold-support weights.
// `accuracy` is the exact-match rate against `gold`.
inline MetricReport weighted_f1(const std::vector<LinkLabel>& preds,
                                const std::vector<LinkLabel>& gold) {
  if (preds.size() != gold.size())
    throw ValidationError("prediction and gold lengths differ");
  std::map<int, std::array<std::size_t, 3>> counts;  // tp, fp, fn
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const int p = preds[i].distance, g = gold[i].distance;
    if (p == g) {
      ++counts[p][0];
      ++correct;
    } else {
      ++counts[p][1];
      ++counts[g][2];
    }
  }
  MetricReport r;
  r.n_messages = preds.size();
  if (preds.empty()) return r;
  const auto ratio = [](std::size_t a, std::size_t b) {
    return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
  };
  for (const auto& [label, c] : counts) {
    ClassMetrics m;
    m.label = label;
    m.precision = ratio(c[0], c[0] + c[1]);
    m.recall = ratio(c[0], c[0] + c[2]);
    m.f1 = m.precision + m.recall > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    m.support = c[0] + c[2];
    r.weighted_f1 += m.f1 * static_cast<double>(m.support);
    r.per_class.push_back(m);
  }
  r.weighted_f1 /= static_cast<double>(preds.size());
  r.accuracy = ratio(correct, preds.size());
  return r;
}

// Full metric row: accuracy against a random annotator, F1 against the
// majority label.
inline MetricReport evaluate(const std::vector<std::vector<LinkLabel>>& preds,
                             const std::vector<AnnotationSet>& annots) {
  std::vector<LinkLabel> flat_pred, flat_gold;
  for (std::size_t c = 0; c < preds.size(); ++c) {
    flat_pred.insert(flat_pred.end(), preds[c].begin(), preds[c].end());
    const auto gold = majority_labels(annots.at(c));
    flat_gold.insert(flat_gold.end(), gold.begin(), gold.end());
  }
  MetricReport r = weighted_f1(flat_pred, flat_gold);
  r.accuracy = accuracy_vs_random_annotator(preds, annots);
  return r;
}

// Fleiss' kappa over every message of every set. Each message must be rated
// by the same number of annotators.
// Evaluated over integer counts, so the only rounding is the final division.
inline double fleiss_kappa(const std::vector<AnnotationSet>& sets) {
  __extension__ typedef __int128 wide;
  std::size_t raters = 0, items = 0;
  std::map<int, wide> totals;
  wide pairs = 0;
  for (const auto& s : sets) {
    if (s.entries.empty()) continue;
    const auto n = s.entries.size();
    if (raters == 0) raters = n;
    if (n != raters) throw ValidationError("fleiss kappa needs the same number of annotators per message");
    const std::size_t len = s.entries.begin()->second.size();
    for (std::size_t i = 0; i < len; ++i) {
      std::map<int, wide> c;
      for (const auto& [_, labels] : s.entries) ++c[labels.at(i).distance];
      for (const auto& [cat, k] : c) {
        pairs += k * (k - 1);
        totals[cat] += k;
      }
      ++items;
    }
  }
  if (raters < 2) throw ValidationError("fleiss kappa needs at least 2 annotators");
  if (items == 0) throw ValidationError("fleiss kappa needs at least one message");
  // Pbar = pairs / d1, Pe = sq / d2
  const wide n = static_cast<wide>(raters), N = static_cast<wide>(items);
  const wide d1 = N * n * (n - 1), d2 = (N * n) * (N * n);
  wide sq = 0;
  for (const auto& [_, k] : totals) sq += k * k;
  if (sq == d2) return 1.0;
  wide num = pairs * d2 - sq * d1, den = d1 * (d2 - sq);
  wide a = num < 0 ? -num : num, b = den;
  while (b != 0) a = std::exchange(b, a % b);
  if (a > 1) num /= a, den /= a;
  return static_cast<double>(static_cast<long double>(num) / static_cast<long double>(den));
}

struct HumanPerformance {
  double mean = 0.0;
  double std = 0.0;  // population
  std::map<std::string, double> per_annotator;
};

// Each annotator scored against the remaining annotators of every chat they
// labeled.
inline HumanPerformance human_performance(const std::vector<AnnotationSet>& sets) {
  std::map<std::string, AgreementTally> tallies;
  for (const auto& s : sets) {
    if (s.entries.size() < 2)
      throw ValidationError("human performance needs at least 2 annotators for chat " + s.chat_id);
    for (const auto& [id, labels] : s.entries) {
      AnnotationSet others{s.chat_id, s.entries};
      others.entries.erase(id);
      tallies[id] += agreement_tally(labels, others);
    }
  }
  if (tallies.empty()) throw ValidationError("human performance needs annotations");
  HumanPerformance h;
  for (const auto& [id, t] : tallies) {
    h.per_annotator[id] = t.mean();
    h.mean += t.mean();
  }
  h.mean /= static_cast<double>(tallies.size());
  for (const auto& [_, v] : h.per_annotator) h.std += (v - h.mean) * (v - h.mean);
  h.std = std::sqrt(h.std / static_cast<double>(tallies.size()));
  return h;
}

// Accuracy of the per-message modal label (ties to the smallest distance).
inline double agreement_upper_bound(const std::vector<AnnotationSet>& sets) {
  std::vector<std::vector<LinkLabel>> modal;
  for (const auto& s : sets) modal.push_back(majority_labels(s));
  return accuracy_vs_random_annotator(modal, sets);
}

// Share of messages on which all annotators agree, and on which at least two
// agree.
struct AgreementSummary {
  double unanimous = 0.0;
  double at_least_two = 0.0;
  std::size_t n_messages = 0;
};

inline AgreementSummary agreement_summary(const std::vector<AnnotationSet>& sets) {
  AgreementSummary a;
  for (const auto& s : sets) {
    if (s.entries.empty()) continue;
    const std::size_t len = s.entries.begin()->second.size();
    for (std::size_t i = 0; i < len; ++i) {
      std::map<int, std::size_t> c;
      for (const auto& [_, labels] : s.entries) ++c[labels.at(i).distance];
      std::size_t top = 0;
      for (const auto& [__, k] : c) top = std::max(top, k);
      a.unanimous += top == s.entries.size();
      a.at_least_two += top >= 2;
      ++a.n_messages;
    }
  }
  if (a.n_messages > 0) {
    a.unanimous /= static_cast<double>(a.n_messages);
    a.at_least_two /= static_cast<double>(a.n_messages);
  }
  return a;
}

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Chat-level k-fold partition after a seeded shuffle; fold sizes differ by
// at most one. Index lists are ascending.
inline std::vector<Fold> kfold_split(std::size_t n, int k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("k-fold needs k >= 2");
  if (n < static_cast<std::size_t>(k))
    throw ValidationError("k-fold needs at least k chats");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(derive_seed(seed, "kfold"));
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  std::vector<Fold> folds(static_cast<std::size_t>(k));
  std::vector<int> fold_of(n);
  const std::size_t base = n / k, extra = n % k;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    for (std::size_t q = 0; q < size; ++q) fold_of[perm[pos++]] = static_cast<int>(f);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t f = 0; f < folds.size(); ++f)
      (static_cast<int>(f) == fold_of[i] ? folds[f].test : folds[f].train).push_back(i);
  return folds;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline json report_to_json(const MetricReport& r) {
  json classes = json::array();
  for (const auto& c : r.per_class)
    classes.push_back({{"class", c.label},
                       {"precision", c.precision},
                       {"recall", c.recall},
                       {"f1", c.f1},
                       {"support", c.support}});
  return {{"accuracy", r.accuracy},
          {"weighted_f1", r.weighted_f1},
          {"n_messages", r.n_messages},
          {"per_class", std::move(classes)}};
}

using ReportRows = std::vector<std::pair<std::string, MetricReport>>;

inline std::string format_table(const ReportRows& rows) {
  std::size_t width = 6;
  for (const auto& [name, _] : rows) width = std::max(width, name.size());
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %8s  %10s\n", static_cast<int>(width), "Method",
                "Accuracy", "Average F1");
  out += buf;
  for (const auto& [name, r] : rows) {
    std::snprintf(buf, sizeof buf, "%-*s  %8.4f  %10.4f\n", static_cast<int>(width),
                  name.c_str(), r.accuracy, r.weighted_f1);
    out += buf;
  }
  return out;
}

}  // namespace chatlink
