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

// Chat data model, corpus and annotation files, lexicons, vocabulary and
// the length/exchange-ratio filter.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "chatlink/error.hpp"
#include "chatlink/rng.hpp"

namespace chatlink {

using json = nlohmann::json;

inline constexpr int kDefaultWindow = 5;
inline constexpr std::size_t kDefaultVocabSize = 5400;

namespace tokens {
inline constexpr std::string_view kUrl = "<URL>";
inline constexpr std::string_view kImage = "<IMG>";
inline constexpr std::string_view kEmoticon = "<EMO>";
inline constexpr std::string_view kGeo = "<GEO>";
inline constexpr std::string_view kRare = "<RARE>";
inline constexpr std::string_view kNumber = "<NUM>";

inline bool is_reserved(std::string_view t) {
  return t == kUrl || t == kImage || t == kEmoticon || t == kGeo ||
         t == kRare || t == kNumber;
}
}  // namespace tokens

enum class Speaker { Customer, Agent };

inline std::string_view speaker_code(Speaker s) {
  return s == Speaker::Customer ? "C" : "A";
}

// Binary message features in fixed order: speaker-identity, question,
// answer, url, image, emoticon. Tests also use shorter vectors (K < 6).
struct FeatureVec {
  std::vector<std::uint8_t> values;

  FeatureVec() = default;
  explicit FeatureVec(std::vector<std::uint8_t> v) : values(std::move(v)) {}
  FeatureVec(std::initializer_list<std::uint8_t> v) : values(v) {}

  std::size_t size() const { return values.size(); }
  std::uint8_t operator[](std::size_t k) const { return values[k]; }
  std::uint8_t& operator[](std::size_t k) { return values[k]; }
  bool operator==(const FeatureVec&) const = default;
};

struct Message {
  int index = 0;
  Speaker speaker = Speaker::Customer;
  std::string raw_text;
  std::vector<std::string> tokens;
  std::optional<FeatureVec> flags;

  bool operator==(const Message&) const = default;
};

struct Chat {
  std::string chat_id;
  std::vector<Message> messages;

  std::size_t size() const { return messages.size(); }
  bool operator==(const Chat&) const = default;
};

// Backward distance to the antecedent; 0 is a self-link.
struct LinkLabel {
  int message_index = 0;
  int distance = 0;

  int antecedent() const { return message_index - distance; }
  bool operator==(const LinkLabel&) const = default;
};

inline bool label_in_range(int message_index, int distance, int window) {
  return distance >= 0 && distance <= std::min(window, message_index);
}

inline std::vector<LinkLabel> labels_from_distances(
    const std::vector<int>& distances) {
  std::vector<LinkLabel> out;
  out.reserve(distances.size());
  for (std::size_t i = 0; i < distances.size(); ++i)
    out.push_back({static_cast<int>(i), distances[i]});
  return out;
}

inline std::vector<int> distances_of(const std::vector<LinkLabel>& labels) {
  std::vector<int> out;
  out.reserve(labels.size());
  for (const auto& l : labels) out.push_back(l.distance);
  return out;
}

struct AnnotationSet {
  std::string chat_id;
  std::map<std::string, std::vector<LinkLabel>> entries;

  std::size_t annotator_count() const { return entries.size(); }
  bool operator==(const AnnotationSet&) const = default;
};

// Per-message plurality label over annotators; ties go to the smallest
// distance.
inline std::vector<LinkLabel> majority_labels(const AnnotationSet& set) {
  if (set.entries.empty()) throw ValidationError("empty annotation set for chat " + set.chat_id);
  const std::size_t n = set.entries.begin()->second.size();
  std::vector<LinkLabel> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::map<int, int> votes;
    for (const auto& [_, labels] : set.entries) ++votes[labels.at(i).distance];
    int best = votes.begin()->first, best_votes = 0;
    for (const auto& [d, v] : votes)
      if (v > best_votes) best = d, best_votes = v;
    out.push_back({static_cast<int>(i), best});
  }
  return out;
}

// Checks one annotator's label vector against a chat of `n` messages.
inline void validate_labels(const std::vector<LinkLabel>& labels,
                            std::size_t n, int window) {
  if (labels.size() != n)
    throw ValidationError("annotation has " + std::to_string(labels.size()) +
                          " labels for " + std::to_string(n) + " messages");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i].message_index != static_cast<int>(i))
      throw ValidationError("label order does not match message order");
    if (!label_in_range(labels[i].message_index, labels[i].distance, window))
      throw ValidationError("label out of range: message " +
                            std::to_string(i) + " distance " +
                            std::to_string(labels[i].distance));
  }
}

inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  const auto is_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
           c == '\v';
  };
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Corpus files
// ---------------------------------------------------------------------------

struct Corpus {
  std::vector<Chat> chats;
  std::vector<AnnotationSet> annotations;

  const Chat* find_chat(std::string_view id) const {
    for (const auto& c : chats)
      if (c.chat_id == id) return &c;
    return nullptr;
  }
  const AnnotationSet* find_annotations(std::string_view id) const {
    for (const auto& a : annotations)
      if (a.chat_id == id) return &a;
    return nullptr;
  }
};

namespace detail {

inline Speaker parse_speaker(const json& v) {
  if (!v.is_string()) throw ValidationError("speaker must be \"C\" or \"A\"");
  const auto& s = v.get_ref<const std::string&>();
  if (s == "C") return Speaker::Customer;
  if (s == "A") return Speaker::Agent;
  throw ValidationError("unknown speaker \"" + s + "\"");
}

inline std::vector<int> parse_distances(const json& v) {
  if (!v.is_array()) throw ValidationError("distances must be an array");
  std::vector<int> out;
  for (const auto& d : v) {
    if (!d.is_number_integer())
      throw ValidationError("distances must be integers");
    out.push_back(d.get<int>());
  }
  return out;
}

template <typename F>
void for_each_json_line(const std::filesystem::path& path, F&& f) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      f(json::parse(line), lineno);
    } catch (const json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                            ": malformed record: " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                            ": " + e.what());
    }
  }
}

inline void add_annotation(Corpus& corpus, const std::string& chat_id,
                           const std::string& annotator,
                           const std::vector<int>& distances, int window) {
  const Chat* chat = corpus.find_chat(chat_id);
  if (!chat) throw ValidationError("annotation references unknown chat " + chat_id);
  auto labels = labels_from_distances(distances);
  validate_labels(labels, chat->size(), window);
  auto it = std::find_if(corpus.annotations.begin(), corpus.annotations.end(),
                         [&](const auto& a) { return a.chat_id == chat_id; });
  if (it == corpus.annotations.end()) {
    corpus.annotations.push_back({chat_id, {}});
    it = std::prev(corpus.annotations.end());
  }
  if (!it->entries.emplace(annotator, std::move(labels)).second)
    throw ValidationError("duplicate annotation for chat " + chat_id +
                          " by " + annotator);
}

}  // namespace detail

inline Chat chat_from_json(const json& rec) {
  Chat chat;
  if (!rec.is_object() || !rec.contains("chat_id") || !rec["chat_id"].is_string())
    throw ValidationError("record needs a string chat_id");
  chat.chat_id = rec["chat_id"].get<std::string>();
  if (!rec.contains("messages") || !rec["messages"].is_array() ||
      rec["messages"].empty())
    throw ValidationError("chat " + chat.chat_id + " needs a non-empty messages array");
  for (const auto& m : rec["messages"]) {
    Message msg;
    msg.index = static_cast<int>(chat.messages.size());
    if (!m.is_object() || !m.contains("speaker"))
      throw ValidationError("message needs a speaker");
    msg.speaker = detail::parse_speaker(m["speaker"]);
    if (m.contains("text")) {
      if (!m["text"].is_string()) throw ValidationError("text must be a string");
      msg.raw_text = m["text"].get<std::string>();
    }
    if (m.contains("tokens")) {
      if (!m["tokens"].is_array()) throw ValidationError("tokens must be an array");
      for (const auto& t : m["tokens"]) {
        if (!t.is_string()) throw ValidationError("tokens must be strings");
        msg.tokens.push_back(t.get<std::string>());
      }
    } else {
      msg.tokens = tokenize(msg.raw_text);
    }
    chat.messages.push_back(std::move(msg));
  }
  return chat;
}

inline json chat_to_json(const Chat& chat) {
  json msgs = json::array();
  for (const auto& m : chat.messages) {
    msgs.push_back({{"speaker", speaker_code(m.speaker)},
                    {"text", m.raw_text},
                    {"tokens", m.tokens}});
  }
  return {{"chat_id", chat.chat_id}, {"messages", std::move(msgs)}};
}

inline json annotation_record(const std::string& chat_id,
                              const std::string& annotator,
                              const std::vector<LinkLabel>& labels) {
  return {{"chat_id", chat_id},
          {"annotator_id", annotator},
          {"distances", distances_of(labels)}};
}

// Reads a corpus file. Records may embed annotations as
// "annotations": {annotator_id: [distance, ...]}.
inline Corpus load_corpus(const std::filesystem::path& path,
                          int window = kDefaultWindow) {
  Corpus corpus;
  std::unordered_set<std::string> seen;
  detail::for_each_json_line(path, [&](const json& rec, std::size_t) {
    Chat chat = chat_from_json(rec);
    if (!seen.insert(chat.chat_id).second)
      throw ValidationError("duplicate chat_id " + chat.chat_id);
    corpus.chats.push_back(std::move(chat));
    if (rec.contains("annotations")) {
      const auto& ann = rec["annotations"];
      if (!ann.is_object()) throw ValidationError("annotations must be an object");
      for (const auto& [annotator, dists] : ann.items())
        detail::add_annotation(corpus, corpus.chats.back().chat_id, annotator,
                               detail::parse_distances(dists), window);
    }
  });
  return corpus;
}

// Reads an annotation file into `corpus`, validating against its chats.
inline void load_annotations(const std::filesystem::path& path, Corpus& corpus,
                             int window = kDefaultWindow) {
  detail::for_each_json_line(path, [&](const json& rec, std::size_t) {
    if (!rec.is_object() || !rec.contains("chat_id") ||
        !rec.contains("annotator_id") || !rec.contains("distances"))
      throw ValidationError("annotation needs chat_id, annotator_id, distances");
    detail::add_annotation(corpus, rec["chat_id"].get<std::string>(),
                           rec["annotator_id"].get<std::string>(),
                           detail::parse_distances(rec["distances"]), window);
  });
}

inline void save_corpus(const std::filesystem::path& path,
                        const std::vector<Chat>& chats) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  for (const auto& c : chats) out << chat_to_json(c).dump() << '\n';
}

inline void save_annotations(const std::filesystem::path& path,
                             const std::vector<AnnotationSet>& sets) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  for (const auto& s : sets)
    for (const auto& [annotator, labels] : s.entries)
      out << annotation_record(s.chat_id, annotator, labels).dump() << '\n';
}

// ---------------------------------------------------------------------------
// Statistics and filtering
// ---------------------------------------------------------------------------

inline double exchange_ratio(const Chat& chat) {
  if (chat.size() < 2) throw ValidationError("undefined ratio: chat " + chat.chat_id + " has one message");
  std::size_t changes = 0;
  for (std::size_t i = 1; i < chat.size(); ++i)
    if (chat.messages[i].speaker != chat.messages[i - 1].speaker) ++changes;
  return static_cast<double>(changes) / static_cast<double>(chat.size() - 1);
}

struct FilterBounds {
  std::size_t min_len = 10;
  std::size_t max_len = 35;
  double min_ratio = 0.4;
  double max_ratio = 0.6;
};

// Bounds are inclusive on both ends.
inline std::vector<Chat> filter_chats(const std::vector<Chat>& chats,
                                      const FilterBounds& b = {}) {
  if (b.min_len > b.max_len || b.min_ratio > b.max_ratio)
    throw ValidationError("filter bounds: min > max");
  std::vector<Chat> out;
  for (const auto& c : chats) {
    if (c.size() < b.min_len || c.size() > b.max_len || c.size() < 2) continue;
    const double r = exchange_ratio(c);
    if (r < b.min_ratio || r > b.max_ratio) continue;
    out.push_back(c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Lexicons
// ---------------------------------------------------------------------------

inline constexpr std::string_view kDefaultUrlPattern =
    R"((https?://|www\.)\S+)";

class LexiconSet {
 public:
  std::set<std::string> emoticons;
  std::set<std::string> image_markers;
  std::set<std::string> geo_names;
  std::set<std::string> question_words;
  std::set<std::string> answer_words;

  LexiconSet() { set_url_pattern(std::string(kDefaultUrlPattern)); }

  const std::string& url_pattern() const { return url_pattern_; }
  void set_url_pattern(std::string pattern) {
    try {
      url_regex_ = std::make_shared<const std::regex>(pattern, std::regex::ECMAScript);
    } catch (const std::regex_error&) {
      throw ValidationError("invalid URL pattern: " + pattern);
    }
    url_pattern_ = std::move(pattern);
  }

  bool is_url(const std::string& token) const {
    return std::regex_match(token, *url_regex_);
  }

  std::uint64_t hash() const {
    std::string blob = url_pattern_ + '\x1e';
    for (const auto* s : {&emoticons, &image_markers, &geo_names,
                          &question_words, &answer_words}) {
      for (const auto& w : *s) blob += w + '\n';
      blob += '\x1e';
    }
    return fnv1a(blob);
  }

  // Built-in English defaults; identical to data/lexicons/en.
  static LexiconSet english() {
    LexiconSet lx;
    lx.emoticons = {":)", ":(", ":D", ";)", ":P", ":-)", ":-(", "^_^", "T_T"};
    lx.image_markers = {"[img]", "[image]", "<image>"};
    lx.geo_names = {"beijing", "shanghai", "guangzhou", "shenzhen",
                    "hangzhou", "london", "paris", "tokyo"};
    lx.question_words = {"what", "when", "where", "which", "who", "why",
                         "how", "can", "could", "does", "is", "are"};
    lx.answer_words = {"yes", "no", "ok", "okay", "sure", "thanks",
                       "right", "fine"};
    return lx;
  }

 private:
  std::string url_pattern_;
  std::shared_ptr<const std::regex> url_regex_;
};

namespace detail {
inline std::set<std::string> read_word_list(const std::filesystem::path& p) {
  std::set<std::string> out;
  std::ifstream in(p);
  if (!in) return out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
      line.pop_back();
    if (!line.empty() && line[0] != '#') out.insert(line);
  }
  return out;
}
}  // namespace detail

// Lexicon directory: url.txt (one regex), emoticons.txt, images.txt,
// geo.txt, question.txt, answer.txt, one entry per line. Missing files
// leave the list empty.
inline LexiconSet load_lexicons(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw ValidationError("lexicon directory not found: " + dir.string());
  LexiconSet lx;
  if (auto url = detail::read_word_list(dir / "url.txt"); !url.empty())
    lx.set_url_pattern(*url.begin());
  lx.emoticons = detail::read_word_list(dir / "emoticons.txt");
  lx.image_markers = detail::read_word_list(dir / "images.txt");
  lx.geo_names = detail::read_word_list(dir / "geo.txt");
  lx.question_words = detail::read_word_list(dir / "question.txt");
  lx.answer_words = detail::read_word_list(dir / "answer.txt");
  return lx;
}

inline bool is_question_mark(std::string_view t) {
  return t == "?" || t == "\xEF\xBC\x9F";  // full-width U+FF1F
}

inline bool is_digit_string(std::string_view t) {
  return !t.empty() && std::all_of(t.begin(), t.end(), [](char c) {
    return c >= '0' && c <= '9';
  });
}

// Type token for a lexicon/pattern match, if any.
inline std::optional<std::string_view> type_token(const std::string& token,
                                                  const LexiconSet& lx) {
  if (tokens::is_reserved(token)) return std::nullopt;
  if (lx.is_url(token)) return tokens::kUrl;
  if (lx.image_markers.count(token)) return tokens::kImage;
  if (lx.emoticons.count(token)) return tokens::kEmoticon;
  if (lx.geo_names.count(token)) return tokens::kGeo;
  if (is_digit_string(token)) return tokens::kNumber;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

class Vocab {
 public:
  Vocab() = default;
  Vocab(std::vector<std::pair<std::string, std::size_t>> ranked, std::size_t cap)
      : ranked_(std::move(ranked)), cap_(cap) {
    for (const auto& [w, _] : ranked_) lookup_.insert(w);
  }

  const std::vector<std::pair<std::string, std::size_t>>& entries() const {
    return ranked_;
  }
  std::size_t size() const { return ranked_.size(); }
  std::size_t cap() const { return cap_; }
  bool empty() const { return ranked_.empty(); }

  // Reserved type tokens are always in-vocabulary.
  bool contains(const std::string& w) const {
    return tokens::is_reserved(w) || lookup_.count(w) > 0;
  }

  std::vector<std::string> words() const {
    std::vector<std::string> out;
    for (const auto& [w, _] : ranked_) out.push_back(w);
    return out;
  }

  std::uint64_t hash() const {
    if (ranked_.empty()) return 0;
    std::string blob;
    for (const auto& [w, _] : ranked_) blob += w + '\n';
    return fnv1a(blob);
  }

 private:
  std::vector<std::pair<std::string, std::size_t>> ranked_;
  std::unordered_set<std::string> lookup_;
  std::size_t cap_ = kDefaultVocabSize;
};

inline Vocab build_vocab(const std::vector<Chat>& chats,
                         std::ptrdiff_t cap = kDefaultVocabSize) {
  if (cap <= 0) throw ValidationError("vocabulary cap must be positive");
  std::unordered_map<std::string, std::size_t> freq;
  for (const auto& c : chats)
    for (const auto& m : c.messages)
      for (const auto& t : m.tokens)
        if (!tokens::is_reserved(t)) ++freq[t];
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (ranked.size() > static_cast<std::size_t>(cap)) ranked.resize(cap);
  return Vocab(std::move(ranked), static_cast<std::size_t>(cap));
}

inline void save_vocab(const std::filesystem::path& path, const Vocab& v) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  for (const auto& [w, n] : v.entries()) out << w << '\t' << n << '\n';
}

inline Vocab load_vocab(const std::filesystem::path& path,
                        std::size_t cap = kDefaultVocabSize) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::vector<std::pair<std::string, std::size_t>> ranked;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos || tab == 0)
      throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                            ": expected word<TAB>count");
    try {
      ranked.emplace_back(line.substr(0, tab), std::stoull(line.substr(tab + 1)));
    } catch (const std::exception&) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                            ": bad count");
    }
  }
  return Vocab(std::move(ranked), std::max(cap, ranked.size()));
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

// Type replacement only (no rare-word pass); used before counting the
// vocabulary.
inline Message replace_types(const Message& message, const LexiconSet& lx) {
  Message out = message;
  for (auto& t : out.tokens)
    if (auto typed = type_token(t, lx)) t = std::string(*typed);
  return out;
}

// Full normalization. Question/answer lexicon words and question marks are
// kept even when out of vocabulary so that feature extraction still sees them.
inline Message normalize_message(const Message& message, const Vocab& vocab,
                                 const LexiconSet& lx) {
  Message out = replace_types(message, lx);
  for (auto& t : out.tokens) {
    if (vocab.contains(t) || is_question_mark(t) || lx.question_words.count(t) ||
        lx.answer_words.count(t))
      continue;
    t = std::string(tokens::kRare);
  }
  return out;
}

inline Chat replace_types(const Chat& chat, const LexiconSet& lx) {
  Chat out = chat;
  for (auto& m : out.messages) m = replace_types(m, lx);
  return out;
}

inline Chat normalize_chat(const Chat& chat, const Vocab& vocab,
                           const LexiconSet& lx) {
  Chat out = chat;
  for (auto& m : out.messages) m = normalize_message(m, vocab, lx);
  return out;
}

}  // namespace chatlink
