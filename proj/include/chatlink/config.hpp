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

// Key-value run configuration shared by every CLI subcommand. Files hold
// `key = value` lines (`#` starts a comment); command-line overrides win.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "chatlink/error.hpp"

namespace chatlink {

struct ConfigKey {
  std::string_view name;
  std::string_view default_value;
  std::string_view help;
};

inline constexpr ConfigKey kConfigKeys[] = {
    {"corpus", "", "corpus file (JSON lines)"},
    {"annotations", "", "annotation file (JSON lines)"},
    {"lexicons", "", "lexicon directory; empty = built-in English lists"},
    {"vocab", "", "vocabulary file (word<TAB>count)"},
    {"vocab_size", "5400", "vocabulary cap"},
    {"window", "5", "candidate window W"},
    {"lambda", "1.0", "L2 strength"},
    {"label_policy", "majority", "gold labels under disagreement: majority|all"},
    {"mode", "base", "model mode: base|lda"},
    {"model", "", "model file"},
    {"lda_model", "", "LDA model file"},
    {"model_lda", "", "eval: lda-mode link model for the Discriminative + LDA row"},
    {"lda_topics", "20", "LDA topic count"},
    {"lda_alpha", "0.1", "LDA document-topic prior"},
    {"lda_beta", "0.01", "LDA topic-word prior"},
    {"lda_iterations", "1000", "Gibbs sweeps"},
    {"lda_burn_in", "500", "sweeps before samples are retained"},
    {"lda_sample_lag", "10", "sweeps between retained samples"},
    {"lda_chain", "0", "Gibbs chain id"},
    {"predictions", "", "predictions file (annotation schema)"},
    {"out", "", "output path"},
    {"folds", "5", "cross-validation folds"},
    {"seed", "0", "random seed"},
    {"threads", "1", "objective evaluation threads"},
    {"max_iters", "1000", "L-BFGS iteration budget"},
    {"grad_tol", "1e-6", "L-BFGS gradient infinity-norm tolerance"},
    {"memory", "10", "L-BFGS memory"},
    {"filter", "false", "apply the length/exchange-ratio filter"},
    {"min_len", "10", "filter: minimum chat length"},
    {"max_len", "35", "filter: maximum chat length"},
    {"min_ratio", "0.4", "filter: minimum exchange ratio"},
    {"max_ratio", "0.6", "filter: maximum exchange ratio"},
    {"synth_chats", "100", "synthetic chat count"},
    {"synth_min_len", "10", "synthetic minimum chat length"},
    {"synth_max_len", "35", "synthetic maximum chat length"},
    {"synth_alternation", "0.5", "synthetic speaker alternation probability"},
    {"synth_annotators", "3", "synthetic annotators per chat"},
    {"synth_disagreement", "0.0", "synthetic annotator corruption rate"},
    {"synth_feature_noise", "0.0", "synthetic observed-feature flip rate"},
    {"synth_topics", "3", "synthetic topic count"},
    {"synth_topic_follow", "0.8", "P(message reuses its antecedent's topic)"},
    {"gradcheck_instances", "20", "random instances checked by gradcheck"},
    {"host", "127.0.0.1", "serve: bind address"},
    {"port", "8080", "serve: port"},
    {"static_dir", "", "serve: directory of UI files mounted at /"},
};

class RunConfig {
 public:
  RunConfig() {
    for (const auto& k : kConfigKeys) values_.emplace(k.name, k.default_value);
  }

  static bool known(std::string_view key) {
    for (const auto& k : kConfigKeys)
      if (k.name == key) return true;
    return false;
  }

  void set(const std::string& key, const std::string& value) {
    if (!known(key)) throw ValidationError("unknown config key \"" + key + "\"");
    values_[key] = value;
  }

  // Applies a `key=value` override.
  void apply_override(const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ValidationError("override must be key=value: " + kv);
    set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }

  void load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config " + path.string());
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
      if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
      const auto key = trim(line.substr(0, eq));
      if (!known(key))
        throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                              ": unknown config key \"" + key + "\"");
      values_[key] = trim(line.substr(eq + 1));
    }
  }

  const std::string& str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ValidationError("unknown config key \"" + key + "\"");
    return it->second;
  }

  const std::string& require(const std::string& key) const {
    const auto& v = str(key);
    if (v.empty()) throw ValidationError("missing required setting \"" + key + "\"");
    return v;
  }

  long long integer(const std::string& key) const {
    const auto& v = str(key);
    try {
      std::size_t pos = 0;
      const long long r = std::stoll(v, &pos);
      if (pos == v.size()) return r;
    } catch (const std::exception&) {
    }
    throw ValidationError("setting \"" + key + "\" must be an integer, got \"" + v + "\"");
  }

  std::uint64_t u64(const std::string& key) const {
    const auto& v = str(key);
    try {
      std::size_t pos = 0;
      const unsigned long long r = std::stoull(v, &pos);
      if (pos == v.size() && v.find('-') == std::string::npos) return r;
    } catch (const std::exception&) {
    }
    throw ValidationError("setting \"" + key + "\" must be a non-negative integer, got \"" + v + "\"");
  }

  double real(const std::string& key) const {
    const auto& v = str(key);
    try {
      std::size_t pos = 0;
      const double r = std::stod(v, &pos);
      if (pos == v.size()) return r;
    } catch (const std::exception&) {
    }
    throw ValidationError("setting \"" + key + "\" must be a number, got \"" + v + "\"");
  }

  bool flag(const std::string& key) const {
    const auto& v = str(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ValidationError("setting \"" + key + "\" must be true or false, got \"" + v + "\"");
  }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : values_) j[k] = v;
    return j;
  }

 private:
  static std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> values_;
};

}  // namespace chatlink
