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

// chatlink command-line tool.

#include <CLI11.hpp>

#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "chatlink/chatlink.hpp"
#include "chatlink/service.hpp"

namespace fs = std::filesystem;
using namespace chatlink;

#ifndef CHATLINK_DATA_DIR
#define CHATLINK_DATA_DIR "data"
#endif

namespace {

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

int window_of(const RunConfig& cfg) {
  const auto w = cfg.integer("window");
  if (w < 1) throw ValidationError("window must be at least 1");
  return static_cast<int>(w);
}

LexiconSet lexicons_from(const RunConfig& cfg) {
  const auto& v = cfg.str("lexicons");
  if (v.empty()) return LexiconSet::english();
  fs::path p(v);
  if (!fs::is_directory(p)) {
    const auto bundled = fs::path(CHATLINK_DATA_DIR) / "lexicons" / v;
    if (fs::is_directory(bundled)) p = bundled;
  }
  return load_lexicons(p);
}

Corpus load_raw(const RunConfig& cfg) {
  const int W = window_of(cfg);
  Corpus c = load_corpus(cfg.require("corpus"), W);
  if (!cfg.str("annotations").empty()) load_annotations(cfg.str("annotations"), c, W);
  if (cfg.flag("filter")) {
    FilterBounds b;
    b.min_len = static_cast<std::size_t>(cfg.u64("min_len"));
    b.max_len = static_cast<std::size_t>(cfg.u64("max_len"));
    b.min_ratio = cfg.real("min_ratio");
    b.max_ratio = cfg.real("max_ratio");
    c.chats = filter_chats(c.chats, b);
    std::erase_if(c.annotations, [&](const AnnotationSet& a) { return !c.find_chat(a.chat_id); });
  }
  return c;
}

struct Prepared {
  Corpus corpus;  // normalized tokens, features filled in
  std::string vocab_hash;
  std::string lexicon_hash;
};

Prepared prepare(const RunConfig& cfg) {
  Prepared p;
  p.corpus = load_raw(cfg);
  const LexiconSet lx = lexicons_from(cfg);
  p.lexicon_hash = hash_hex(lx.hash());
  if (!cfg.str("vocab").empty()) {
    const Vocab v = load_vocab(cfg.str("vocab"), static_cast<std::size_t>(cfg.u64("vocab_size")));
    p.vocab_hash = hash_hex(v.hash());
    for (auto& c : p.corpus.chats) c = with_features(normalize_chat(c, v, lx), lx);
  } else {
    for (auto& c : p.corpus.chats) c = with_features(replace_types(c, lx), lx);
  }
  return p;
}

// Annotated chats in corpus order with their annotation sets.
struct Annotated {
  std::vector<Chat> chats;
  std::vector<AnnotationSet> sets;
};

Annotated annotated(const Corpus& corpus) {
  Annotated a;
  for (const auto& c : corpus.chats)
    if (const auto* s = corpus.find_annotations(c.chat_id); s && !s->entries.empty()) {
      a.chats.push_back(c);
      a.sets.push_back(*s);
    }
  if (a.chats.empty()) throw ValidationError("no annotated chats (set annotations=FILE)");
  return a;
}

LdaConfig lda_config(const RunConfig& cfg) {
  LdaConfig l;
  l.topics = static_cast<int>(cfg.integer("lda_topics"));
  l.alpha = cfg.real("lda_alpha");
  l.beta = cfg.real("lda_beta");
  l.iterations = static_cast<int>(cfg.integer("lda_iterations"));
  l.burn_in = static_cast<int>(cfg.integer("lda_burn_in"));
  l.sample_lag = static_cast<int>(cfg.integer("lda_sample_lag"));
  l.chain = static_cast<int>(cfg.integer("lda_chain"));
  l.seed = cfg.u64("seed");
  l.validate();
  return l;
}

std::vector<std::vector<TopicDist>> topic_dists(const std::vector<Chat>& chats, const RunConfig& cfg) {
  const auto& path = cfg.str("lda_model");
  if (path.empty()) throw ValidationError("lda mode needs lda_model=FILE (see lda-train)");
  const LdaModel model = load_lda(path);
  const LdaConfig lcfg = lda_config(cfg);
  std::vector<std::vector<TopicDist>> out;
  out.reserve(chats.size());
  for (const auto& c : chats) out.push_back(chat_topic_dists(model, c, lcfg));
  return out;
}

TrainConfig train_config(const RunConfig& cfg) {
  TrainConfig t;
  t.lambda = cfg.real("lambda");
  if (!(t.lambda >= 0.0)) throw ValidationError("lambda must be non-negative");
  t.window = window_of(cfg);
  t.label_policy = parse_label_policy(cfg.str("label_policy"));
  t.seed = cfg.u64("seed");
  const auto threads = cfg.integer("threads");
  if (threads < 1) throw ValidationError("threads must be at least 1");
  t.threads = static_cast<unsigned>(threads);
  return t;
}

OptimConfig optim_config(const RunConfig& cfg) {
  OptimConfig o;
  o.max_iters = static_cast<int>(cfg.integer("max_iters"));
  o.grad_tol = cfg.real("grad_tol");
  o.memory = static_cast<int>(cfg.integer("memory"));
  o.validate();
  return o;
}

json report_json(const OptimReport& r) {
  return {{"status", status_name(r.status)},
          {"iterations", r.iterations},
          {"evaluations", r.evaluations},
          {"value", r.value},
          {"grad_norm", r.grad_norm}};
}

struct Fit {
  Parameters params;
  OptimReport report;
};

Fit fit(const std::vector<Chat>& chats, const std::vector<AnnotationSet>& sets, Mode mode,
        const std::vector<std::vector<TopicDist>>& phi, const RunConfig& cfg) {
  const TrainConfig tc = train_config(cfg);
  std::vector<ChatGold> gold;
  for (const auto& s : sets) gold.push_back(gold_from_annotations(s, tc.label_policy));
  const ParamIndexer ix(kFeatureCount, tc.window, mode);
  auto r = train(ix, chats, gold, tc, optim_config(cfg), phi);
  return {std::move(r.params), std::move(r.report)};
}

void check_compatible(const ModelFile& m, const Prepared& p, const RunConfig& cfg, const std::string& path) {
  if (m.vocab_hash != p.vocab_hash)
    throw ValidationError(path + " was trained with a different vocabulary");
  if (m.lexicon_hash != p.lexicon_hash)
    throw ValidationError(path + " was trained with different lexicons");
  if (m.params.indexer.window() != window_of(cfg))
    throw ValidationError(path + " was trained with window " +
                          std::to_string(m.params.indexer.window()));
}

std::vector<std::vector<LinkLabel>> predict_all(const ModelFile& m, const std::vector<Chat>& chats,
                                                const RunConfig& cfg) {
  std::vector<std::vector<TopicDist>> phi;
  if (m.params.mode() == Mode::WithLda) phi = topic_dists(chats, cfg);
  std::vector<std::vector<LinkLabel>> out;
  for (std::size_t c = 0; c < chats.size(); ++c)
    out.push_back(predict(chats[c], m.params,
                          phi.empty() ? std::span<const TopicDist>{} : std::span<const TopicDist>(phi[c])));
  return out;
}

std::map<std::string, std::vector<LinkLabel>> load_predictions(const fs::path& path,
                                                               const std::vector<Chat>& chats,
                                                               int window) {
  Corpus tmp;
  tmp.chats = chats;
  load_annotations(path, tmp, window);
  std::map<std::string, std::vector<LinkLabel>> out;
  for (const auto& s : tmp.annotations) {
    if (s.entries.size() != 1)
      throw ValidationError(path.string() + ": several prediction records for chat " + s.chat_id);
    out[s.chat_id] = s.entries.begin()->second;
  }
  return out;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

// JSON-lines and TSV artifacts carry their config in a sidecar file.
void write_sidecar(const fs::path& out, const RunConfig& cfg) {
  write_json(fs::path(out.string() + ".config.json"), {{"config", cfg.to_json()}});
}

void emit(const json& j, const RunConfig& cfg) {
  if (cfg.str("out").empty())
    std::cout << j.dump(2) << '\n';
  else
    write_json(cfg.str("out"), j);
}

json with_config(json j, const RunConfig& cfg) {
  j["config"] = cfg.to_json();
  return j;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_ingest(const RunConfig& cfg) {
  const fs::path out = cfg.require("out");
  const Prepared p = prepare(cfg);
  std::ofstream os(out, std::ios::binary);
  if (!os) throw ValidationError("cannot write " + out.string());
  std::size_t messages = 0, sets = 0;
  for (const auto& c : p.corpus.chats) {
    json rec = chat_to_json(c);
    if (const auto* a = p.corpus.find_annotations(c.chat_id); a && !a->entries.empty()) {
      json ann = json::object();
      for (const auto& [id, labels] : a->entries) ann[id] = distances_of(labels);
      rec["annotations"] = std::move(ann);
      ++sets;
    }
    os << rec.dump() << '\n';
    messages += c.size();
  }
  write_sidecar(out, cfg);
  std::cout << json({{"chats", p.corpus.chats.size()},
                     {"messages", messages},
                     {"annotated_chats", sets}})
                   .dump()
            << '\n';
  return 0;
}

int cmd_stats(const RunConfig& cfg) {
  const Corpus c = load_raw(cfg);
  std::map<std::size_t, std::size_t> lengths;
  std::vector<std::size_t> ratio_bins(10, 0);
  double ratio_sum = 0.0, ratio_min = 1.0, ratio_max = 0.0;
  std::size_t messages = 0, ratio_n = 0;
  for (const auto& chat : c.chats) {
    ++lengths[chat.size()];
    messages += chat.size();
    if (chat.size() < 2) continue;
    const double r = exchange_ratio(chat);
    ratio_sum += r;
    ratio_min = std::min(ratio_min, r);
    ratio_max = std::max(ratio_max, r);
    ++ratio_bins[std::min<std::size_t>(static_cast<std::size_t>(r * 10.0), 9)];
    ++ratio_n;
  }
  json hist = json::array();
  for (const auto& [len, n] : lengths) hist.push_back({len, n});
  json ratio = {{"chats", ratio_n}, {"histogram", ratio_bins}};
  if (ratio_n > 0) {
    ratio["mean"] = ratio_sum / static_cast<double>(ratio_n);
    ratio["min"] = ratio_min;
    ratio["max"] = ratio_max;
  }
  std::size_t annotated_n = 0;
  for (const auto& a : c.annotations) annotated_n += !a.entries.empty();
  emit(with_config({{"chats", c.chats.size()},
                    {"messages", messages},
                    {"annotated_chats", annotated_n},
                    {"length_histogram", std::move(hist)},
                    {"exchange_ratio", std::move(ratio)}},
                   cfg),
       cfg);
  return 0;
}

int cmd_vocab(const RunConfig& cfg) {
  const fs::path out = cfg.require("out");
  const Corpus c = load_raw(cfg);
  const LexiconSet lx = lexicons_from(cfg);
  std::vector<Chat> typed;
  for (const auto& chat : c.chats) typed.push_back(replace_types(chat, lx));
  const Vocab v = build_vocab(typed, static_cast<std::ptrdiff_t>(cfg.integer("vocab_size")));
  save_vocab(out, v);
  write_sidecar(out, cfg);
  std::cout << json({{"words", v.size()}, {"hash", hash_hex(v.hash())}}).dump() << '\n';
  return 0;
}

int cmd_lda_train(const RunConfig& cfg) {
  const fs::path out = cfg.require("out");
  const Prepared p = prepare(cfg);
  const LdaConfig lcfg = lda_config(cfg);
  const LdaModel m = gibbs_train(lda_corpus_from_chats(p.corpus.chats), lcfg);
  save_lda(out, m, {{"config", cfg.to_json()}});
  std::cout << json({{"topics", m.topics()},
                     {"words", m.words().size()},
                     {"documents", m.doc_count()},
                     {"vocab_hash", hash_hex(m.vocab_hash())}})
                   .dump()
            << '\n';
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  const fs::path out = cfg.require("out");
  const Prepared p = prepare(cfg);
  const Annotated a = annotated(p.corpus);
  const Mode mode = parse_mode(cfg.str("mode"));
  std::vector<std::vector<TopicDist>> phi;
  if (mode == Mode::WithLda) phi = topic_dists(a.chats, cfg);
  const Fit f = fit(a.chats, a.sets, mode, phi, cfg);
  std::size_t messages = 0;
  for (const auto& c : a.chats) messages += c.size();
  ModelFile m{f.params, p.vocab_hash, p.lexicon_hash,
              {{"config", cfg.to_json()},
               {"optimizer", report_json(f.report)},
               {"chats", a.chats.size()},
               {"messages", messages}}};
  save_model(out, m);
  std::cout << report_json(f.report).dump() << '\n';
  if (f.report.status != OptimStatus::Converged)
    std::fprintf(stderr, "warning: optimizer stopped with status %s\n",
                 std::string(status_name(f.report.status)).c_str());
  return 0;
}

int cmd_predict(const RunConfig& cfg) {
  const fs::path out = cfg.require("out");
  const auto& model_path = cfg.require("model");
  const ModelFile m = load_model(model_path);
  const Prepared p = prepare(cfg);
  check_compatible(m, p, cfg, model_path);
  const auto preds = predict_all(m, p.corpus.chats, cfg);
  std::vector<AnnotationSet> sets;
  for (std::size_t c = 0; c < preds.size(); ++c)
    sets.push_back({p.corpus.chats[c].chat_id, {{"model", preds[c]}}});
  save_annotations(out, sets);
  write_sidecar(out, cfg);
  return 0;
}

int cmd_eval(const RunConfig& cfg) {
  const Prepared p = prepare(cfg);
  const Annotated a = annotated(p.corpus);
  ReportRows rows;
  auto add_row = [&](const std::string& name, const std::vector<std::vector<LinkLabel>>& preds) {
    rows.emplace_back(name, evaluate(preds, a.sets));
  };
  std::vector<std::vector<LinkLabel>> r1, r2;
  for (const auto& c : a.chats) {
    r1.push_back(rule1(c));
    r2.push_back(rule2(c));
  }
  add_row("Rule-based Baseline 1", r1);
  add_row("Rule-based Baseline 2", r2);
  for (const auto* key : {"model", "model_lda"}) {
    const auto& path = cfg.str(key);
    if (path.empty()) continue;
    const ModelFile m = load_model(path);
    check_compatible(m, p, cfg, path);
    if (std::string(key) == "model_lda") require_mode(m.params, Mode::WithLda);
    add_row(m.params.mode() == Mode::Base ? "Discriminative" : "Discriminative + LDA",
            predict_all(m, a.chats, cfg));
  }
  if (!cfg.str("predictions").empty()) {
    const auto loaded = load_predictions(cfg.str("predictions"), a.chats, window_of(cfg));
    std::vector<std::vector<LinkLabel>> preds;
    for (const auto& c : a.chats) {
      auto it = loaded.find(c.chat_id);
      if (it == loaded.end()) throw ValidationError("no prediction for chat " + c.chat_id);
      preds.push_back(it->second);
    }
    add_row("Predictions", preds);
  }
  json jrows = json::array();
  for (const auto& [name, r] : rows) jrows.push_back({{"method", name}, {"report", report_to_json(r)}});
  const auto j = with_config({{"chats", a.chats.size()}, {"rows", std::move(jrows)}}, cfg);
  std::cout << format_table(rows);
  if (!cfg.str("out").empty()) write_json(cfg.str("out"), j);
  return 0;
}

int cmd_crossval(const RunConfig& cfg) {
  const Prepared p = prepare(cfg);
  const Annotated a = annotated(p.corpus);
  const auto k = cfg.integer("folds");
  std::vector<Fold> folds;
  if (k == 1) {
    Fold all;
    for (std::size_t i = 0; i < a.chats.size(); ++i) all.train.push_back(i), all.test.push_back(i);
    folds.push_back(std::move(all));
  } else {
    folds = kfold_split(a.chats.size(), static_cast<int>(k), cfg.u64("seed"));
  }
  const bool with_lda = !cfg.str("lda_model").empty();
  std::vector<std::vector<TopicDist>> phi;
  if (with_lda) phi = topic_dists(a.chats, cfg);

  auto pick = [](const auto& v, const std::vector<std::size_t>& idx) {
    std::decay_t<decltype(v)> out;
    for (auto i : idx) out.push_back(v[i]);
    return out;
  };
  json jfolds = json::array();
  std::vector<std::string> names;
  std::map<std::string, MetricReport> mean;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto& fold = folds[f];
    const auto train_chats = pick(a.chats, fold.train), test_chats = pick(a.chats, fold.test);
    const auto train_sets = pick(a.sets, fold.train), test_sets = pick(a.sets, fold.test);
    ReportRows rows;
    std::vector<std::vector<LinkLabel>> r1, r2, disc, disc_lda;
    for (const auto& c : test_chats) {
      r1.push_back(rule1(c));
      r2.push_back(rule2(c));
    }
    rows.emplace_back("Rule-based Baseline 1", evaluate(r1, test_sets));
    rows.emplace_back("Rule-based Baseline 2", evaluate(r2, test_sets));
    json optim = json::object();
    const Fit base = fit(train_chats, train_sets, Mode::Base, {}, cfg);
    optim["Discriminative"] = report_json(base.report);
    for (const auto& c : test_chats) disc.push_back(predict(c, base.params));
    rows.emplace_back("Discriminative", evaluate(disc, test_sets));
    if (with_lda) {
      const auto train_phi = pick(phi, fold.train), test_phi = pick(phi, fold.test);
      const Fit lda = fit(train_chats, train_sets, Mode::WithLda, train_phi, cfg);
      optim["Discriminative + LDA"] = report_json(lda.report);
      for (std::size_t c = 0; c < test_chats.size(); ++c)
        disc_lda.push_back(predict(test_chats[c], lda.params, test_phi[c]));
      rows.emplace_back("Discriminative + LDA", evaluate(disc_lda, test_sets));
    }
    json jrows = json::array();
    for (const auto& [name, r] : rows) {
      jrows.push_back({{"method", name}, {"report", report_to_json(r)}});
      if (f == 0) names.push_back(name);
      mean[name].accuracy += r.accuracy / static_cast<double>(folds.size());
      mean[name].weighted_f1 += r.weighted_f1 / static_cast<double>(folds.size());
      mean[name].n_messages += r.n_messages;
    }
    jfolds.push_back({{"fold", f},
                      {"train_chats", fold.train.size()},
                      {"test_chats", fold.test.size()},
                      {"rows", std::move(jrows)},
                      {"optimizer", std::move(optim)}});
    std::printf("fold %zu\n%s", f, format_table(rows).c_str());
  }
  ReportRows mean_rows;
  json jmean = json::array();
  for (const auto& name : names) {
    mean_rows.emplace_back(name, mean[name]);
    jmean.push_back({{"method", name},
                     {"accuracy", mean[name].accuracy},
                     {"weighted_f1", mean[name].weighted_f1}});
  }
  std::printf("mean over %zu folds\n%s", folds.size(), format_table(mean_rows).c_str());
  const auto j = with_config({{"k", folds.size()}, {"folds", std::move(jfolds)}, {"mean", std::move(jmean)}}, cfg);
  if (!cfg.str("out").empty()) write_json(cfg.str("out"), j);
  return 0;
}

int cmd_kappa(const RunConfig& cfg) {
  const Corpus c = load_raw(cfg);
  std::vector<AnnotationSet> sets;
  for (const auto& chat : c.chats)
    if (const auto* s = c.find_annotations(chat.chat_id); s && !s->entries.empty()) sets.push_back(*s);
  if (sets.empty()) throw ValidationError("no annotated chats (set annotations=FILE)");
  json j = {{"chats", sets.size()}};
  j["fleiss_kappa"] = fleiss_kappa(sets);
  const auto h = human_performance(sets);
  j["human_performance"] = {{"mean", h.mean}, {"std", h.std}, {"per_annotator", h.per_annotator}};
  j["upper_bound"] = agreement_upper_bound(sets);
  const auto s = agreement_summary(sets);
  j["messages"] = s.n_messages;
  j["unanimous"] = s.unanimous;
  j["at_least_two_agree"] = s.at_least_two;
  std::printf("fleiss kappa       %.4f\nhuman performance  %.4f +- %.4f\nupper bound        %.4f\n",
              j["fleiss_kappa"].get<double>(), h.mean, h.std, j["upper_bound"].get<double>());
  if (!cfg.str("out").empty()) write_json(cfg.str("out"), with_config(j, cfg));
  return 0;
}

int cmd_synth(const RunConfig& cfg) {
  const fs::path out = cfg.require("out");
  SynthConfig s;
  s.n_chats = static_cast<std::size_t>(cfg.u64("synth_chats"));
  s.min_len = static_cast<std::size_t>(cfg.u64("synth_min_len"));
  s.max_len = static_cast<std::size_t>(cfg.u64("synth_max_len"));
  s.alternation = cfg.real("synth_alternation");
  s.annotators = static_cast<std::size_t>(cfg.u64("synth_annotators"));
  s.disagreement = cfg.real("synth_disagreement");
  s.feature_noise = cfg.real("synth_feature_noise");
  s.topics = static_cast<int>(cfg.integer("synth_topics"));
  s.topic_follow = cfg.real("synth_topic_follow");
  s.theta_star = default_theta_star(window_of(cfg));
  s.seed = cfg.u64("seed");
  const SynthCorpus corpus = sample_corpus(s);
  fs::create_directories(out);
  save_corpus(out / "corpus.jsonl", corpus.chats);
  save_annotations(out / "annotations.jsonl", corpus.annotations);
  const double oracle = oracle_accuracy(s.theta_star, corpus.chats, corpus.gold);
  save_model(out / "theta_star.json",
             {s.theta_star, "", hash_hex(LexiconSet::english().hash()),
              {{"config", cfg.to_json()}, {"generator", true}}});
  write_json(out / "config.json", {{"config", cfg.to_json()}});
  std::size_t messages = 0;
  for (const auto& c : corpus.chats) messages += c.size();
  std::cout << json({{"chats", corpus.chats.size()}, {"messages", messages}, {"oracle_accuracy", oracle}})
                   .dump()
            << '\n';
  return 0;
}

int cmd_gradcheck(const RunConfig& cfg) {
  const auto instances = cfg.integer("gradcheck_instances");
  if (instances < 1) throw ValidationError("gradcheck_instances must be at least 1");
  const std::uint64_t seed = cfg.u64("seed");
  TrainConfig tc = train_config(cfg);

  // Chats and gold: subsets of the configured corpus, or seeded tiny synthetic ones.
  std::vector<Chat> chats;
  std::vector<ChatGold> gold;
  if (!cfg.str("corpus").empty()) {
    const Annotated a = annotated(prepare(cfg).corpus);
    chats = a.chats;
    for (const auto& s : a.sets) gold.push_back(gold_from_annotations(s, tc.label_policy));
  }

  double worst = 0.0;
  json per_mode = json::object();
  for (Mode mode : {Mode::Base, Mode::WithLda}) {
    const ParamIndexer ix(kFeatureCount, tc.window, mode);
    double mode_worst = 0.0;
    for (long long r = 0; r < instances; ++r) {
      Rng rng(derive_seed(seed, "gradcheck-" + std::string(mode_name(mode)) + "-" + std::to_string(r)));
      std::vector<Chat> inst_chats;
      std::vector<ChatGold> inst_gold;
      if (!chats.empty()) {
        // a small random subset keeps finite differences cheap
        for (int q = 0; q < 5 && q < static_cast<int>(chats.size()); ++q) {
          const auto pick = rng.below(chats.size());
          inst_chats.push_back(chats[pick]);
          inst_gold.push_back(gold[pick]);
        }
      } else {
        SynthConfig s;
        s.n_chats = 3;
        s.min_len = 1;
        s.max_len = 6;
        s.theta_star = default_theta_star(tc.window);
        s.seed = rng.next();
        const auto sc = sample_corpus(s);
        inst_chats = sc.chats;
        for (const auto& g : sc.gold) inst_gold.push_back(gold_from_labels(g));
      }
      std::vector<std::vector<TopicDist>> phi;
      if (mode == Mode::WithLda)
        for (const auto& c : inst_chats) {
          std::vector<TopicDist> row;
          for (std::size_t i = 0; i < c.size(); ++i) {
            TopicDist d;
            double z = 0.0;
            for (int t = 0; t < 4; ++t) z += d.phi.emplace_back(0.05 + rng.uniform());
            for (auto& v : d.phi) v /= z;
            row.push_back(std::move(d));
          }
          phi.push_back(std::move(row));
        }
      auto objective = make_objective(ix, inst_chats, inst_gold, tc, phi);
      std::vector<double> theta(ix.dimension());
      for (auto& v : theta) v = 2.0 * rng.uniform() - 1.0;
      const auto res = grad_check(objective, theta);
      mode_worst = std::max(mode_worst, res.max_rel_error);
    }
    per_mode[std::string(mode_name(mode))] = mode_worst;
    worst = std::max(worst, mode_worst);
  }
  const bool ok = worst < 1e-6;
  std::printf("max relative error %.3e over %lld instances per objective: %s\n", worst, instances,
              ok ? "ok" : "FAILED");
  if (!cfg.str("out").empty())
    write_json(cfg.str("out"), with_config({{"instances", instances},
                                            {"max_rel_error", worst},
                                            {"per_mode", per_mode},
                                            {"passed", ok}},
                                           cfg));
  return ok ? 0 : 1;
}

int cmd_serve(const RunConfig& cfg) {
  const int W = window_of(cfg);
  Corpus c = load_raw(cfg);
  std::map<std::string, std::vector<int>> preds;
  if (!cfg.str("predictions").empty())
    for (const auto& [id, labels] : load_predictions(cfg.str("predictions"), c.chats, W))
      preds[id] = distances_of(labels);
  fs::path store = cfg.str("annotations");
  if (store.empty()) store = cfg.str("out");
  AnnotationService svc(std::move(c), W, store, std::move(preds));
  httplib::Server server;
  const fs::path static_dir = cfg.str("static_dir");
  if (!static_dir.empty() && !fs::is_directory(static_dir))
    throw ValidationError("static_dir not found: " + static_dir.string());
  mount(server, svc, static_dir);
  const auto& host = cfg.str("host");
  const auto port = cfg.integer("port");
  if (port < 0 || port > 65535) throw ValidationError("port must be in [0, 65535]");
  const int bound = port == 0 ? server.bind_to_any_port(host)
                              : (server.bind_to_port(host, static_cast<int>(port)) ? static_cast<int>(port) : -1);
  if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  std::printf("listening on http://%s:%d\n", host.c_str(), bound);
  std::fflush(stdout);
  return server.listen_after_bind() ? 0 : 2;
}

struct Command {
  const char* name;
  const char* help;
  int (*run)(const RunConfig&);
};

constexpr Command kCommands[] = {
    {"ingest", "validate and normalize a corpus", cmd_ingest},
    {"stats", "exchange ratios and length histogram", cmd_stats},
    {"vocab", "build a vocabulary file", cmd_vocab},
    {"lda-train", "train the message topic model", cmd_lda_train},
    {"train", "train a link model (mode=base|lda)", cmd_train},
    {"predict", "predict links with a trained model", cmd_predict},
    {"eval", "accuracy and weighted F1 against annotations, with baselines", cmd_eval},
    {"crossval", "k-fold cross-validation", cmd_crossval},
    {"kappa", "inter-annotator agreement", cmd_kappa},
    {"synth", "sample a synthetic annotated corpus", cmd_synth},
    {"gradcheck", "check objective gradients against finite differences", cmd_gradcheck},
    {"serve", "HTTP service for the annotation UI", cmd_serve},
};

struct CommandArgs {
  std::string config_file;
  std::vector<std::string> overrides;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"chatlink: reply-to link prediction for two-party chats"};
  app.require_subcommand(1);
  std::deque<CommandArgs> args;
  std::vector<std::pair<CLI::App*, const Command*>> subs;
  for (const auto& cmd : kCommands) {
    auto* sub = app.add_subcommand(cmd.name, cmd.help);
    auto& a = args.emplace_back();
    sub->add_option("--config", a.config_file, "key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--set", a.overrides, "key=value override (repeatable)");
    for (const auto& key : kConfigKeys) {
      const std::string name(key.name);
      std::string flags = "--" + name;
      if (name.find('_') != std::string::npos) {
        std::string dashed = name;
        std::replace(dashed.begin(), dashed.end(), '_', '-');
        flags += ",--" + dashed;
      }
      if (name == "folds") flags += ",--k";
      std::string help(key.help);
      if (!key.default_value.empty()) help += " (default " + std::string(key.default_value) + ")";
      a.options[name] = sub->add_option(flags, a.values[name], help);
    }
    subs.emplace_back(sub, &cmd);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (!subs[i].first->parsed()) continue;
    const auto& a = args[i];
    try {
      RunConfig cfg;
      if (!a.config_file.empty()) cfg.load_file(a.config_file);
      for (const auto& kv : a.overrides) cfg.apply_override(kv);
      for (const auto& [name, opt] : a.options)
        if (opt->count() > 0) cfg.set(name, a.values.at(name));
      return subs[i].second->run(cfg);
    } catch (const ValidationError& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return 1;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "internal error: %s\n", e.what());
      return 2;
    }
  }
  return 1;
}
