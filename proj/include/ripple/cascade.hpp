#pragma once

// Experiment pipelines. A corpus is split by dialogue; the per-exchange
// understanding predictor is stacked over jack-knife folds so its training
// feature is always an out-of-fold prediction; dialogue-level datasets are
// assembled per window and understanding-mode; a grid of configurations is
// scored on one shared split so paired tests are valid.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "ripple/core.hpp"
#include "ripple/dialog.hpp"
#include "ripple/metrics.hpp"
#include "ripple/ripper.hpp"
#include "ripple/tabular.hpp"

namespace ripple {

// ---- configuration ----

enum class SluMode {
  none,    // no understanding feature
  auto_,   // stacked predictions in train, model predictions in test
  hlt,     // hand labels in train, model predictions in test
  oracle   // hand labels on both sides
};

inline const char* to_string(SluMode m) {
  switch (m) {
    case SluMode::none: return "none";
    case SluMode::auto_: return "auto";
    case SluMode::hlt: return "hlt";
    case SluMode::oracle: return "oracle";
  }
  return "?";
}

inline SluMode parse_slu_mode(const std::string& s) {
  std::string v = lower(s);
  if (v == "none") return SluMode::none;
  if (v == "auto") return SluMode::auto_;
  if (v == "hlt") return SluMode::hlt;
  if (v == "oracle") return SluMode::oracle;
  fail("unknown-slu-mode", "no understanding mode named: " + s);
}

struct ExperimentConfig {
  Window window = Window::ex12;
  std::string feature_set = "auto";
  SluMode slu_mode = SluMode::none;
  TrainConfig learner;
  std::size_t folds = 4;
  bool collapse_slu = false;  // two-way understanding vocabulary when set
  std::uint64_t seed = 0;
  double test_fraction = 867.0 / 4692.0;
};

inline void validate_experiment_config(const ExperimentConfig& c) {
  if (c.folds < 2) fail("invalid-folds", "stacking needs at least two folds");
  if (!(c.test_fraction > 0.0) || !(c.test_fraction < 1.0))
    fail("invalid-fraction", "test fraction must lie strictly inside (0,1)");
}

inline json experiment_config_to_json(const ExperimentConfig& c) {
  return json{{"window", to_string(c.window)},
              {"feature_set", c.feature_set},
              {"slu_mode", to_string(c.slu_mode)},
              {"learner", config_to_json(c.learner)},
              {"folds", c.folds},
              {"collapse_slu", c.collapse_slu},
              {"seed", c.seed},
              {"test_fraction", c.test_fraction}};
}

inline ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig c;
  if (j.contains("window")) c.window = parse_window(j.at("window").get<std::string>());
  if (j.contains("feature_set")) c.feature_set = j.at("feature_set").get<std::string>();
  if (j.contains("slu_mode")) c.slu_mode = parse_slu_mode(j.at("slu_mode").get<std::string>());
  if (j.contains("learner")) c.learner = config_from_json(j.at("learner"));
  if (j.contains("folds")) c.folds = j.at("folds").get<std::size_t>();
  if (j.contains("collapse_slu")) c.collapse_slu = j.at("collapse_slu").get<bool>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("test_fraction")) c.test_fraction = j.at("test_fraction").get<double>();
  return c;
}

// Short display name: "<feature-set>/<mode>[+collapsed]@<window>".
inline std::string config_name(const ExperimentConfig& c) {
  std::string s = c.feature_set;
  s += '/';
  s += to_string(c.slu_mode);
  if (c.collapse_slu) s += "+collapsed";
  s += '@';
  s += to_string(c.window);
  return s;
}

// ---- corpus split ----

struct CorpusSplit {
  std::vector<std::size_t> train, test;  // dialogue indices, ascending
  // exchange views: (dialogue index, 1-based exchange index)
  std::vector<std::pair<std::size_t, std::size_t>> train_exchanges, test_exchanges;
};

namespace detail {

inline std::vector<std::pair<std::size_t, std::size_t>> exchange_view(
    const std::vector<DialogueRecord>& corpus, const std::vector<std::size_t>& idx) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (auto i : idx)
    for (std::size_t e = 1; e <= corpus[i].exchanges.size(); ++e)
      out.emplace_back(i, e);
  return out;
}

// Deterministic dialogue-level split of the given index pool; both sides are
// returned in ascending original order.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::vector<std::size_t> pool, std::uint64_t seed, double test_fraction) {
  if (pool.size() < 2) fail("empty", "need at least two dialogues to split");
  std::shuffle(pool.begin(), pool.end(), std::mt19937_64(mix_seed(seed, "split")));
  auto want = std::llround(static_cast<double>(pool.size()) * test_fraction);
  std::size_t n_test = static_cast<std::size_t>(
      std::min<long long>(static_cast<long long>(pool.size()) - 1, std::max<long long>(1, want)));
  std::vector<std::size_t> test(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> train(pool.begin() + static_cast<std::ptrdiff_t>(n_test), pool.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  return {std::move(train), std::move(test)};
}

}  // namespace detail

inline CorpusSplit split_corpus(const std::vector<DialogueRecord>& corpus,
                                std::uint64_t seed,
                                double test_fraction = 867.0 / 4692.0) {
  if (corpus.empty()) fail("empty", "cannot split an empty corpus");
  if (!(test_fraction > 0.0) || !(test_fraction < 1.0))
    fail("invalid-fraction", "test fraction must lie strictly inside (0,1)");
  std::vector<std::size_t> pool(corpus.size());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  CorpusSplit s;
  std::tie(s.train, s.test) = detail::split_indices(std::move(pool), seed, test_fraction);
  s.train_exchanges = detail::exchange_view(corpus, s.train);
  s.test_exchanges = detail::exchange_view(corpus, s.test);
  return s;
}

// ---- jack-knife stacking ----

struct StackedCorpus {
  std::size_t folds = 0;
  bool collapse = false;  // two-way understanding vocabulary
  std::uint64_t seed = 0;
  std::vector<std::string> train_ids;  // dialogues whose rows carry stacked values
  std::vector<std::string> test_ids;   // informational: the companion test side
  std::vector<std::vector<std::string>> fold_dialogues;  // provenance per fold
  std::map<std::string, std::size_t> fold_of;            // dialogue -> fold
  std::map<std::string, std::string> values;             // exchange row id -> label
  RuleSet full_model;  // trained on every training exchange, for the test side
};

namespace detail {

inline std::string dialogue_of(const std::string& row_id) {
  auto pos = row_id.rfind("#e");
  return pos == std::string::npos ? row_id : row_id.substr(0, pos);
}

}  // namespace detail

// Partitions the training exchanges into near-equal folds by dialogue, trains
// one model per fold on the other folds, and records that model's predictions
// for the held-out rows; a full-train model is kept for test-side use.
inline StackedCorpus jackknife_stack(const Dataset& train_exchanges,
                                     const TrainConfig& learner, std::size_t folds,
                                     std::uint64_t seed) {
  if (train_exchanges.rows.empty()) fail("empty", "no exchanges to stack");
  if (folds < 2) fail("invalid-folds", "stacking needs at least two folds");

  StackedCorpus st;
  st.folds = folds;
  st.collapse = train_exchanges.schema.classes == slu_binary_classes();
  st.seed = seed;

  for (const auto& row : train_exchanges.rows) {
    std::string dlg = detail::dialogue_of(row.id);
    if (!st.fold_of.count(dlg)) {
      st.fold_of.emplace(dlg, 0);  // placeholder until folds are drawn
      st.train_ids.push_back(dlg);
    }
  }
  if (folds > st.train_ids.size())
    fail("too-many-folds", "more folds than dialogues: " + std::to_string(folds) +
                               " > " + std::to_string(st.train_ids.size()));

  std::vector<std::string> order = st.train_ids;
  std::shuffle(order.begin(), order.end(), std::mt19937_64(mix_seed(seed, "folds")));
  st.fold_dialogues.assign(folds, {});
  std::size_t base = order.size() / folds, rem = order.size() % folds, at = 0;
  for (std::size_t f = 0; f < folds; ++f) {
    std::size_t take = base + (f < rem ? 1 : 0);
    for (std::size_t k = 0; k < take; ++k, ++at) {
      st.fold_dialogues[f].push_back(order[at]);
      st.fold_of[order[at]] = f;
    }
  }

  for (std::size_t f = 0; f < folds; ++f) {
    Dataset fit, held;
    fit.schema = train_exchanges.schema;
    held.schema = train_exchanges.schema;
    for (const auto& row : train_exchanges.rows) {
      if (st.fold_of.at(detail::dialogue_of(row.id)) == f)
        held.rows.push_back(row);
      else
        fit.rows.push_back(row);
    }
    RuleSet model = train(fit, learner);
    auto preds = predict_dataset(model, held);
    for (std::size_t r = 0; r < held.rows.size(); ++r)
      st.values[held.rows[r].id] = preds[r].cls;
  }
  st.full_model = train(train_exchanges, learner);
  return st;
}

struct LeakageAudit {
  std::size_t total = 0;       // stacked values examined
  std::size_t violations = 0;  // values whose producing model saw their dialogue
};

// Re-derives the no-leakage invariant from recorded provenance alone: each
// stacked value's dialogue must sit in exactly the one fold whose model never
// trained on it.
inline LeakageAudit audit_no_leakage(const StackedCorpus& st) {
  std::map<std::string, std::vector<std::size_t>> folds_holding;
  for (std::size_t f = 0; f < st.fold_dialogues.size(); ++f)
    for (const auto& dlg : st.fold_dialogues[f]) folds_holding[dlg].push_back(f);
  LeakageAudit a;
  for (const auto& [row_id, value] : st.values) {
    (void)value;
    a.total++;
    std::string dlg = detail::dialogue_of(row_id);
    auto fit = st.fold_of.find(dlg);
    auto hit = folds_holding.find(dlg);
    bool ok = fit != st.fold_of.end() && hit != folds_holding.end() &&
              hit->second.size() == 1 && hit->second.front() == fit->second;
    if (!ok) a.violations++;
  }
  return a;
}

inline json stacked_to_json(const StackedCorpus& st) {
  json values = json::object();
  for (const auto& [id, v] : st.values) values[id] = v;
  return json{{"format", "stacked"},
              {"folds", st.folds},
              {"collapse", st.collapse},
              {"seed", st.seed},
              {"train_ids", st.train_ids},
              {"test_ids", st.test_ids},
              {"fold_dialogues", st.fold_dialogues},
              {"values", values},
              {"full_model", ruleset_to_json(st.full_model)}};
}

inline StackedCorpus stacked_from_json(const json& j) {
  if (!j.contains("format") || j.at("format") != "stacked")
    fail("bad-format", "not a stacked-corpus record");
  StackedCorpus st;
  st.folds = j.at("folds").get<std::size_t>();
  st.collapse = j.at("collapse").get<bool>();
  st.seed = j.at("seed").get<std::uint64_t>();
  st.train_ids = j.at("train_ids").get<std::vector<std::string>>();
  st.test_ids = j.at("test_ids").get<std::vector<std::string>>();
  st.fold_dialogues = j.at("fold_dialogues").get<std::vector<std::vector<std::string>>>();
  if (st.fold_dialogues.size() != st.folds)
    fail("bad-format", "fold provenance does not match fold count");
  for (std::size_t f = 0; f < st.fold_dialogues.size(); ++f)
    for (const auto& dlg : st.fold_dialogues[f]) st.fold_of[dlg] = f;
  for (const auto& [id, v] : j.at("values").items())
    st.values[id] = v.get<std::string>();
  st.full_model = ruleset_from_json(j.at("full_model"));
  return st;
}

inline std::string save_stacked_text(const StackedCorpus& st) {
  return stacked_to_json(st).dump(2) + "\n";
}

inline StackedCorpus load_stacked_text(const std::string& text) {
  return stacked_from_json(json::parse(text));
}

// ---- understanding predictor ----

// Collapses a four-way understanding dataset to the two-way vocabulary.
inline Dataset collapse_exchange_dataset(const Dataset& ds) {
  if (ds.schema.classes == slu_binary_classes()) return ds;
  if (ds.schema.classes != slu_classes())
    fail("label-unknown", "dataset does not carry the four-way understanding label");
  Dataset out;
  std::vector<FeatureDecl> decls;
  for (const auto& d : ds.schema.features)
    if (d.group != FeatureGroup::label) decls.push_back(d);
  decls.push_back(FeatureDecl{ds.schema.label_name, FeatureKind::symbolic,
                              FeatureGroup::label, slu_binary_classes()});
  out.schema = define_schema(decls);
  out.rows = ds.rows;
  for (auto& row : out.rows)
    if (row.label) row.label = collapse_slu_binary(*row.label);
  return out;
}

// Trains the per-exchange understanding model on the named feature subset.
inline RuleSet train_slu_predictor(const Dataset& exchanges,
                                   const std::string& feature_set,
                                   const TrainConfig& learner, bool collapse,
                                   const FeatureCatalog& cat = default_catalog()) {
  for (const auto& row : exchanges.rows)
    if (!row.label) fail("unlabeled", "exchange without understanding label: " + row.id);
  Dataset ds = collapse ? collapse_exchange_dataset(exchanges) : exchanges;
  std::vector<std::string> names;
  for (const auto& n : feature_set_names(cat, feature_set))
    if (ds.schema.has(n)) names.push_back(n);
  return train(project(ds, names), learner);
}

// Predicts the understanding label of one exchange from automatic features,
// projected onto the model's schema.
inline std::string predict_exchange(const RuleSet& model, const DialogueRecord& d,
                                    std::size_t k) {
  FeatureVector enc = encode_exchange(d, k, "", false);
  FeatureVector row;
  row.id = d.id + "#e" + std::to_string(k);
  for (auto& [name, value] : enc.values)
    if (model.schema.has(name)) row.values[name] = std::move(value);
  return predict(model, row).cls;
}

// ---- dialogue-level dataset assembly ----

namespace detail {

// The exchanges a window emits for this dialogue, mirroring build_window.
inline std::vector<std::size_t> emitted_exchanges(const DialogueRecord& d, Window w) {
  std::size_t upto = w == Window::ex1    ? std::min<std::size_t>(1, d.exchanges.size())
                     : w == Window::ex12 ? std::min<std::size_t>(2, d.exchanges.size())
                                         : d.exchanges.size();
  std::vector<std::size_t> out;
  for (std::size_t k = 1; k <= upto; ++k) {
    if (w == Window::ex12 && k == 2 && d.exchanges[1].closing_prompt_only) break;
    out.push_back(k);
  }
  return out;
}

inline std::string hand_slu_value(const DialogueRecord& d, std::size_t k, bool collapse) {
  std::string label;
  try {
    label = derive_slu_label(d.exchanges[k - 1]);
  } catch (const error&) {
    fail("mode-requires-hand",
         "no hand understanding label for " + d.id + "#e" + std::to_string(k));
  }
  return collapse ? collapse_slu_binary(label) : label;
}

}  // namespace detail

// One labeled row per dialogue (corpus order), with per-exchange
// understanding features injected per the configured mode. Training-side
// dialogues (per stacked provenance) receive stacked values under AUTO and
// hand labels under HLT; everything else receives full-model predictions;
// ORACLE always uses hand labels and NONE injects nothing.
inline Dataset assemble_pdp_dataset(const std::vector<DialogueRecord>& corpus,
                                    const ExperimentConfig& cfg,
                                    const StackedCorpus* stacked,
                                    const FeatureCatalog& cat = default_catalog()) {
  validate_experiment_config(cfg);
  bool needs_stacked = cfg.slu_mode == SluMode::auto_ || cfg.slu_mode == SluMode::hlt;
  if (needs_stacked && !stacked)
    fail("mode-requires-stacked", "understanding mode needs a stacked corpus");
  if (needs_stacked && stacked->collapse != cfg.collapse_slu)
    fail("stacked-mismatch", "stacked corpus vocabulary does not match collapse flag");

  bool set_has_feature = false;
  for (const auto& n : feature_set_names(cat, cfg.feature_set))
    if (lower(n) == "auto-slu-success") set_has_feature = true;
  bool inject = cfg.slu_mode != SluMode::none && set_has_feature;

  std::size_t max_ex = 1;
  for (const auto& d : corpus) max_ex = std::max(max_ex, d.exchanges.size());
  SluInject mode = !inject           ? SluInject::none
                   : cfg.collapse_slu ? SluInject::two_class
                                      : SluInject::four_class;
  Dataset ds;
  ds.schema = make_window_schema(cat, cfg.feature_set, cfg.window, max_ex, mode);

  std::set<std::string> member;
  if (needs_stacked) member.insert(stacked->train_ids.begin(), stacked->train_ids.end());

  for (const auto& d : corpus) {
    FeatureVector fv = build_window(d, cfg.window, cat, cfg.feature_set);
    if (inject) {
      bool in_train = member.count(d.id) > 0;
      for (std::size_t k : detail::emitted_exchanges(d, cfg.window)) {
        std::string value;
        switch (cfg.slu_mode) {
          case SluMode::oracle:
            value = detail::hand_slu_value(d, k, cfg.collapse_slu);
            break;
          case SluMode::hlt:
            value = in_train ? detail::hand_slu_value(d, k, cfg.collapse_slu)
                             : predict_exchange(stacked->full_model, d, k);
            break;
          case SluMode::auto_: {
            if (in_train) {
              auto it = stacked->values.find(d.id + "#e" + std::to_string(k));
              value = it != stacked->values.end()
                          ? it->second
                          : predict_exchange(stacked->full_model, d, k);
            } else {
              value = predict_exchange(stacked->full_model, d, k);
            }
            break;
          }
          case SluMode::none: break;
        }
        fv.values["e" + std::to_string(k) + "-auto-SLU-success"] = value;
      }
    }
    ds.rows.push_back(std::move(fv));
  }
  validate(ds);
  return ds;
}

// ---- experiment grid ----

struct ExperimentRun {
  CorpusSplit split;
  Baseline baseline;  // majority class of train outcomes, scored on test
  std::vector<EvalReport> reports;
};

inline ExperimentRun run_experiment(const std::vector<DialogueRecord>& corpus,
                                    const std::vector<ExperimentConfig>& grid,
                                    const FeatureCatalog& cat = default_catalog()) {
  if (grid.empty()) fail("empty", "experiment grid is empty");
  for (const auto& cfg : grid) validate_experiment_config(cfg);

  ExperimentRun run;
  run.split = split_corpus(corpus, grid[0].seed, grid[0].test_fraction);

  // shared labels: identical across configurations, so reports stay aligned
  std::vector<std::string> train_labels;
  for (auto i : run.split.train) {
    try {
      train_labels.push_back(binary_outcome(derive_outcome(corpus[i])));
    } catch (const error&) {
    }
  }
  std::vector<std::pair<std::size_t, std::string>> scored;  // (test row pos, truth)
  for (std::size_t pos = 0; pos < run.split.test.size(); ++pos) {
    try {
      scored.emplace_back(pos, binary_outcome(derive_outcome(corpus[run.split.test[pos]])));
    } catch (const error&) {
    }
  }
  if (train_labels.empty() || scored.empty())
    fail("unlabeled", "no derivable outcomes on one side of the split");
  run.baseline = majority_baseline(train_labels, outcome_binary_classes());
  {
    long long hits = 0;
    for (const auto& [pos, truth] : scored)
      if (truth == run.baseline.cls) hits++;
    run.baseline.accuracy = static_cast<double>(hits) / static_cast<double>(scored.size());
  }

  std::vector<DialogueRecord> train_dialogues;
  train_dialogues.reserve(run.split.train.size());
  for (auto i : run.split.train) train_dialogues.push_back(corpus[i]);
  std::vector<std::string> test_ids;
  for (auto i : run.split.test) test_ids.push_back(corpus[i].id);

  std::map<bool, Dataset> exchange_cache;   // collapse -> train-side exchange rows
  std::map<std::string, StackedCorpus> stack_cache;

  for (const auto& cfg : grid) {
    const StackedCorpus* st = nullptr;
    if (cfg.slu_mode == SluMode::auto_ || cfg.slu_mode == SluMode::hlt) {
      std::string key = std::to_string(cfg.folds) + "|" +
                        (cfg.collapse_slu ? "1" : "0") + "|" +
                        std::to_string(cfg.seed) + "|" + config_to_json(cfg.learner).dump();
      auto cached = stack_cache.find(key);
      if (cached == stack_cache.end()) {
        if (!exchange_cache.count(cfg.collapse_slu))
          exchange_cache.emplace(cfg.collapse_slu,
                                 make_exchange_dataset(train_dialogues, cat, "auto",
                                                       cfg.collapse_slu));
        StackedCorpus sc = jackknife_stack(exchange_cache.at(cfg.collapse_slu),
                                           cfg.learner, cfg.folds, cfg.seed);
        sc.test_ids = test_ids;
        cached = stack_cache.emplace(key, std::move(sc)).first;
      }
      st = &cached->second;
    }

    Dataset all = assemble_pdp_dataset(corpus, cfg, st, cat);
    Dataset fit, eval;
    fit.schema = all.schema;
    eval.schema = all.schema;
    for (auto i : run.split.train)
      if (all.rows[i].label) fit.rows.push_back(all.rows[i]);
    for (auto i : run.split.test) eval.rows.push_back(all.rows[i]);

    RuleSet model = train(fit, cfg.learner);
    auto preds = predict_dataset(model, eval);

    std::vector<std::string> truth, predicted;
    EvalReport rep;
    for (const auto& [pos, label] : scored) {
      truth.push_back(label);
      predicted.push_back(preds[pos].cls);
      rep.correctness.push_back(label == preds[pos].cls ? 1.0 : 0.0);
    }
    rep.config = experiment_config_to_json(cfg);
    rep.matrix = confusion(truth, predicted, outcome_binary_classes());
    rep.accuracy = accuracy(rep.matrix);
    rep.pr = precision_recall(rep.matrix);
    rep.baseline = run.baseline;
    run.reports.push_back(std::move(rep));
  }

  for (std::size_t i = 1; i < run.reports.size(); ++i)
    run.reports[i].ttests.push_back(TTestEntry{
        config_name(grid[0]),
        paired_t(run.reports[i].correctness, run.reports[0].correctness)});
  return run;
}

// Plain-text grid: rows are feature-set/mode pairs in first-appearance
// order (baseline first), columns are the windows present in the grid.
inline std::string render_experiment_table(const std::vector<ExperimentConfig>& grid,
                                           const ExperimentRun& run) {
  if (grid.size() != run.reports.size())
    fail("length-mismatch", "grid and reports differ in length");
  std::vector<Window> cols;
  std::vector<std::string> rows;
  std::map<std::string, std::map<std::string, double>> cell;  // row -> window -> acc
  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::string rname = grid[i].feature_set;
    rname += '/';
    rname += to_string(grid[i].slu_mode);
    if (grid[i].collapse_slu) rname += "+collapsed";
    std::string wname = to_string(grid[i].window);
    if (std::find(cols.begin(), cols.end(), grid[i].window) == cols.end())
      cols.push_back(grid[i].window);
    if (std::find(rows.begin(), rows.end(), rname) == rows.end()) rows.push_back(rname);
    cell[rname][wname] = run.reports[i].accuracy;
  }

  std::size_t label_w = std::string("baseline (" + run.baseline.cls + ")").size();
  for (const auto& r : rows) label_w = std::max(label_w, r.size());

  char buf[64];
  std::string out;
  auto pad = [&](const std::string& s, std::size_t w) {
    out += s;
    out.append(w > s.size() ? w - s.size() : 0, ' ');
  };
  pad("configuration", label_w + 2);
  for (auto w : cols) {
    std::snprintf(buf, sizeof buf, "%8s", to_string(w));
    out += buf;
  }
  out += '\n';
  pad("baseline (" + run.baseline.cls + ")", label_w + 2);
  for (std::size_t c = 0; c < cols.size(); ++c) {
    std::snprintf(buf, sizeof buf, "%8.1f", run.baseline.accuracy * 100.0);
    out += buf;
  }
  out += '\n';
  for (const auto& r : rows) {
    pad(r, label_w + 2);
    for (auto w : cols) {
      auto it = cell[r].find(to_string(w));
      if (it == cell[r].end()) {
        std::snprintf(buf, sizeof buf, "%8s", "-");
      } else {
        std::snprintf(buf, sizeof buf, "%8.1f", it->second * 100.0);
      }
      out += buf;
    }
    out += '\n';
  }
  return out;
}

// ---- balanced two-class subsample ----

// Filters dialogues to the two raw outcomes, splits, then subsamples the
// larger class down to the smaller within each side independently.
inline CorpusSplit balanced_subsample(const std::vector<DialogueRecord>& corpus,
                                      const std::string& class_a,
                                      const std::string& class_b, std::uint64_t seed,
                                      double test_fraction = 867.0 / 4692.0) {
  std::vector<std::size_t> pool;
  std::vector<std::string> outcome_of(corpus.size());
  bool saw_a = false, saw_b = false;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    std::string o;
    try {
      o = derive_outcome(corpus[i]);
    } catch (const error&) {
      continue;
    }
    if (o != class_a && o != class_b) continue;
    (o == class_a ? saw_a : saw_b) = true;
    outcome_of[i] = o;
    pool.push_back(i);
  }
  if (!saw_a) fail("class-absent", "no dialogue with outcome " + class_a);
  if (!saw_b) fail("class-absent", "no dialogue with outcome " + class_b);

  auto [train_raw, test_raw] = detail::split_indices(std::move(pool), seed, test_fraction);

  auto balance = [&](const std::vector<std::size_t>& side, const char* salt) {
    std::vector<std::size_t> a, b;
    for (auto i : side) (outcome_of[i] == class_a ? a : b).push_back(i);
    if (a.empty() || b.empty())
      fail("class-absent", std::string("a split side lost one class (") + salt + ")");
    auto& larger = a.size() >= b.size() ? a : b;
    const auto& smaller = a.size() >= b.size() ? b : a;
    std::shuffle(larger.begin(), larger.end(), std::mt19937_64(mix_seed(seed, salt)));
    larger.resize(smaller.size());
    std::vector<std::size_t> merged = a;
    merged.insert(merged.end(), b.begin(), b.end());
    std::sort(merged.begin(), merged.end());
    return merged;
  };

  CorpusSplit s;
  s.train = balance(train_raw, "balance:train");
  s.test = balance(test_raw, "balance:test");
  s.train_exchanges = detail::exchange_view(corpus, s.train);
  s.test_exchanges = detail::exchange_view(corpus, s.test);
  return s;
}

}  // namespace ripple
