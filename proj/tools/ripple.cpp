// ripple — rule induction over dialogue logs. Subcommands generate synthetic
// corpora, train the per-exchange understanding predictor, stack it over
// jack-knife folds, train/apply/evaluate dialogue-outcome models, compare
// score vectors, and pretty-print rulesets. Every artifact is written
// atomically with a manifest beside it; errors exit 1 with one parsable line.

#include <cstdio>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "ripple/cascade.hpp"
#include "ripple/dialog.hpp"
#include "ripple/generator.hpp"
#include "ripple/manifest.hpp"
#include "ripple/metrics.hpp"
#include "ripple/ripper.hpp"
#include "ripple/tabular.hpp"

namespace {

using namespace ripple;

// ---- persisted dialogue-outcome model ----

struct PdpModel {
  ExperimentConfig config;
  RuleSet ruleset;
  std::optional<RuleSet> slu_model;  // embedded understanding predictor
};

json pdp_model_to_json(const PdpModel& m) {
  json j{{"format", "pdp-model"},
         {"config", experiment_config_to_json(m.config)},
         {"ruleset", ruleset_to_json(m.ruleset)}};
  j["slu_model"] = m.slu_model ? ruleset_to_json(*m.slu_model) : json(nullptr);
  return j;
}

PdpModel pdp_model_from_json(const json& j) {
  if (!j.contains("format") || j.at("format") != "pdp-model")
    fail("bad-format", "not a dialogue-outcome model record");
  PdpModel m;
  m.config = experiment_config_from_json(j.at("config"));
  m.ruleset = ruleset_from_json(j.at("ruleset"));
  if (j.contains("slu_model") && !j.at("slu_model").is_null())
    m.slu_model = ruleset_from_json(j.at("slu_model"));
  return m;
}

std::vector<DialogueRecord> load_corpus(const std::string& path) {
  ParsedLog log = load_dialogue_log(path);
  if (log.warnings)
    std::fprintf(stderr, "ripple: %zu unknown field(s) ignored in %s\n",
                 log.warnings, path.c_str());
  return std::move(log.dialogues);
}

// Applies an embedded model to a corpus, treating every dialogue as
// test-side: understanding features come from the embedded predictor (or
// hand labels under ORACLE), and names the model never saw are dropped.
std::vector<std::pair<std::string, Prediction>> predict_corpus(
    const PdpModel& m, const std::vector<DialogueRecord>& corpus,
    const FeatureCatalog& cat) {
  const ExperimentConfig& cfg = m.config;
  bool wants = false;
  for (const auto& n : feature_set_names(cat, cfg.feature_set))
    if (lower(n) == "auto-slu-success") wants = true;
  bool inject = cfg.slu_mode != SluMode::none && wants;
  if (inject && cfg.slu_mode != SluMode::oracle && !m.slu_model)
    fail("mode-requires-stacked", "model has no embedded understanding predictor");

  std::vector<std::pair<std::string, Prediction>> out;
  for (const auto& d : corpus) {
    FeatureVector fv = build_window(d, cfg.window, cat, cfg.feature_set);
    if (inject)
      for (std::size_t k : detail::emitted_exchanges(d, cfg.window))
        fv.values["e" + std::to_string(k) + "-auto-SLU-success"] =
            cfg.slu_mode == SluMode::oracle
                ? detail::hand_slu_value(d, k, cfg.collapse_slu)
                : predict_exchange(*m.slu_model, d, k);
    FeatureVector row;
    row.id = fv.id;
    for (auto& [name, value] : fv.values)
      if (m.ruleset.schema.has(name)) row.values[name] = std::move(value);
    out.emplace_back(d.id, predict(m.ruleset, row));
  }
  return out;
}

StackedCorpus build_stacking(const std::vector<DialogueRecord>& corpus,
                             const ExperimentConfig& cfg, const FeatureCatalog& cat) {
  CorpusSplit split = split_corpus(corpus, cfg.seed, cfg.test_fraction);
  std::vector<DialogueRecord> train_dialogues;
  for (auto i : split.train) train_dialogues.push_back(corpus[i]);
  Dataset ds = make_exchange_dataset(train_dialogues, cat, "auto", cfg.collapse_slu);
  StackedCorpus st = jackknife_stack(ds, cfg.learner, cfg.folds, cfg.seed);
  for (auto i : split.test) st.test_ids.push_back(corpus[i].id);
  return st;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rule induction over dialogue logs"};
  app.require_subcommand(1);
  const FeatureCatalog cat = default_catalog();

  // shared flag storage
  std::string corpus_path, model_path, out_path, grid_path, stacked_path, config_path;
  std::string window_name = "ex12", feature_set = "auto", slu_mode_name = "none";
  std::size_t folds = 4;
  bool collapse = false;
  std::uint64_t seed = 0;
  double test_fraction = 867.0 / 4692.0;
  TrainConfig learner;

  auto add_learner_flags = [&](CLI::App* sub) {
    sub->add_option("--loss-ratio", learner.loss_ratio,
                    "false-negative cost over false-positive cost");
    sub->add_option("--grow-fraction", learner.grow_fraction,
                    "share of examples used for growing (rest prunes)");
    sub->add_option("--mdl-slack", learner.mdl_slack_bits,
                    "description-length slack before rule search stops");
    sub->add_option("--passes", learner.optimization_passes, "optimization passes");
    sub->add_option("--min-rule-cover", learner.min_rule_cover,
                    "minimum grow-set positives per rule");
  };

  // --- gen ---
  GeneratorConfig gen_cfg;
  auto* gen = app.add_subcommand("gen", "generate a synthetic dialogue log");
  gen->add_option("--out", out_path, "output log path")->required();
  gen->add_option("--config", config_path, "generator config JSON (flags override)");
  auto* o_count = gen->add_option("--count", gen_cfg.dialogue_count, "dialogues to emit");
  auto* o_seed = gen->add_option("--seed", gen_cfg.seed, "generator seed");
  auto* o_signal =
      gen->add_option("--signal", gen_cfg.signal_strength, "signal strength in [0,1]");
  auto* o_spread = gen->add_option("--asr-spread", gen_cfg.asr_duration_spread,
                                   "recognizer duration noise scale");
  auto* o_overlap = gen->add_option("--confidence-overlap", gen_cfg.confidence_overlap,
                                    "confidence channel noise scale");
  auto* o_hangup = gen->add_option("--hangup-propensity", gen_cfg.hangup_propensity,
                                   "scales the hang-up share of outcomes");
  gen->callback([&] {
    RunManifest m;
    m.command = "gen";
    if (!config_path.empty()) {
      std::string text = read_file(config_path);
      GeneratorConfig file_cfg = generator_config_from_json(json::parse(text));
      m.inputs[config_path] = content_digest(text);
      if (!o_count->count()) gen_cfg.dialogue_count = file_cfg.dialogue_count;
      if (!o_seed->count()) gen_cfg.seed = file_cfg.seed;
      if (!o_signal->count()) gen_cfg.signal_strength = file_cfg.signal_strength;
      if (!o_spread->count()) gen_cfg.asr_duration_spread = file_cfg.asr_duration_spread;
      if (!o_overlap->count()) gen_cfg.confidence_overlap = file_cfg.confidence_overlap;
      if (!o_hangup->count()) gen_cfg.hangup_propensity = file_cfg.hangup_propensity;
      gen_cfg.outcome_mix = file_cfg.outcome_mix;
      gen_cfg.slu_mix = file_cfg.slu_mix;
    }
    auto corpus = gen_corpus(gen_cfg);
    m.config = generator_config_to_json(gen_cfg);
    m.seed = gen_cfg.seed;
    write_artifact(out_path, render_dialogue_log(corpus), std::move(m));
  });

  // --- train-slu ---
  auto* tslu = app.add_subcommand("train-slu",
                                  "train the per-exchange understanding predictor");
  tslu->add_option("--corpus", corpus_path, "dialogue log")->required();
  tslu->add_option("--out", out_path, "output ruleset path")->required();
  tslu->add_option("--feature-set", feature_set, "feature subset name");
  tslu->add_flag("--collapse", collapse, "two-way understanding vocabulary");
  tslu->add_option("--seed", learner.seed, "learner seed");
  add_learner_flags(tslu);
  tslu->callback([&] {
    std::string text = read_file(corpus_path);
    auto corpus = load_corpus(corpus_path);
    Dataset ds = make_exchange_dataset(corpus, cat, feature_set, collapse);
    RuleSet model = train_slu_predictor(ds, feature_set, learner, collapse, cat);
    RunManifest m;
    m.command = "train-slu";
    m.config = json{{"feature_set", feature_set},
                    {"collapse", collapse},
                    {"learner", config_to_json(learner)}};
    m.inputs[corpus_path] = content_digest(text);
    m.seed = learner.seed;
    write_artifact(out_path, save_ruleset_text_canonical(model), std::move(m));
  });

  // --- stack ---
  auto* stk = app.add_subcommand(
      "stack", "split the corpus and stack out-of-fold understanding predictions");
  stk->add_option("--corpus", corpus_path, "dialogue log")->required();
  stk->add_option("--out", out_path, "output stacked-corpus path")->required();
  stk->add_option("--folds", folds, "jack-knife folds");
  stk->add_option("--seed", seed, "split/fold seed");
  stk->add_option("--test-fraction", test_fraction, "held-out dialogue share");
  stk->add_flag("--collapse", collapse, "two-way understanding vocabulary");
  add_learner_flags(stk);
  stk->callback([&] {
    std::string text = read_file(corpus_path);
    auto corpus = load_corpus(corpus_path);
    ExperimentConfig cfg;
    cfg.folds = folds;
    cfg.collapse_slu = collapse;
    cfg.seed = seed;
    cfg.test_fraction = test_fraction;
    learner.seed = seed;
    cfg.learner = learner;
    validate_experiment_config(cfg);
    StackedCorpus st = build_stacking(corpus, cfg, cat);
    RunManifest m;
    m.command = "stack";
    m.config = experiment_config_to_json(cfg);
    m.inputs[corpus_path] = content_digest(text);
    m.seed = seed;
    write_artifact(out_path, save_stacked_text(st), std::move(m));
  });

  // --- train-pdp ---
  auto* tpdp = app.add_subcommand("train-pdp", "train the dialogue-outcome model");
  tpdp->add_option("--corpus", corpus_path, "dialogue log")->required();
  tpdp->add_option("--out", out_path, "output model path")->required();
  tpdp->add_option("--window", window_name, "ex1|ex12|whole");
  tpdp->add_option("--feature-set", feature_set, "feature subset name");
  tpdp->add_option("--slu-mode", slu_mode_name, "none|auto|hlt|oracle");
  tpdp->add_flag("--collapse", collapse, "two-way understanding vocabulary");
  tpdp->add_option("--folds", folds, "jack-knife folds for stacking");
  tpdp->add_option("--seed", seed, "split/fold/learner seed");
  tpdp->add_option("--test-fraction", test_fraction, "held-out dialogue share");
  tpdp->add_option("--stacked", stacked_path, "stacked corpus (else computed in-process)");
  add_learner_flags(tpdp);
  tpdp->callback([&] {
    std::string text = read_file(corpus_path);
    auto corpus = load_corpus(corpus_path);
    ExperimentConfig cfg;
    cfg.window = parse_window(window_name);
    cfg.feature_set = feature_set;
    cfg.slu_mode = parse_slu_mode(slu_mode_name);
    cfg.collapse_slu = collapse;
    cfg.folds = folds;
    cfg.seed = seed;
    cfg.test_fraction = test_fraction;
    learner.seed = seed;
    cfg.learner = learner;
    validate_experiment_config(cfg);

    RunManifest m;
    m.command = "train-pdp";
    m.inputs[corpus_path] = content_digest(text);

    std::optional<StackedCorpus> st;
    bool needs_stacked =
        cfg.slu_mode == SluMode::auto_ || cfg.slu_mode == SluMode::hlt;
    if (needs_stacked) {
      if (!stacked_path.empty()) {
        std::string stext = read_file(stacked_path);
        st = load_stacked_text(stext);
        m.inputs[stacked_path] = content_digest(stext);
      } else {
        st = build_stacking(corpus, cfg, cat);
      }
    }
    Dataset all = assemble_pdp_dataset(corpus, cfg, st ? &*st : nullptr, cat);

    // training membership: the stacked provenance when present, else the seed split
    std::set<std::string> train_ids;
    if (st) {
      train_ids.insert(st->train_ids.begin(), st->train_ids.end());
    } else {
      CorpusSplit split = split_corpus(corpus, cfg.seed, cfg.test_fraction);
      for (auto i : split.train) train_ids.insert(corpus[i].id);
    }
    Dataset fit;
    fit.schema = all.schema;
    for (const auto& row : all.rows)
      if (row.label && train_ids.count(row.id)) fit.rows.push_back(row);

    PdpModel pm;
    pm.config = cfg;
    pm.ruleset = train(fit, cfg.learner);
    if (needs_stacked) pm.slu_model = st->full_model;
    m.config = experiment_config_to_json(cfg);
    m.seed = seed;
    write_artifact(out_path, pdp_model_to_json(pm).dump(2) + "\n", std::move(m));
  });

  // --- predict ---
  auto* prd = app.add_subcommand("predict", "apply a dialogue-outcome model");
  prd->add_option("--corpus", corpus_path, "dialogue log")->required();
  prd->add_option("--model", model_path, "dialogue-outcome model")->required();
  prd->add_option("--out", out_path, "output predictions path")->required();
  prd->callback([&] {
    std::string ctext = read_file(corpus_path);
    std::string mtext = read_file(model_path);
    auto corpus = load_corpus(corpus_path);
    PdpModel pm = pdp_model_from_json(json::parse(mtext));
    auto preds = predict_corpus(pm, corpus, cat);
    std::string out;
    for (const auto& [id, p] : preds) {
      json line{{"id", id}, {"outcome", p.cls}};
      line["rule"] = p.rule ? json(*p.rule) : json(nullptr);
      out += line.dump();
      out += '\n';
    }
    RunManifest m;
    m.command = "predict";
    m.config = experiment_config_to_json(pm.config);
    m.inputs[corpus_path] = content_digest(ctext);
    m.inputs[model_path] = content_digest(mtext);
    m.seed = pm.config.seed;
    write_artifact(out_path, out, std::move(m));
  });

  // --- evaluate ---
  auto* ev = app.add_subcommand("evaluate", "score a configuration grid on one split");
  ev->add_option("--corpus", corpus_path, "dialogue log")->required();
  ev->add_option("--grid", grid_path, "JSON list of experiment configurations")->required();
  ev->add_option("--out", out_path, "output report path")->required();
  ev->callback([&] {
    std::string ctext = read_file(corpus_path);
    std::string gtext = read_file(grid_path);
    auto corpus = load_corpus(corpus_path);
    json gj = json::parse(gtext);
    if (!gj.is_array() || gj.empty())
      fail("bad-format", "grid must be a non-empty JSON array");
    std::vector<ExperimentConfig> grid;
    for (const auto& e : gj) grid.push_back(experiment_config_from_json(e));

    ExperimentRun run = run_experiment(corpus, grid, cat);
    std::string table = render_experiment_table(grid, run);

    json reports = json::array();
    for (const auto& r : run.reports) {
      json rj = report_to_json(r);
      rj["correctness"] = r.correctness;
      reports.push_back(std::move(rj));
    }
    json out{{"format", "experiment-run"},
             {"baseline", {{"class", run.baseline.cls},
                           {"accuracy", run.baseline.accuracy}}},
             {"split", {{"train_dialogues", run.split.train.size()},
                        {"test_dialogues", run.split.test.size()},
                        {"train_exchanges", run.split.train_exchanges.size()},
                        {"test_exchanges", run.split.test_exchanges.size()}}},
             {"reports", reports},
             {"table", table}};
    RunManifest m;
    m.command = "evaluate";
    m.config = gj;
    m.inputs[corpus_path] = content_digest(ctext);
    m.inputs[grid_path] = content_digest(gtext);
    m.seed = grid[0].seed;
    write_artifact(out_path, out.dump(2) + "\n", std::move(m));
    std::fputs(table.c_str(), stdout);
  });

  // --- ttest ---
  std::string path_a, path_b;
  std::size_t index_a = 0, index_b = 0;
  auto* tt = app.add_subcommand("ttest", "paired t-test between two score vectors");
  tt->add_option("a", path_a, "score file (JSON array, report, or experiment run)")
      ->required();
  tt->add_option("b", path_b, "score file")->required();
  tt->add_option("--index-a", index_a, "report index when `a` is an experiment run");
  tt->add_option("--index-b", index_b, "report index when `b` is an experiment run");
  auto* tt_out = tt->add_option("--out", out_path, "optional JSON result path");
  tt->callback([&] {
    auto scores = [](const std::string& path, std::size_t idx) {
      json j = json::parse(read_file(path));
      if (j.is_array()) return j.get<std::vector<double>>();
      if (j.is_object() && j.contains("correctness"))
        return j.at("correctness").get<std::vector<double>>();
      if (j.is_object() && j.contains("reports")) {
        const auto& reps = j.at("reports");
        if (idx >= reps.size())
          fail("bad-format", "report index out of range in " + path);
        return reps[idx].at("correctness").get<std::vector<double>>();
      }
      fail("bad-format", "no score vector found in " + path);
    };
    TTest r = paired_t(scores(path_a, index_a), scores(path_b, index_b));
    std::printf("t=%s df=%lld p=%.8f%s\n", format_double(r.t).c_str(), r.df, r.p,
                r.degenerate ? " (degenerate)" : "");
    if (tt_out->count()) {
      json out{{"df", r.df}, {"p", r.p}, {"degenerate", r.degenerate}};
      out["t"] = std::isfinite(r.t) ? json(r.t) : json(r.t > 0 ? "inf" : "-inf");
      RunManifest m;
      m.command = "ttest";
      m.config = json{{"a", path_a}, {"b", path_b}};
      m.inputs[path_a] = content_digest(read_file(path_a));
      m.inputs[path_b] = content_digest(read_file(path_b));
      write_artifact(out_path, out.dump(2) + "\n", std::move(m));
    }
  });

  // --- inspect-rules ---
  auto* ins = app.add_subcommand("inspect-rules", "print a ruleset as text");
  ins->add_option("--model", model_path, "ruleset or dialogue-outcome model")->required();
  ins->callback([&] {
    json j = json::parse(read_file(model_path));
    if (j.is_object() && j.value("format", "") == "pdp-model") {
      PdpModel pm = pdp_model_from_json(j);
      std::fputs(render_ruleset_text(pm.ruleset).c_str(), stdout);
      if (pm.slu_model) {
        std::fputs("\n# embedded understanding predictor\n", stdout);
        std::fputs(render_ruleset_text(*pm.slu_model).c_str(), stdout);
      }
    } else {
      std::fputs(render_ruleset_text(ruleset_from_json(j)).c_str(), stdout);
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::fprintf(stderr, "ripple: error [usage]: %s\n", e.what());
    return 1;
  } catch (const ripple::error& e) {
    std::fprintf(stderr, "ripple: error [%s]: %s\n", e.kind.c_str(), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "ripple: error [internal]: %s\n", e.what());
    return 1;
  }
  return 0;
}
