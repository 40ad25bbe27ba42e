// Acceptance gate: ten required behaviors, one PASS/FAIL line each.
// Exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "ripple/cascade.hpp"
#include "ripple/generator.hpp"

namespace {

using namespace ripple;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool near(double a, double b, double tol) { return std::fabs(a - b) <= tol; }

// Reference four-way understanding counts (row = truth, column = predicted).
const std::vector<std::string> kSlu4{"RCORRECT", "NO-RECOG", "RMISMATCH",
                                     "RPARTIAL-MATCH"};
const std::vector<std::vector<long long>> kSluCounts{{2784, 6, 211, 5},
                                                     {9, 3431, 44, 0},
                                                     {409, 83, 1204, 10},
                                                     {6, 0, 28, 10}};

const std::vector<DialogueRecord>& shared_corpus0() {
  static const std::vector<DialogueRecord> corpus = [] {
    GeneratorConfig g;  // 4692 dialogues, signal 0.9, seed 0
    return gen_corpus(g);
  }();
  return corpus;
}

std::vector<ExperimentConfig> sweep_grid(std::uint64_t seed) {
  ExperimentConfig ex1;
  ex1.window = Window::ex1;
  ex1.seed = seed;
  ExperimentConfig ex12 = ex1;
  ex12.window = Window::ex12;
  ExperimentConfig whole = ex1;
  whole.window = Window::whole;
  ExperimentConfig ex12_auto = ex12;
  ex12_auto.slu_mode = SluMode::auto_;
  return {ex1, ex12, whole, ex12_auto};
}

// Shared seed sweep feeding the lift and monotonicity criteria.
struct SweepMeans {
  double base = 0, ex1 = 0, ex12 = 0, whole = 0, ex12_auto = 0;
  double max_zero_signal_gap = 0;  // |config - baseline| at signal 0, in points
  double elapsed = 0;
  bool ran = false;
  std::string failure;
};

const SweepMeans& sweep() {
  static const SweepMeans m = [] {
    SweepMeans s;
    auto t0 = Clock::now();
    try {
      const int kSeeds = 10;
      for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
        std::vector<DialogueRecord> local;
        const std::vector<DialogueRecord>* corpus;
        if (seed == 0) {
          corpus = &shared_corpus0();
        } else {
          GeneratorConfig g;
          g.seed = seed;
          local = gen_corpus(g);
          corpus = &local;
        }
        ExperimentRun run = run_experiment(*corpus, sweep_grid(seed));
        s.base += run.baseline.accuracy * 100 / kSeeds;
        s.ex1 += run.reports[0].accuracy * 100 / kSeeds;
        s.ex12 += run.reports[1].accuracy * 100 / kSeeds;
        s.whole += run.reports[2].accuracy * 100 / kSeeds;
        s.ex12_auto += run.reports[3].accuracy * 100 / kSeeds;
      }
      GeneratorConfig flat;
      flat.signal_strength = 0.0;
      flat.seed = 99;
      auto noise = gen_corpus(flat);
      ExperimentRun run = run_experiment(noise, sweep_grid(99));
      for (const auto& rep : run.reports)
        s.max_zero_signal_gap =
            std::max(s.max_zero_signal_gap,
                     std::fabs(rep.accuracy - run.baseline.accuracy) * 100);
      s.ran = true;
    } catch (const std::exception& e) {
      s.failure = e.what();
    }
    s.elapsed = seconds_since(t0);
    return s;
  }();
  return m;
}

// The transcribed reference dialogue; exchange 2 carries the golden values.
DialogueRecord reference_dialogue() {
  DialogueRecord d;
  d.id = "golden";
  d.terminal = "completed";
  d.dial_duration = 42.2;

  ExchangeLog e1;
  e1.index = 1;
  e1.prompt = "top-how-may-i-help";
  e1.recog = "yes i want to make a call";
  e1.asr_duration = 4.1;
  e1.rg_modality = "speech";
  e1.rg_grammar = "Top-gram";
  e1.top_task = "dial-for-me";
  e1.top_confidence = 0.42;
  e1.sys_label = "DIAL-FOR-ME";
  HandLog h1;
  h1.tscript = "yes i want to make a call";
  h1.human_label = {"billing-credit"};
  e1.hand = h1;
  d.exchanges.push_back(e1);

  ExchangeLog e2;
  e2.index = 2;
  e2.prompt = "top-reject-rep";
  e2.reprompt = true;
  e2.subdial = true;
  e2.recog = "can charge no one eight hundred call A T T";
  e2.recog_numwords = 10;
  e2.asr_duration = 6.68;
  e2.dtmf_flag = false;
  e2.rg_modality = "speech-plus-touchtone";
  e2.rg_grammar = "Reprompt-gram";
  e2.task[5] = 0.81;
  e2.no_info = 1.0;
  e2.top_task = "dial-for-me";
  e2.nexttop_task = "none";
  e2.top_confidence = 0.81;
  e2.diff_confidence = 0.81;
  e2.salience_coverage = 0.0;
  e2.inconsistency = 0.0;
  e2.context_shift = 0.0;
  e2.sys_label = "DIAL-FOR-ME";
  HandLog h2;
  h2.tscript = "uh yes can you charge this call to my home phone number";
  h2.clean_tscript = "yes can you charge this call to my home phone number";
  h2.human_label = {"no-info", "digitstr"};
  h2.user_modality = "speech";
  e2.hand = h2;
  d.exchanges.push_back(e2);
  return d;
}

double fnum(const FeatureVector& fv, const std::string& name) {
  const Value* v = fv.get(name);
  if (!v || !std::holds_alternative<double>(*v))
    fail("missing-value", "expected numeric feature: " + name);
  return std::get<double>(*v);
}

std::string fsym(const FeatureVector& fv, const std::string& name) {
  const Value* v = fv.get(name);
  if (!v || !std::holds_alternative<std::string>(*v))
    fail("missing-value", "expected symbolic feature: " + name);
  return std::get<std::string>(*v);
}

// Noise-free conjunctive concept over one continuous and one set feature.
Dataset concept_sample(std::size_t count, std::uint64_t seed) {
  std::vector<FeatureDecl> decls;
  decls.push_back(FeatureDecl{"x", FeatureKind::continuous, FeatureGroup::asr, {}});
  decls.push_back(FeatureDecl{"words", FeatureKind::set, FeatureGroup::asr, {}});
  decls.push_back(
      FeatureDecl{"label", FeatureKind::symbolic, FeatureGroup::label, {"pos", "neg"}});
  Dataset ds;
  ds.schema = define_schema(decls);

  const std::vector<std::string> pool{"alpha",   "bravo", "charlie", "delta",
                                      "echo",    "golf",  "hotel",   "india"};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> grid(0, 20);
  std::bernoulli_distribution keep(0.35);
  for (std::size_t i = 0; i < count; ++i) {
    FeatureVector fv;
    fv.id = "s" + std::to_string(i);
    double x = grid(rng) * 0.5;
    TokenBag bag{"pad"};
    for (const auto& t : pool)
      if (keep(rng)) bag.push_back(t);
    std::sort(bag.begin(), bag.end());
    bool has_alpha = std::find(bag.begin(), bag.end(), "alpha") != bag.end();
    fv.values["x"] = x;
    fv.values["words"] = std::move(bag);
    fv.label = (x <= 4.0 && has_alpha) ? "pos" : "neg";
    ds.rows.push_back(std::move(fv));
  }
  validate(ds);
  return ds;
}

std::size_t prediction_errors(const RuleSet& model, const Dataset& ds) {
  auto preds = predict_dataset(model, ds);
  std::size_t errs = 0;
  for (std::size_t i = 0; i < ds.rows.size(); ++i)
    if (preds[i].cls != *ds.rows[i].label) errs++;
  return errs;
}

}  // namespace

int main() {
  int failures = 0;
  char detail[512];
  auto criterion = [&](int n, bool ok, const std::string& msg) {
    std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", n, msg.c_str());
    if (!ok) failures++;
  };
  auto guarded = [&](int n, auto body) {
    try {
      body();
    } catch (const std::exception& e) {
      criterion(n, false, std::string("exception: ") + e.what());
    }
  };

  // 1. Metric oracle: the reference confusion counts reproduce the published
  //    scoreboard within +/-0.05 points.
  guarded(1, [&] {
    auto t0 = Clock::now();
    ConfusionMatrix cm = confusion_from_counts(kSlu4, kSluCounts);
    double acc = accuracy(cm) * 100;
    auto pr = precision_recall(cm);
    const std::map<std::string, std::pair<double, double>> expect{
        {"RCORRECT", {92.6, 86.8}},
        {"NO-RECOG", {98.5, 97.5}},
        {"RMISMATCH", {70.6, 81.0}},
        {"RPARTIAL-MATCH", {22.7, 40.0}}};
    bool ok = acc == 100.0 * 7429 / 8240 && near(acc, 90.16, 0.05) &&
              near(acc, 90.1, 0.1);
    for (const auto& [cls, rp] : expect) {
      ok = ok && pr.count(cls) == 1 && pr[cls].recall && pr[cls].precision;
      ok = ok && near(*pr[cls].recall * 100, rp.first, 0.05) &&
           near(*pr[cls].precision * 100, rp.second, 0.05);
    }
    double dt = seconds_since(t0);
    ok = ok && dt < 1.0;
    std::snprintf(detail, sizeof detail,
                  "reference counts score accuracy %.2f%% with all eight "
                  "per-class figures within 0.05 points (%.3fs)",
                  acc, dt);
    criterion(1, ok, detail);
  });

  // 2. Baseline arithmetic on the reference class counts.
  guarded(2, [&] {
    std::vector<std::string> slu;
    slu.insert(slu.end(), 7481, "RCORRECT");
    slu.insert(slu.end(), 109, "RPARTIAL-MATCH");
    slu.insert(slu.end(), 4197, "RMISMATCH");
    slu.insert(slu.end(), 8943, "NO-RECOG");
    Baseline b4 = majority_baseline(slu, slu_classes());

    std::vector<std::string> outcome;
    outcome.insert(outcome.end(), 582, "TASKSUCCESS");
    outcome.insert(outcome.end(), 867 - 582, "PROBLEMATIC");
    Baseline b2 = majority_baseline(outcome, outcome_binary_classes());

    std::vector<std::string> binary;
    for (const auto& s : slu) binary.push_back(collapse_slu_binary(s));
    Baseline bb = majority_baseline(binary, slu_binary_classes());

    bool ok = b4.cls == "NO-RECOG" && near(b4.accuracy * 100, 43.1, 0.05) &&
              b2.cls == "TASKSUCCESS" && near(b2.accuracy * 100, 67.1, 0.05) &&
              bb.cls == "RINCORRECT" && near(bb.accuracy * 100, 63.9, 0.05) &&
              near(bb.accuracy * 100, 63.0, 1.0);
    std::snprintf(detail, sizeof detail,
                  "majority shares %s %.2f%%, %s %.2f%%, %s %.2f%%", b4.cls.c_str(),
                  b4.accuracy * 100, b2.cls.c_str(), b2.accuracy * 100,
                  bb.cls.c_str(), bb.accuracy * 100);
    criterion(2, ok, detail);
  });

  // 3. Split arithmetic at full corpus scale, with exact exchange conservation.
  guarded(3, [&] {
    const auto& corpus = shared_corpus0();
    CorpusSplit s = split_corpus(corpus, 0, 867.0 / 4692.0);
    std::size_t total = 0;
    for (const auto& d : corpus) total += d.exchanges.size();
    bool ok = corpus.size() == 4692 && s.test.size() == 867 &&
              s.train.size() == 3825 &&
              s.train_exchanges.size() + s.test_exchanges.size() == total;
    std::snprintf(detail, sizeof detail,
                  "4692 dialogues split 867/3825; %zu exchanges conserved "
                  "exactly across the views",
                  total);
    criterion(3, ok, detail);
  });

  // 4. Learner soundness on a clean two-condition conjunctive concept.
  guarded(4, [&] {
    auto t0 = Clock::now();
    Dataset train_ds = concept_sample(600, 42);
    Dataset held_ds = concept_sample(400, 43);
    RuleSet model = train(train_ds, TrainConfig{});
    std::size_t train_errs = prediction_errors(model, train_ds);
    std::size_t held_errs = prediction_errors(model, held_ds);
    double held_acc =
        100.0 * (held_ds.rows.size() - held_errs) / held_ds.rows.size();
    double dt = seconds_since(t0);
    bool ok = train_errs == 0 && held_acc >= 95.0 && dt < 10.0;
    std::snprintf(detail, sizeof detail,
                  "conjunctive concept: %zu training errors, %.1f%% held-out "
                  "accuracy against the generating rule (%.2fs)",
                  train_errs, held_acc, dt);
    criterion(4, ok, detail);
  });

  // 5. Closed-form unit oracles, exact.
  guarded(5, [&] {
    bool ok = foil_gain(10, 10, 10, 10) == 0.0 && foil_gain(10, 10, 5, 0) == 5.0 &&
              foil_gain(4, 12, 4, 0) == 8.0 && foil_gain(10, 10, 0, 0) == 0.0;
    ok = ok && prune_value(5, 5) == 0.0 && prune_value(3, 1) == 0.5 &&
         prune_value(0, 5) == -1.0;
    try {
      foil_gain(0, 5, 0, 0);
      ok = false;
    } catch (const error& e) {
      ok = ok && e.kind == "invalid-counts";
    }
    try {
      prune_value(0, 0);
      ok = false;
    } catch (const error& e) {
      ok = ok && e.kind == "undefined-score";
    }

    std::vector<FeatureDecl> decls;
    for (int i = 0; i < 7; ++i)
      decls.push_back(
          FeatureDecl{"c" + std::to_string(i), FeatureKind::continuous,
                      FeatureGroup::asr, {}});
    decls.push_back(FeatureDecl{"s", FeatureKind::symbolic, FeatureGroup::slu, {}});
    decls.push_back(FeatureDecl{"b", FeatureKind::set, FeatureGroup::asr, {}});
    decls.push_back(FeatureDecl{"label", FeatureKind::symbolic, FeatureGroup::label,
                                {"pos", "neg"}});
    Dataset ds;
    ds.schema = define_schema(decls);
    for (int i = 0; i < 16; ++i) {
      FeatureVector fv;
      fv.id = "r" + std::to_string(i);
      fv.values["c0"] = i < 8 ? 0.0 : 1.0;
      fv.label = i < 8 ? "pos" : "neg";
      ds.rows.push_back(std::move(fv));
    }
    RuleSet rs;
    rs.schema = ds.schema;
    rs.default_class = "neg";
    Rule r;
    r.cls = "pos";
    r.conds.push_back(Condition{"c0", CondOp::le, 0.5, ""});
    rs.rules.push_back(r);
    ok = ok && detail::condition_universe(ds.schema) == 16.0 &&
         near(description_length(rs, ds), 2.5, 1e-9);
    ds.rows[7].label = "neg";
    ok = ok && near(description_length(rs, ds), 6.5, 1e-9);

    TTest t = paired_t({1, 0, 1, 0}, {0, 0, 0, 0});
    ok = ok && near(t.t, std::sqrt(3.0), 1e-12) && t.df == 3 &&
         near(t.p, 0.18169011, 1e-6);
    std::snprintf(detail, sizeof detail,
                  "gain, prune score, description length, and the paired test "
                  "match their hand computations (t=%.6f p=%.8f)",
                  t.t, t.p);
    criterion(5, ok, detail);
  });

  // 6. Stacking provenance: no training-side value came from a fold model
  //    that saw its own dialogue.
  guarded(6, [&] {
    const auto& corpus = shared_corpus0();
    CorpusSplit s = split_corpus(corpus, 0, 867.0 / 4692.0);
    std::vector<DialogueRecord> train_dialogues;
    for (auto i : s.train) train_dialogues.push_back(corpus[i]);
    FeatureCatalog cat = default_catalog();
    Dataset ex = make_exchange_dataset(train_dialogues, cat, "auto", false);
    StackedCorpus st = jackknife_stack(ex, TrainConfig{}, 4, 0);
    LeakageAudit big = audit_no_leakage(st);

    GeneratorConfig g;
    g.dialogue_count = 500;
    g.seed = 77;
    auto small = gen_corpus(g);
    Dataset ex2 = make_exchange_dataset(small, cat, "auto", true);
    StackedCorpus st2 = jackknife_stack(ex2, TrainConfig{}, 7, 3);
    LeakageAudit alt = audit_no_leakage(st2);

    bool ok = big.total == st.values.size() && big.violations == 0 &&
              alt.total == st2.values.size() && alt.violations == 0 &&
              big.total == ex.rows.size();
    std::snprintf(detail, sizeof detail,
                  "%zu + %zu stacked values all trace to fold models that "
                  "excluded their dialogue",
                  big.total, alt.total);
    criterion(6, ok, detail);
  });

  // 7. Cascade lift at signal 0.9 plus flatness at signal 0.
  guarded(7, [&] {
    const SweepMeans& m = sweep();
    if (!m.ran) {
      criterion(7, false, "sweep failed: " + m.failure);
      return;
    }
    double lift = m.ex12_auto - m.ex12;
    bool ok = lift >= 5.0 && m.max_zero_signal_gap <= 3.0 && m.elapsed < 300.0;
    std::snprintf(detail, sizeof detail,
                  "mean two-exchange accuracy %.1f%% with stacked understanding "
                  "vs %.1f%% without (+%.1f pts over 10 seeds); zero-signal "
                  "configs stay within %.1f pts of baseline (%.0fs)",
                  m.ex12_auto, m.ex12, lift, m.max_zero_signal_gap, m.elapsed);
    criterion(7, ok, detail);
  });

  // 8. Window monotonicity on the same sweep.
  guarded(8, [&] {
    const SweepMeans& m = sweep();
    if (!m.ran) {
      criterion(8, false, "sweep failed: " + m.failure);
      return;
    }
    bool ok = m.base <= m.ex1 && m.ex1 <= m.ex12 && m.ex12 <= m.whole;
    std::snprintf(detail, sizeof detail,
                  "mean accuracies order baseline %.1f <= first-exchange %.1f "
                  "<= two-exchange %.1f <= whole-dialogue %.1f",
                  m.base, m.ex1, m.ex12, m.whole);
    criterion(8, ok, detail);
  });

  // 9. Determinism: byte-identical reruns and bit-exact ruleset round-trips.
  guarded(9, [&] {
    GeneratorConfig g;
    g.dialogue_count = 400;
    g.seed = 5;
    std::string log1 = render_dialogue_log(gen_corpus(g));
    std::string log2 = render_dialogue_log(gen_corpus(g));

    auto corpus = gen_corpus(g);
    FeatureCatalog cat = default_catalog();
    Dataset ex = make_exchange_dataset(corpus, cat, "auto", false);
    std::string st1 = save_stacked_text(jackknife_stack(ex, TrainConfig{}, 3, 1));
    std::string st2 = save_stacked_text(jackknife_stack(ex, TrainConfig{}, 3, 1));

    ExperimentConfig cfg;
    Dataset all = assemble_pdp_dataset(corpus, cfg, nullptr, cat);
    Dataset fit;
    fit.schema = all.schema;
    for (const auto& row : all.rows)
      if (row.label) fit.rows.push_back(row);
    RuleSet m1 = train(fit, cfg.learner);
    RuleSet m2 = train(fit, cfg.learner);
    std::string canon = save_ruleset_text_canonical(m1);
    std::string canon2 = save_ruleset_text_canonical(m2);

    std::string canon_rt =
        save_ruleset_text_canonical(load_ruleset_text_canonical(canon));
    std::string display = render_ruleset_text(m1);
    std::string display_rt = render_ruleset_text(parse_ruleset_text(display));

    bool ok = log1 == log2 && st1 == st2 && canon == canon2 &&
              canon_rt == canon && display_rt == display;
    std::snprintf(detail, sizeof detail,
                  "regenerated log, stacking, and trained model are "
                  "byte-identical; both ruleset formats round-trip bit-exactly "
                  "(%zu rules)",
                  m1.rules.size());
    criterion(9, ok, detail);
  });

  // 10. Golden encoding of the transcribed reference exchange.
  guarded(10, [&] {
    DialogueRecord d = reference_dialogue();
    FeatureVector fv = encode_exchange(d, 2, "", true);
    bool ok = fnum(fv, "num-reprompts") == 1.0 && fnum(fv, "num-subdials") == 1.0 &&
              fnum(fv, "num-confirms") == 0.0 &&
              fnum(fv, "percent-reprompts") == 0.5 &&
              fnum(fv, "percent-subdials") == 0.5 &&
              fnum(fv, "percent-confirms") == 0.0 &&
              fnum(fv, "asr-duration") == 6.68 &&
              fnum(fv, "top-confidence") == 0.81 &&
              fsym(fv, "sys-label") == "DIAL-FOR-ME" &&
              near(fnum(fv, "tempo"), 0.668, 1e-9) &&
              near(fnum(fv, "confpertime"), 0.12126, 5e-6) &&
              fnum(fv, "salpertime") == 0.0 && fnum(fv, "utt-id") == 2.0 &&
              fnum(fv, "num-utts") == 2.0;
    std::snprintf(detail, sizeof detail,
                  "reference exchange 2 encodes tempo %.3f, confidence-per-"
                  "second %.5f, zero salience rate, and the expected tallies",
                  fnum(fv, "tempo"), fnum(fv, "confpertime"));
    criterion(10, ok, detail);
  });

  return failures;
}
