#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include <cmath>
#include <random>

#include "ripple/ripper.hpp"

using namespace ripple;
using Catch::Matchers::WithinAbs;

namespace {

FeatureSchema xy_schema() {
  return define_schema(
      {FeatureDecl{"x", FeatureKind::continuous, FeatureGroup::asr, {}},
       FeatureDecl{"y", FeatureKind::symbolic, FeatureGroup::slu, {}},
       FeatureDecl{"label", FeatureKind::symbolic, FeatureGroup::label,
                   {"pos", "neg"}}});
}

FeatureVector make_row(std::string id, double x, const char* y, const char* lbl) {
  FeatureVector fv;
  fv.id = std::move(id);
  fv.values["x"] = x;
  fv.values["y"] = std::string(y);
  fv.label = lbl;
  return fv;
}

std::vector<std::size_t> all_rows(const Dataset& ds) {
  std::vector<std::size_t> idx(ds.rows.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return idx;
}

bool rule_covers(const Rule& r, const FeatureVector& fv) {
  for (const auto& c : r.conds)
    if (!condition_matches(c, fv)) return false;
  return true;
}

bool any_covers(const std::vector<Rule>& rules, const FeatureVector& fv) {
  for (const auto& r : rules)
    if (rule_covers(r, fv)) return true;
  return false;
}

// Dense noise-free concept (x <= 3 and y = red): every (x, y) cell appears
// `copies` times so any grow/prune split still sees all cells.
Dataset concept_dataset(int copies) {
  Dataset ds;
  ds.schema = xy_schema();
  int k = 0;
  for (int x = 1; x <= 10; ++x)
    for (const char* y : {"red", "blue"})
      for (int c = 0; c < copies; ++c) {
        bool pos = x <= 3 && std::string(y) == "red";
        ds.rows.push_back(
            make_row("r" + std::to_string(k++), x, y, pos ? "pos" : "neg"));
      }
  validate(ds);
  return ds;
}

}  // namespace

TEST_CASE("information gain matches the pinned formula") {
  CHECK(foil_gain(10, 10, 10, 10) == 0.0);
  CHECK_THAT(foil_gain(10, 10, 5, 0), WithinAbs(5.0, 1e-12));
  CHECK_THAT(foil_gain(4, 12, 4, 0), WithinAbs(8.0, 1e-12));
  CHECK(foil_gain(10, 10, 0, 0) == 0.0);  // no positives kept -> 0 by convention

  for (auto [p, n, pa, na] : {std::array<double, 4>{0, 5, 0, 0},
                              std::array<double, 4>{5, 5, 6, 0},
                              std::array<double, 4>{5, 5, -1, 0},
                              std::array<double, 4>{5, 5, 2, -1}}) {
    try {
      foil_gain(p, n, pa, na);
      FAIL("expected invalid-counts");
    } catch (const error& e) {
      CHECK(e.kind == "invalid-counts");
    }
  }
}

TEST_CASE("pruning score matches the pinned formula") {
  CHECK(prune_value(5, 5) == 0.0);
  CHECK_THAT(prune_value(3, 1), WithinAbs(0.5, 1e-12));
  CHECK_THAT(prune_value(0, 5), WithinAbs(-1.0, 1e-12));
  try {
    prune_value(0, 0);
    FAIL("expected undefined-score");
  } catch (const error& e) {
    CHECK(e.kind == "undefined-score");
  }
}

TEST_CASE("description length matches the pinned encoding") {
  // Schema with a 16-way condition universe: 7 continuous (2 forms each),
  // one symbolic, one set feature.
  std::vector<FeatureDecl> decls;
  for (int i = 0; i < 7; ++i)
    decls.push_back(FeatureDecl{"c" + std::to_string(i), FeatureKind::continuous,
                                FeatureGroup::asr, {}});
  decls.push_back(FeatureDecl{"s", FeatureKind::symbolic, FeatureGroup::slu, {}});
  decls.push_back(FeatureDecl{"b", FeatureKind::set, FeatureGroup::asr, {}});
  decls.push_back(FeatureDecl{"label", FeatureKind::symbolic, FeatureGroup::label,
                              {"pos", "neg"}});
  Dataset ds;
  ds.schema = define_schema(decls);
  CHECK(detail::condition_universe(ds.schema) == 16.0);

  // 16 rows: the rule (c0 <= 0.5) covers the 8 rows with c0 = 0.
  for (int i = 0; i < 16; ++i) {
    FeatureVector fv;
    fv.id = "r" + std::to_string(i);
    fv.values["c0"] = i < 8 ? 0.0 : 1.0;
    fv.label = i < 8 ? "pos" : "neg";
    ds.rows.push_back(std::move(fv));
  }
  validate(ds);

  RuleSet rs;
  rs.schema = ds.schema;
  rs.default_class = "neg";
  Rule r;
  r.cls = "pos";
  r.conds.push_back(Condition{"c0", CondOp::le, 0.5, ""});
  rs.rules.push_back(r);

  SECTION("zero-error ruleset costs only its rule bits") {
    CHECK_THAT(description_length(rs, ds), WithinAbs(2.5, 1e-9));
  }
  SECTION("one false positive adds the binomial and count bits") {
    ds.rows[7].label = "neg";  // still covered, now wrong
    CHECK_THAT(description_length(rs, ds), WithinAbs(6.5, 1e-9));
  }
  SECTION("empty ruleset over all-default data is free") {
    RuleSet empty;
    empty.schema = ds.schema;
    empty.default_class = "neg";
    for (auto& row : ds.rows) row.label = "neg";
    CHECK(description_length(empty, ds) == 0.0);
  }
  SECTION("bit helpers directly") {
    CHECK_THAT(detail::rule_bits(1, 16.0), WithinAbs(2.5, 1e-12));
    CHECK_THAT(detail::exception_bits(8, 1, 8, 0), WithinAbs(4.0, 1e-12));
    CHECK(detail::exception_bits(0, 0, 8, 0) == 0.0);
    CHECK_THAT(detail::log2_binom(8, 1), WithinAbs(3.0, 1e-12));
  }
}

TEST_CASE("rule growing separates cleanly and stops") {
  TrainConfig cfg;
  SECTION("numeric concept x <= 3") {
    Dataset ds;
    ds.schema = xy_schema();
    for (int i = 1; i <= 20; ++i)
      ds.rows.push_back(make_row("r" + std::to_string(i), i, "red",
                                 i <= 3 ? "pos" : "neg"));
    Rule r = grow_rule(ds, all_rows(ds), "pos", cfg);
    REQUIRE(r.conds.size() == 1);
    CHECK(r.conds[0] == (Condition{"x", CondOp::le, 3.0, ""}));
    CHECK(r.p == 3);
    CHECK(r.n == 0);
    for (const auto& row : ds.rows)
      CHECK(rule_covers(r, row) == (row.label == "pos"));
  }
  SECTION("all-positive grow set yields the empty rule") {
    Dataset ds;
    ds.schema = xy_schema();
    for (int i = 0; i < 5; ++i)
      ds.rows.push_back(make_row("r" + std::to_string(i), i, "red", "pos"));
    Rule r = grow_rule(ds, all_rows(ds), "pos", cfg);
    CHECK(r.conds.empty());
    CHECK(r.p == 5);
    CHECK(r.n == 0);
  }
  SECTION("token concept") {
    Dataset ds;
    ds.schema = define_schema(
        {FeatureDecl{"recog", FeatureKind::set, FeatureGroup::asr, {}},
         FeatureDecl{"label", FeatureKind::symbolic, FeatureGroup::label,
                     {"pos", "neg"}}});
    for (int i = 0; i < 12; ++i) {
      FeatureVector fv;
      fv.id = "r" + std::to_string(i);
      bool pos = i % 3 == 0;
      fv.values["recog"] =
          tokenize(pos ? "i need help now" : "call my number please");
      fv.label = pos ? "pos" : "neg";
      ds.rows.push_back(std::move(fv));
    }
    Rule r = grow_rule(ds, all_rows(ds), "pos", cfg);
    REQUIRE(r.conds.size() == 1);
    CHECK(r.conds[0].op == CondOp::contains);
    CHECK(r.conds[0].feature == "recog");
    CHECK(r.n == 0);
    for (const auto& row : ds.rows)
      CHECK(rule_covers(r, row) == (row.label == "pos"));
  }
  SECTION("grow set without positives") {
    Dataset ds;
    ds.schema = xy_schema();
    ds.rows.push_back(make_row("r0", 1, "red", "neg"));
    try {
      grow_rule(ds, all_rows(ds), "pos", cfg);
      FAIL("expected no-positives");
    } catch (const error& e) {
      CHECK(e.kind == "no-positives");
    }
  }
}

TEST_CASE("rule pruning picks the best prefix") {
  TrainConfig cfg;
  Dataset ds;
  ds.schema = xy_schema();
  // Positives x in 1..5, only 1..2 red; one red negative at x = 6 inside the
  // numeric cover, remaining negatives far right.
  ds.rows.push_back(make_row("p1", 1, "red", "pos"));
  ds.rows.push_back(make_row("p2", 2, "red", "pos"));
  ds.rows.push_back(make_row("p3", 3, "blue", "pos"));
  ds.rows.push_back(make_row("p4", 4, "blue", "pos"));
  ds.rows.push_back(make_row("p5", 5, "blue", "pos"));
  ds.rows.push_back(make_row("n1", 6, "red", "neg"));
  for (int i = 0; i < 4; ++i)
    ds.rows.push_back(make_row("n" + std::to_string(i + 2), 20 + i, "red", "neg"));

  Rule grown;
  grown.cls = "pos";
  grown.conds = {Condition{"x", CondOp::le, 10.0, ""},
                 Condition{"y", CondOp::eq, 0, "red"}};

  SECTION("a harmful final condition is deleted") {
    Rule pruned = prune_rule(ds, all_rows(ds), grown, cfg);
    REQUIRE(pruned.conds.size() == 1);
    CHECK(pruned.conds[0] == grown.conds[0]);

    // Brute-force prefix enumeration agrees.
    double best = -2;
    std::size_t best_len = 0;
    for (std::size_t len = 0; len <= grown.conds.size(); ++len) {
      Rule prefix = grown;
      prefix.conds.resize(len);
      double p = 0, n = 0;
      for (const auto& row : ds.rows)
        if (rule_covers(prefix, row)) (*row.label == "pos" ? p : n) += 1;
      if (p + n == 0) continue;
      double v = prune_value(p, n);
      if (v > best) best = v, best_len = len;
    }
    CHECK(best_len == 1);
  }
  SECTION("empty prune set leaves the rule alone") {
    Rule pruned = prune_rule(ds, {}, grown, cfg);
    CHECK(pruned.conds == grown.conds);
  }
  SECTION("an already-optimal rule is a fixed point") {
    Rule perfect;
    perfect.cls = "pos";
    perfect.conds = {Condition{"x", CondOp::le, 5.0, ""}};
    Rule pruned = prune_rule(ds, all_rows(ds), perfect, cfg);
    CHECK(pruned.conds == perfect.conds);
  }
  SECTION("pruning never lengthens and never lowers the prune score") {
    Rule pruned = prune_rule(ds, all_rows(ds), grown, cfg);
    CHECK(pruned.conds.size() <= grown.conds.size());
    auto score = [&](const Rule& r) {
      double p = 0, n = 0;
      for (const auto& row : ds.rows)
        if (rule_covers(r, row)) (*row.label == "pos" ? p : n) += 1;
      return prune_value(p, n);
    };
    CHECK(score(pruned) >= score(grown));
  }
}

TEST_CASE("class-rule learning masters a clean concept") {
  TrainConfig cfg;
  Dataset ds = concept_dataset(10);
  auto rules = learn_class_rules(ds, "pos", cfg);
  REQUIRE_FALSE(rules.empty());
  for (const auto& r : rules) CHECK(r.cls == "pos");
  for (const auto& row : ds.rows)
    CHECK(any_covers(rules, row) == (row.label == "pos"));
}

TEST_CASE("class-rule learning resists pure noise") {
  TrainConfig cfg;
  Dataset ds;
  ds.schema = xy_schema();
  std::mt19937_64 rng(7);
  long long pos = 0;
  for (int i = 0; i < 200; ++i) {
    bool heads = rng() & 1;
    pos += heads;
    ds.rows.push_back(make_row("r" + std::to_string(i), double(i % 37),
                               (i % 2) ? "red" : "blue",
                               heads ? "pos" : "neg"));
  }
  auto rules = learn_class_rules(ds, "pos", cfg);
  long long errors = 0;
  for (const auto& row : ds.rows) {
    bool says_pos = any_covers(rules, row);
    if (says_pos != (*row.label == "pos")) errors++;
  }
  long long baseline_errors = std::min(pos, 200 - pos);
  CHECK(errors <= baseline_errors);
  CHECK(rules.size() <= 3);
}

TEST_CASE("optimization never raises description length") {
  TrainConfig cfg;
  Dataset ds = concept_dataset(5);

  auto rules = learn_class_rules(ds, "pos", cfg);
  // Append a redundant hand-built rule: strictly subsumed by the concept.
  Rule redundant;
  redundant.cls = "pos";
  redundant.conds = {Condition{"x", CondOp::le, 2.0, ""},
                     Condition{"y", CondOp::eq, 0, "red"}};
  rules.push_back(redundant);

  auto wrap = [&](const std::vector<Rule>& rv) {
    RuleSet rs;
    rs.schema = ds.schema;
    rs.default_class = "neg";
    rs.config = cfg;
    rs.rules = rv;
    return rs;
  };
  double before = description_length(wrap(rules), ds);
  auto optimized = optimize(rules, ds, "pos", cfg);
  double after = description_length(wrap(optimized), ds);
  CHECK(after <= before + 1e-9);

  SECTION("zero passes is the identity") {
    TrainConfig frozen = cfg;
    frozen.optimization_passes = 0;
    auto same = optimize(rules, ds, "pos", frozen);
    REQUIRE(same.size() == rules.size());
    for (std::size_t i = 0; i < same.size(); ++i) {
      CHECK(same[i].conds == rules[i].conds);
      CHECK(same[i].cls == rules[i].cls);
    }
  }
  SECTION("a minimal correct rule is a fixed point") {
    std::vector<Rule> minimal(1);
    minimal[0].cls = "pos";
    minimal[0].conds = {Condition{"x", CondOp::le, 3.0, ""},
                        Condition{"y", CondOp::eq, 0, "red"}};
    auto kept = optimize(minimal, ds, "pos", cfg);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].conds == minimal[0].conds);
  }
}

TEST_CASE("multi-class training orders classes by rarity") {
  TrainConfig cfg;
  Dataset ds;
  ds.schema = define_schema(
      {FeatureDecl{"x", FeatureKind::continuous, FeatureGroup::asr, {}},
       FeatureDecl{"label", FeatureKind::symbolic, FeatureGroup::label,
                   {"a", "b", "c", "d"}}});
  auto add = [&](const char* cls, double lo, int count) {
    for (int i = 0; i < count; ++i) {
      FeatureVector fv;
      fv.id = std::string(cls) + std::to_string(i);
      fv.values["x"] = lo + 0.1 * i;
      fv.label = cls;
      ds.rows.push_back(std::move(fv));
    }
  };
  add("a", 0, 10);
  add("b", 100, 20);
  add("c", 200, 30);
  add("d", 300, 40);
  validate(ds);

  RuleSet rs = train(ds, cfg);
  CHECK(rs.class_order == std::vector<std::string>{"a", "b", "c", "d"});
  CHECK(rs.default_class == "d");

  SECTION("training is deterministic") {
    RuleSet again = train(ds, cfg);
    CHECK(save_ruleset_text_canonical(again) == save_ruleset_text_canonical(rs));
  }
  SECTION("the learned model classifies its training data") {
    // Pruning may generalize a boundary away, so a stray row can fall
    // through its own class's rules — but only toward later classes.
    auto order_index = [&](const std::string& cls) {
      return std::find(rs.class_order.begin(), rs.class_order.end(), cls) -
             rs.class_order.begin();
    };
    auto preds = predict_dataset(rs, ds);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (preds[i].cls == *ds.rows[i].label)
        hits++;
      else
        CHECK(order_index(preds[i].cls) > order_index(*ds.rows[i].label));
    }
    CHECK(hits >= ds.rows.size() * 95 / 100);
  }
  SECTION("single-class dataset degenerates to the default") {
    Dataset one;
    one.schema = define_schema(
        {FeatureDecl{"x", FeatureKind::continuous, FeatureGroup::asr, {}},
         FeatureDecl{"label", FeatureKind::symbolic, FeatureGroup::label,
                     {"only"}}});
    for (int i = 0; i < 4; ++i) {
      FeatureVector fv;
      fv.id = "r" + std::to_string(i);
      fv.values["x"] = static_cast<double>(i);
      fv.label = "only";
      one.rows.push_back(std::move(fv));
    }
    RuleSet m = train(one, cfg);
    CHECK(m.rules.empty());
    CHECK(m.default_class == "only");
    CHECK(m.class_order == std::vector<std::string>{"only"});
  }
  SECTION("errors") {
    try {
      train(Dataset{ds.schema, {}}, cfg);
      FAIL("expected empty");
    } catch (const error& e) {
      CHECK(e.kind == "empty");
    }
    Dataset unlabeled = ds;
    unlabeled.rows[0].label.reset();
    try {
      train(unlabeled, cfg);
      FAIL("expected unlabeled");
    } catch (const error& e) {
      CHECK(e.kind == "unlabeled");
    }
  }
}

TEST_CASE("prediction is first-match with missing-value fall-through") {
  auto schema = xy_schema();
  RuleSet rs;
  rs.schema = schema;
  rs.schema_fingerprint = schema_fingerprint(schema);
  rs.default_class = "neg";
  rs.class_order = {"pos", "neg"};
  Rule r1;
  r1.cls = "pos";
  r1.conds = {Condition{"x", CondOp::le, 3.0, ""}};
  Rule r2;
  r2.cls = "neg";
  r2.conds = {Condition{"y", CondOp::eq, 0, "red"}};
  rs.rules = {r1, r2};

  FeatureVector both;
  both.values["x"] = 2.0;
  both.values["y"] = std::string("red");
  auto p = predict(rs, both);
  CHECK(p.cls == "pos");
  REQUIRE(p.rule.has_value());
  CHECK(*p.rule == 0);

  FeatureVector missing;  // no x: rule 1 cannot match
  missing.values["y"] = std::string("blue");
  auto q = predict(rs, missing);
  CHECK(q.cls == "neg");
  CHECK_FALSE(q.rule.has_value());

  SECTION("empty ruleset applies the default") {
    RuleSet empty;
    empty.schema = schema;
    empty.schema_fingerprint = schema_fingerprint(schema);
    empty.default_class = "pos";
    CHECK(predict(empty, both).cls == "pos");
  }
  SECTION("bulk prediction agrees with brute force on random vectors") {
    std::mt19937_64 rng(11);
    Dataset batch;
    batch.schema = schema;
    for (int i = 0; i < 100; ++i) {
      FeatureVector fv;
      fv.id = "q" + std::to_string(i);
      if (rng() % 4) fv.values["x"] = double(rng() % 8);
      if (rng() % 4) fv.values["y"] = std::string(rng() % 2 ? "red" : "blue");
      batch.rows.push_back(std::move(fv));
    }
    auto preds = predict_dataset(rs, batch);
    for (std::size_t i = 0; i < batch.rows.size(); ++i) {
      std::optional<std::size_t> first;
      for (std::size_t k = 0; k < rs.rules.size(); ++k)
        if (rule_covers(rs.rules[k], batch.rows[i])) {
          first = k;
          break;
        }
      CHECK(preds[i].cls == (first ? rs.rules[*first].cls : rs.default_class));
      CHECK(preds[i].rule == first);
    }
  }
  SECTION("schema fingerprint guards bulk prediction") {
    Dataset other;
    other.schema = define_schema(
        {FeatureDecl{"z", FeatureKind::continuous, FeatureGroup::asr, {}},
         FeatureDecl{"label", FeatureKind::symbolic, FeatureGroup::label,
                     {"pos", "neg"}}});
    try {
      predict_dataset(rs, other);
      FAIL("expected schema-mismatch");
    } catch (const error& e) {
      CHECK(e.kind == "schema-mismatch");
    }
  }
}

TEST_CASE("raising the loss ratio never covers fewer positives") {
  Dataset ds;
  ds.schema = xy_schema();
  // Overlapping classes: positives concentrated low, negatives high, with a
  // mixed region in between.
  int k = 0;
  for (int i = 0; i < 30; ++i)
    ds.rows.push_back(make_row("p" + std::to_string(k++), i % 25, "red", "pos"));
  for (int i = 0; i < 50; ++i)
    ds.rows.push_back(
        make_row("n" + std::to_string(k++), 15 + (i * 7) % 45, "red", "neg"));

  auto covered_pos = [&](double loss_ratio) {
    TrainConfig cfg;
    cfg.loss_ratio = loss_ratio;
    auto rules = learn_class_rules(ds, "pos", cfg);
    long long covered = 0;
    for (const auto& row : ds.rows)
      if (*row.label == "pos" && any_covers(rules, row)) covered++;
    return covered;
  };
  long long c1 = covered_pos(1.0);
  long long c2 = covered_pos(2.0);
  long long c4 = covered_pos(4.0);
  CHECK(c1 <= c2);
  CHECK(c2 <= c4);
}

TEST_CASE("rulesets round-trip through both formats") {
  TrainConfig cfg;
  Dataset ds = concept_dataset(5);
  RuleSet rs = train(ds, cfg);
  REQUIRE_FALSE(rs.rules.empty());

  SECTION("canonical format is bit-exact") {
    std::string text = save_ruleset_text_canonical(rs);
    RuleSet back = load_ruleset_text_canonical(text);
    CHECK(save_ruleset_text_canonical(back) == text);
    CHECK(back.schema_fingerprint == rs.schema_fingerprint);
    CHECK(back.default_class == rs.default_class);
    REQUIRE(back.rules.size() == rs.rules.size());
    for (std::size_t i = 0; i < back.rules.size(); ++i) {
      CHECK(back.rules[i].conds == rs.rules[i].conds);
      CHECK(back.rules[i].p == rs.rules[i].p);
      CHECK(back.rules[i].n == rs.rules[i].n);
    }
  }
  SECTION("display format re-renders identically") {
    std::string text = render_ruleset_text(rs);
    RuleSet parsed = parse_ruleset_text(text);
    CHECK(render_ruleset_text(parsed) == text);
    CHECK(parsed.default_class == rs.default_class);
  }
  SECTION("display format shape") {
    RuleSet tiny;
    tiny.default_class = "neg";
    Rule r;
    r.cls = "pos";
    r.conds = {Condition{"x", CondOp::le, 3.12, ""},
               Condition{"recog", CondOp::contains, 0, "help"},
               Condition{"sys-label", CondOp::eq, 0, "DIAL-FOR-ME"}};
    tiny.rules = {r};
    Rule always;
    always.cls = "mid";
    tiny.rules.push_back(always);
    CHECK(render_ruleset_text(tiny) ==
          "if (x <= 3.12) ^ (recog contains \"help\") ^ (sys-label = "
          "DIAL-FOR-ME) then pos\n"
          "if true then mid\n"
          "default neg\n");
  }
  SECTION("format errors") {
    try {
      parse_ruleset_text("if (x <= 3) then pos\n");  // no default line
      FAIL("expected bad-format");
    } catch (const error& e) {
      CHECK(e.kind == "bad-format");
    }
    try {
      load_ruleset_text_canonical("{\"format\":\"other\"}");
      FAIL("expected bad-format");
    } catch (const error& e) {
      CHECK(e.kind == "bad-format");
    }
  }
}
