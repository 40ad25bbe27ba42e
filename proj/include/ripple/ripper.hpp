#pragma once

// Ordered rule-list induction with reduced-error pruning and an MDL stop,
// plus post-hoc rule optimization and ordered one-vs-rest multi-class
// training (classes learned in increasing frequency order, majority class
// as default).
//
// Pinned semantics, which the tests freeze:
//   gain(p, n, p', n')  = p' * (log2(p'/(p'+n')) - log2(p/(p+n))), 0 if p'=0
//   prune_value(p, n)   = (p - n) / (p + n), error when p + n = 0
//   rule bits           = 0.5 * (log2(k+1) + k*log2(C)), C = #(feature,form)
//   exception bits      = log2 C(cov, fp) + log2 C(uncov, fn)
//                         + log2(fp+1) + log2(fn+1)
// Cost sensitivity: a loss ratio L weighs positives L : 1 inside
// prune_value, the 50% error stop, and DL exception counting. Growth is
// cost-blind. Conditions never match missing values.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ripple/core.hpp"
#include "ripple/tabular.hpp"

namespace ripple {

enum class CondOp { le, ge, eq, contains };

inline const char* to_string(CondOp op) {
  switch (op) {
    case CondOp::le: return "le";
    case CondOp::ge: return "ge";
    case CondOp::eq: return "eq";
    case CondOp::contains: return "contains";
  }
  return "?";
}

inline CondOp parse_op(const std::string& s) {
  if (s == "le") return CondOp::le;
  if (s == "ge") return CondOp::ge;
  if (s == "eq") return CondOp::eq;
  if (s == "contains") return CondOp::contains;
  fail("bad-op", "unknown condition op: " + s);
}

struct Condition {
  std::string feature;
  CondOp op = CondOp::le;
  double threshold = 0;  // le / ge
  std::string value;     // eq / contains

  bool operator==(const Condition& o) const {
    return feature == o.feature && op == o.op && threshold == o.threshold &&
           value == o.value;
  }
};

struct Rule {
  std::string cls;
  std::vector<Condition> conds;
  long long p = 0, n = 0;  // cover stats on the data the rule was accepted on
};

struct TrainConfig {
  double grow_fraction = 2.0 / 3.0;
  double mdl_slack_bits = 64.0;
  int optimization_passes = 2;
  double loss_ratio = 1.0;  // FN cost over FP cost for the class being grown
  std::uint64_t seed = 0;
  long long min_rule_cover = 1;
};

inline json config_to_json(const TrainConfig& c) {
  return json{{"grow_fraction", c.grow_fraction},
              {"mdl_slack_bits", c.mdl_slack_bits},
              {"optimization_passes", c.optimization_passes},
              {"loss_ratio", c.loss_ratio},
              {"seed", c.seed},
              {"min_rule_cover", c.min_rule_cover}};
}

inline TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  c.grow_fraction = j.at("grow_fraction").get<double>();
  c.mdl_slack_bits = j.at("mdl_slack_bits").get<double>();
  c.optimization_passes = j.at("optimization_passes").get<int>();
  c.loss_ratio = j.at("loss_ratio").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.min_rule_cover = j.at("min_rule_cover").get<long long>();
  return c;
}

struct RuleSet {
  FeatureSchema schema;
  std::vector<Rule> rules;               // first match wins
  std::string default_class;
  std::vector<std::string> class_order;  // training order, default last
  TrainConfig config;
  std::string schema_fingerprint;
};

// ---- pinned scores ----

inline double foil_gain(double p, double n, double p_after, double n_after) {
  if (p <= 0 || n < 0 || p_after < 0 || n_after < 0 || p_after > p || n_after > n)
    fail("invalid-counts", "foil gain needs p > 0 and 0 <= after <= before");
  if (p_after == 0) return 0.0;
  return p_after * (std::log2(p_after / (p_after + n_after)) -
                    std::log2(p / (p + n)));
}

inline double prune_value(double p, double n) {
  if (p + n <= 0) fail("undefined-score", "prune value undefined on empty cover");
  return (p - n) / (p + n);
}

namespace detail {

inline double log2_binom(double n, double k) {
  if (k <= 0 || n <= 0) return 0.0;
  if (k > n) k = n;
  return (std::lgamma(n + 1) - std::lgamma(k + 1) - std::lgamma(n - k + 1)) /
         std::log(2.0);
}

inline double norm_count(double x) { return std::log2(x + 1.0); }

inline double rule_bits(std::size_t k, double universe) {
  return 0.5 * (std::log2(static_cast<double>(k) + 1.0) +
                static_cast<double>(k) * std::log2(universe));
}

inline double exception_bits(double cov, double fp, double uncov, double fn) {
  return log2_binom(cov, fp) + log2_binom(uncov, fn) + norm_count(fp) +
         norm_count(fn);
}

// Number of distinct (feature, form) condition slots the schema offers:
// a continuous feature has two forms (le, ge), symbolic and set one each.
inline double condition_universe(const FeatureSchema& schema) {
  double c = 0;
  for (const auto& d : schema.features)
    c += d.kind == FeatureKind::continuous ? 2 : 1;
  return c;
}

// ---- column-compiled dataset (training fast path) ----

struct Column {
  FeatureKind kind = FeatureKind::continuous;
  std::vector<double> num;        // NaN = missing
  std::vector<std::int32_t> sym;  // -1 = missing
  std::vector<std::string> dict;  // sorted; shared by sym / tokens
  std::vector<std::int32_t> offsets;  // CSR over rows (set kind)
  std::vector<std::int32_t> tokens;   // sorted unique codes per row
};

struct Compiled {
  FeatureSchema schema;
  std::vector<Column> cols;
  std::vector<std::int32_t> label;  // class index, -1 when unlabeled
  std::size_t nrows = 0;
};

inline std::int32_t dict_code(const std::vector<std::string>& dict,
                              const std::string& v) {
  auto it = std::lower_bound(dict.begin(), dict.end(), v);
  if (it == dict.end() || *it != v) return -2;  // never matches
  return static_cast<std::int32_t>(it - dict.begin());
}

inline Compiled compile(const Dataset& ds) {
  Compiled c;
  c.schema = ds.schema;
  c.nrows = ds.rows.size();
  c.cols.resize(ds.schema.features.size());
  for (std::size_t f = 0; f < ds.schema.features.size(); ++f) {
    const auto& decl = ds.schema.features[f];
    Column& col = c.cols[f];
    col.kind = decl.kind;
    if (decl.kind == FeatureKind::continuous) {
      col.num.assign(c.nrows, std::numeric_limits<double>::quiet_NaN());
    } else if (decl.kind == FeatureKind::symbolic) {
      col.sym.assign(c.nrows, -1);
      std::vector<std::string> vals;
      for (const auto& row : ds.rows)
        if (const Value* v = row.get(decl.name))
          vals.push_back(std::get<std::string>(*v));
      std::sort(vals.begin(), vals.end());
      vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
      col.dict = std::move(vals);
    } else {
      std::vector<std::string> vals;
      for (const auto& row : ds.rows)
        if (const Value* v = row.get(decl.name))
          for (const auto& t : std::get<TokenBag>(*v)) vals.push_back(t);
      std::sort(vals.begin(), vals.end());
      vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
      col.dict = std::move(vals);
      col.offsets.reserve(c.nrows + 1);
    }
  }
  for (std::size_t r = 0; r < c.nrows; ++r) {
    const auto& row = ds.rows[r];
    for (std::size_t f = 0; f < ds.schema.features.size(); ++f) {
      const auto& decl = ds.schema.features[f];
      Column& col = c.cols[f];
      if (decl.kind == FeatureKind::set) col.offsets.push_back(static_cast<std::int32_t>(col.tokens.size()));
      const Value* v = row.get(decl.name);
      if (!v) continue;
      switch (decl.kind) {
        case FeatureKind::continuous:
          col.num[r] = std::get<double>(*v);
          break;
        case FeatureKind::symbolic:
          col.sym[r] = dict_code(col.dict, std::get<std::string>(*v));
          break;
        case FeatureKind::set: {
          std::vector<std::int32_t> codes;
          for (const auto& t : std::get<TokenBag>(*v))
            codes.push_back(dict_code(col.dict, t));
          std::sort(codes.begin(), codes.end());
          codes.erase(std::unique(codes.begin(), codes.end()), codes.end());
          // fix up: tokens were appended per row; write now
          for (auto code : codes) col.tokens.push_back(code);
          break;
        }
      }
    }
  }
  for (std::size_t f = 0; f < ds.schema.features.size(); ++f)
    if (ds.schema.features[f].kind == FeatureKind::set)
      c.cols[f].offsets.push_back(static_cast<std::int32_t>(c.cols[f].tokens.size()));
  c.label.assign(c.nrows, -1);
  for (std::size_t r = 0; r < c.nrows; ++r)
    if (ds.rows[r].label)
      c.label[r] = static_cast<std::int32_t>(ds.schema.class_index(*ds.rows[r].label));
  return c;
}

struct ResolvedCond {
  std::int32_t col = -1;
  CondOp op = CondOp::le;
  double threshold = 0;
  std::int32_t code = -2;
};

inline ResolvedCond resolve(const Compiled& c, const Condition& cond) {
  ResolvedCond rc;
  auto it = c.schema.index.find(cond.feature);
  if (it == c.schema.index.end())
    fail("unknown-feature", "rule references unknown feature: " + cond.feature);
  rc.col = static_cast<std::int32_t>(it->second);
  rc.op = cond.op;
  rc.threshold = cond.threshold;
  const Column& col = c.cols[it->second];
  if (cond.op == CondOp::eq || cond.op == CondOp::contains)
    rc.code = dict_code(col.dict, cond.value);
  if ((cond.op == CondOp::le || cond.op == CondOp::ge) &&
      col.kind != FeatureKind::continuous)
    fail("kind-mismatch", "threshold condition on non-continuous feature: " + cond.feature);
  if (cond.op == CondOp::eq && col.kind != FeatureKind::symbolic)
    fail("kind-mismatch", "equality condition on non-symbolic feature: " + cond.feature);
  if (cond.op == CondOp::contains && col.kind != FeatureKind::set)
    fail("kind-mismatch", "contains condition on non-set feature: " + cond.feature);
  return rc;
}

inline bool matches(const Compiled& c, const ResolvedCond& rc, std::size_t row) {
  const Column& col = c.cols[static_cast<std::size_t>(rc.col)];
  switch (rc.op) {
    case CondOp::le: {
      double v = col.num[row];
      return !std::isnan(v) && v <= rc.threshold;
    }
    case CondOp::ge: {
      double v = col.num[row];
      return !std::isnan(v) && v >= rc.threshold;
    }
    case CondOp::eq:
      return col.sym[row] == rc.code;
    case CondOp::contains: {
      const auto* beg = col.tokens.data() + col.offsets[row];
      const auto* end = col.tokens.data() + col.offsets[row + 1];
      return std::binary_search(beg, end, rc.code);
    }
  }
  return false;
}

inline std::vector<ResolvedCond> resolve_rule(const Compiled& c,
                                              const std::vector<Condition>& conds) {
  std::vector<ResolvedCond> out;
  out.reserve(conds.size());
  for (const auto& cond : conds) out.push_back(resolve(c, cond));
  return out;
}

inline bool rule_matches(const Compiled& c, const std::vector<ResolvedCond>& conds,
                         std::size_t row) {
  for (const auto& rc : conds)
    if (!matches(c, rc, row)) return false;
  return true;
}

// ---- growth ----

struct GrowCandidate {
  double gain = 0;
  long long p_after = 0;
  bool valid = false;
  std::size_t feat = 0;
  int form = 0;  // 0 = le, 1 = ge/eq/contains (within one feature)
  double threshold = 0;
  std::int32_t code = -1;
  CondOp op = CondOp::le;
};

// Strictly-better test realizing the pinned tie-breaks: higher gain, then
// higher p_after; remaining ties keep the earlier candidate, and the caller
// enumerates in (schema order, le-before-ge, ascending threshold/value) order.
inline bool improves(const GrowCandidate& cand, const GrowCandidate& best) {
  if (!best.valid) return true;
  if (cand.gain != best.gain) return cand.gain > best.gain;
  return cand.p_after > best.p_after;
}

struct GrowResult {
  std::vector<Condition> conds;
  long long p = 0, n = 0;  // final cover on the grow set
};

inline GrowResult grow_rule_impl(const Compiled& c,
                                 const std::vector<std::size_t>& grow_set,
                                 std::int32_t target) {
  std::vector<std::size_t> covered = grow_set;
  long long p_cur = 0, n_cur = 0;
  for (auto r : covered) (c.label[r] == target ? p_cur : n_cur)++;
  if (p_cur == 0) fail("no-positives", "grow set holds no example of the target class");

  GrowResult out;
  std::vector<std::pair<double, char>> vals;  // (value, is_pos) scratch
  std::vector<long long> pos_tally, neg_tally;
  std::vector<std::int32_t> touched;

  while (n_cur > 0) {
    GrowCandidate best;
    const double pc = static_cast<double>(p_cur);
    const double nc = static_cast<double>(n_cur);
    const double base = std::log2(pc / (pc + nc));
    auto consider = [&](std::size_t feat, CondOp op, double thr, std::int32_t code,
                        long long pa, long long na) {
      if (pa == 0) return;  // gain defined as 0, never positive
      double gain = static_cast<double>(pa) *
                    (std::log2(static_cast<double>(pa) /
                               static_cast<double>(pa + na)) -
                     base);
      if (gain <= 0) return;
      GrowCandidate cand;
      cand.gain = gain;
      cand.p_after = pa;
      cand.valid = true;
      cand.feat = feat;
      cand.op = op;
      cand.threshold = thr;
      cand.code = code;
      if (improves(cand, best)) best = cand;
    };

    for (std::size_t f = 0; f < c.cols.size(); ++f) {
      const Column& col = c.cols[f];
      if (col.kind == FeatureKind::continuous) {
        vals.clear();
        for (auto r : covered) {
          double v = col.num[r];
          if (!std::isnan(v)) vals.emplace_back(v, c.label[r] == target ? 1 : 0);
        }
        if (vals.empty()) continue;
        std::sort(vals.begin(), vals.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        // aggregate per distinct value
        struct Group { double v; long long p, n; };
        std::vector<Group> groups;
        for (const auto& [v, isp] : vals) {
          if (groups.empty() || groups.back().v != v) groups.push_back({v, 0, 0});
          (isp ? groups.back().p : groups.back().n)++;
        }
        long long tp = 0, tn = 0;
        for (const auto& g : groups) tp += g.p, tn += g.n;
        // form le, thresholds ascending
        long long cp = 0, cn = 0;
        for (const auto& g : groups) {
          cp += g.p;
          cn += g.n;
          consider(f, CondOp::le, g.v, -1, cp, cn);
        }
        // form ge, thresholds ascending
        cp = 0, cn = 0;
        for (const auto& g : groups) {
          consider(f, CondOp::ge, g.v, -1, tp - cp, tn - cn);
          cp += g.p;
          cn += g.n;
        }
      } else if (col.kind == FeatureKind::symbolic) {
        pos_tally.assign(col.dict.size(), 0);
        neg_tally.assign(col.dict.size(), 0);
        touched.clear();
        for (auto r : covered) {
          std::int32_t code = col.sym[r];
          if (code < 0) continue;
          if (pos_tally[static_cast<std::size_t>(code)] == 0 &&
              neg_tally[static_cast<std::size_t>(code)] == 0)
            touched.push_back(code);
          (c.label[r] == target ? pos_tally : neg_tally)[static_cast<std::size_t>(code)]++;
        }
        std::sort(touched.begin(), touched.end());
        for (auto code : touched)
          consider(f, CondOp::eq, 0, code, pos_tally[static_cast<std::size_t>(code)],
                   neg_tally[static_cast<std::size_t>(code)]);
      } else {
        pos_tally.assign(col.dict.size(), 0);
        neg_tally.assign(col.dict.size(), 0);
        touched.clear();
        for (auto r : covered) {
          bool is_pos = c.label[r] == target;
          for (std::int32_t k = col.offsets[r]; k < col.offsets[r + 1]; ++k) {
            std::int32_t code = col.tokens[static_cast<std::size_t>(k)];
            if (pos_tally[static_cast<std::size_t>(code)] == 0 &&
                neg_tally[static_cast<std::size_t>(code)] == 0)
              touched.push_back(code);
            (is_pos ? pos_tally : neg_tally)[static_cast<std::size_t>(code)]++;
          }
        }
        std::sort(touched.begin(), touched.end());
        for (auto code : touched)
          consider(f, CondOp::contains, 0, code,
                   pos_tally[static_cast<std::size_t>(code)],
                   neg_tally[static_cast<std::size_t>(code)]);
      }
    }

    if (!best.valid) break;  // no condition with positive gain

    Condition cond;
    cond.feature = c.schema.features[best.feat].name;
    cond.op = best.op;
    if (best.op == CondOp::le || best.op == CondOp::ge)
      cond.threshold = best.threshold;
    else
      cond.value = c.cols[best.feat].dict[static_cast<std::size_t>(best.code)];
    ResolvedCond rc = resolve(c, cond);
    std::vector<std::size_t> next;
    next.reserve(covered.size());
    long long np = 0, nn = 0;
    for (auto r : covered)
      if (matches(c, rc, r)) {
        next.push_back(r);
        (c.label[r] == target ? np : nn)++;
      }
    covered = std::move(next);
    p_cur = np;
    n_cur = nn;
    out.conds.push_back(std::move(cond));
  }
  out.p = p_cur;
  out.n = n_cur;
  return out;
}

// ---- pruning ----

struct Weights {
  double wpos = 1, wneg = 1;
};

// Best prefix of the condition list by prune value on the prune set;
// ties go to the shorter prefix. Prefixes with empty cover can't be
// scored and are skipped; if nothing is scoreable the rule is unchanged.
inline std::vector<Condition> prune_rule_impl(
    const Compiled& c, const std::vector<std::size_t>& prune_set,
    const std::vector<Condition>& conds, std::int32_t target, Weights w) {
  if (prune_set.empty() || conds.empty()) return conds;
  auto resolved = resolve_rule(c, conds);
  std::vector<std::size_t> covered = prune_set;
  double best_value = 0;
  std::size_t best_k = conds.size() + 1;  // sentinel: nothing scoreable yet
  for (std::size_t k = 0; k <= conds.size(); ++k) {
    if (k > 0) {
      std::vector<std::size_t> next;
      next.reserve(covered.size());
      for (auto r : covered)
        if (matches(c, resolved[k - 1], r)) next.push_back(r);
      covered = std::move(next);
    }
    double wp = 0, wn = 0;
    for (auto r : covered) (c.label[r] == target ? wp : wn) += (c.label[r] == target ? w.wpos : w.wneg);
    if (wp + wn <= 0) continue;
    double value = (wp - wn) / (wp + wn);
    if (best_k > conds.size() || value > best_value) {
      best_value = value;
      best_k = k;
    }
  }
  if (best_k > conds.size()) return conds;
  return std::vector<Condition>(conds.begin(), conds.begin() + static_cast<std::ptrdiff_t>(best_k));
}

}  // namespace detail

// ---- public single-step operations ----

inline Rule grow_rule(const Dataset& data, const std::vector<std::size_t>& grow_set,
                      const std::string& target_class, const TrainConfig&) {
  auto c = detail::compile(data);
  auto target = static_cast<std::int32_t>(data.schema.class_index(target_class));
  auto res = detail::grow_rule_impl(c, grow_set, target);
  Rule r;
  r.cls = target_class;
  r.conds = std::move(res.conds);
  r.p = res.p;
  r.n = res.n;
  return r;
}

inline Rule prune_rule(const Dataset& data, const std::vector<std::size_t>& prune_set,
                       const Rule& rule, const TrainConfig& cfg) {
  auto c = detail::compile(data);
  auto target = static_cast<std::int32_t>(data.schema.class_index(rule.cls));
  detail::Weights w{cfg.loss_ratio, 1.0};
  Rule out = rule;
  out.conds = detail::prune_rule_impl(c, prune_set, rule.conds, target, w);
  return out;
}

namespace detail {

// Class-local coverage bookkeeping for DL evaluation: every rule in `rules`
// targets the same class; an example is covered when any rule matches.
struct DlState {
  double cov = 0, fp = 0, uncov = 0, fn = 0;  // weighted
};

inline double dl_total(double rule_bits_sum, const DlState& s) {
  return rule_bits_sum + exception_bits(s.cov, s.fp, s.uncov, s.fn);
}

}  // namespace detail

// Total description length of an ordered rule list plus its exceptions on
// `data` (first match wins; unmatched examples take the default class).
// With a loss ratio L, examples whose label differs from the default class
// weigh L, the rest weigh 1.
inline double description_length(const RuleSet& rs, const Dataset& data) {
  auto c = detail::compile(data);
  double universe = detail::condition_universe(
      rs.schema.features.empty() ? data.schema : rs.schema);
  double bits = 0;
  std::vector<std::vector<detail::ResolvedCond>> resolved;
  resolved.reserve(rs.rules.size());
  for (const auto& r : rs.rules) {
    bits += detail::rule_bits(r.conds.size(), universe);
    resolved.push_back(detail::resolve_rule(c, r.conds));
  }
  double wpos = rs.config.loss_ratio;
  detail::DlState s;
  for (std::size_t row = 0; row < c.nrows; ++row) {
    if (c.label[row] < 0) fail("unlabeled", "description length needs labeled data");
    const std::string& truth = data.schema.classes[static_cast<std::size_t>(c.label[row])];
    double w = truth == rs.default_class ? 1.0 : wpos;
    const Rule* hit = nullptr;
    for (std::size_t i = 0; i < rs.rules.size(); ++i)
      if (detail::rule_matches(c, resolved[i], row)) {
        hit = &rs.rules[i];
        break;
      }
    if (hit) {
      s.cov += w;
      if (hit->cls != truth) s.fp += w;
    } else {
      s.uncov += w;
      if (truth != rs.default_class) s.fn += w;
    }
  }
  return detail::dl_total(bits, s);
}

namespace detail {

struct ClassProblem {
  const Compiled* data = nullptr;
  std::vector<std::size_t> rows;  // the examples this class problem sees
  std::int32_t target = -1;
  Weights w;
  double universe = 0;
};

// Weighted coverage summary of one rule over a row list.
struct CoverStats {
  long long p = 0, n = 0;
  double wp = 0, wn = 0;
};

inline CoverStats cover_stats(const Compiled& c,
                              const std::vector<ResolvedCond>& conds,
                              const std::vector<std::size_t>& rows,
                              std::int32_t target, Weights w) {
  CoverStats s;
  for (auto r : rows) {
    if (!rule_matches(c, conds, r)) continue;
    if (c.label[r] == target) {
      s.p++;
      s.wp += w.wpos;
    } else {
      s.n++;
      s.wn += w.wneg;
    }
  }
  return s;
}

// DL of a class-local rule list over the problem rows.
inline double class_dl(const ClassProblem& prob,
                       const std::vector<std::vector<ResolvedCond>>& resolved,
                       const std::vector<std::size_t>& cond_counts) {
  double bits = 0;
  for (auto k : cond_counts) bits += rule_bits(k, prob.universe);
  DlState s;
  const Compiled& c = *prob.data;
  for (auto row : prob.rows) {
    bool is_pos = c.label[row] == prob.target;
    double w = is_pos ? prob.w.wpos : prob.w.wneg;
    bool covered = false;
    for (const auto& conds : resolved)
      if (rule_matches(c, conds, row)) {
        covered = true;
        break;
      }
    if (covered) {
      s.cov += w;
      if (!is_pos) s.fp += w;
    } else {
      s.uncov += w;
      if (is_pos) s.fn += w;
    }
  }
  return dl_total(bits, s);
}

inline std::vector<std::size_t> split_grow(std::vector<std::size_t> rows,
                                           double grow_fraction,
                                           std::mt19937_64& rng,
                                           std::vector<std::size_t>& prune_out) {
  std::shuffle(rows.begin(), rows.end(), rng);
  auto cut = static_cast<std::size_t>(grow_fraction * static_cast<double>(rows.size()));
  prune_out.assign(rows.begin() + static_cast<std::ptrdiff_t>(cut), rows.end());
  rows.resize(cut);
  return rows;
}

inline long long count_pos(const Compiled& c, const std::vector<std::size_t>& rows,
                           std::int32_t target) {
  long long p = 0;
  for (auto r : rows)
    if (c.label[r] == target) p++;
  return p;
}

// Sequential cover loop: grow, prune, then accept unless the weighted error
// tops 50% or the MDL budget is blown.
inline std::vector<Rule> learn_class_rules_impl(const ClassProblem& prob,
                                                const TrainConfig& cfg,
                                                std::mt19937_64& rng) {
  const Compiled& c = *prob.data;
  std::vector<Rule> rules;
  std::vector<std::vector<ResolvedCond>> resolved;
  std::vector<std::size_t> cond_counts;
  double dl_min = class_dl(prob, resolved, cond_counts);
  std::vector<std::size_t> remaining = prob.rows;

  while (count_pos(c, remaining, prob.target) > 0) {
    std::vector<std::size_t> prune_set;
    auto grow_set = split_grow(remaining, cfg.grow_fraction, rng, prune_set);
    if (count_pos(c, grow_set, prob.target) == 0) break;
    auto grown = grow_rule_impl(c, grow_set, prob.target);
    if (grown.p < cfg.min_rule_cover) break;
    auto conds = prune_rule_impl(c, prune_set, grown.conds, prob.target, prob.w);

    auto rconds = resolve_rule(c, conds);
    auto on_remaining = cover_stats(c, rconds, remaining, prob.target, prob.w);
    if (on_remaining.wn > on_remaining.wp) break;  // weighted error > 50%

    resolved.push_back(rconds);
    cond_counts.push_back(conds.size());
    double dl_new = class_dl(prob, resolved, cond_counts);
    if (dl_new > dl_min + cfg.mdl_slack_bits) {
      resolved.pop_back();
      cond_counts.pop_back();
      break;
    }
    dl_min = std::min(dl_min, dl_new);

    Rule r;
    r.cls = c.schema.classes[static_cast<std::size_t>(prob.target)];
    r.conds = std::move(conds);
    r.p = on_remaining.p;
    r.n = on_remaining.n;
    rules.push_back(std::move(r));

    std::vector<std::size_t> next;
    next.reserve(remaining.size());
    for (auto row : remaining)
      if (!rule_matches(c, rconds, row)) next.push_back(row);
    remaining = std::move(next);
  }
  return rules;
}

// One optimization sweep: for each rule, grow a replacement and a revision
// against the residual the other rules leave uncovered, and keep whichever
// of {original, replacement, revision} minimizes total class DL. A
// replacement that cannot be grown degenerates to deleting the rule.
inline void optimize_impl(std::vector<Rule>& rules, const ClassProblem& prob,
                          const TrainConfig& cfg, std::mt19937_64& rng) {
  const Compiled& c = *prob.data;
  for (int pass = 0; pass < cfg.optimization_passes; ++pass) {
    std::size_t i = 0;
    while (i < rules.size()) {
      std::vector<std::vector<ResolvedCond>> others;
      std::vector<std::size_t> other_counts;
      for (std::size_t j = 0; j < rules.size(); ++j) {
        if (j == i) continue;
        others.push_back(resolve_rule(c, rules[j].conds));
        other_counts.push_back(rules[j].conds.size());
      }
      std::vector<std::size_t> residual;
      for (auto row : prob.rows) {
        bool covered = false;
        for (const auto& conds : others)
          if (rule_matches(c, conds, row)) {
            covered = true;
            break;
          }
        if (!covered) residual.push_back(row);
      }

      std::optional<std::vector<Condition>> replacement;  // nullopt = delete
      std::optional<std::vector<Condition>> revision;
      std::vector<std::size_t> prune_set;
      auto grow_set = split_grow(residual, cfg.grow_fraction, rng, prune_set);
      if (count_pos(c, grow_set, prob.target) > 0) {
        auto grown = grow_rule_impl(c, grow_set, prob.target);
        replacement = prune_rule_impl(c, prune_set, grown.conds, prob.target, prob.w);
        // revision: extend the original conditions on the residual grow set
        std::vector<std::size_t> still;
        auto orig = resolve_rule(c, rules[i].conds);
        for (auto row : grow_set)
          if (rule_matches(c, orig, row)) still.push_back(row);
        if (count_pos(c, still, prob.target) > 0) {
          auto extended = rules[i].conds;
          auto more = grow_rule_impl(c, still, prob.target);
          for (auto& cond : more.conds) extended.push_back(std::move(cond));
          revision = prune_rule_impl(c, prune_set, extended, prob.target, prob.w);
        }
      }

      auto dl_with = [&](const std::optional<std::vector<Condition>>& cand) {
        auto resolved = others;
        auto counts = other_counts;
        if (cand) {
          resolved.push_back(resolve_rule(c, *cand));
          counts.push_back(cand->size());
        }
        return class_dl(prob, resolved, counts);
      };

      double dl_orig = dl_with(rules[i].conds);
      double dl_best = dl_orig;
      int choice = 0;  // 0 original, 1 replacement(or delete), 2 revision
      double dl_repl = dl_with(replacement);
      if (dl_repl < dl_best) {
        dl_best = dl_repl;
        choice = 1;
      }
      if (revision) {
        double dl_rev = dl_with(revision);
        if (dl_rev < dl_best) {
          dl_best = dl_rev;
          choice = 2;
        }
      }
      if (choice == 1 && !replacement) {
        rules.erase(rules.begin() + static_cast<std::ptrdiff_t>(i));
        continue;  // same index now holds the next rule
      }
      if (choice == 1) rules[i].conds = *replacement;
      if (choice == 2) rules[i].conds = *revision;
      ++i;
    }
  }
  // refresh cover stats: first match within the class problem
  std::vector<char> taken(c.nrows, 0);
  for (auto& rule : rules) {
    auto rconds = resolve_rule(c, rule.conds);
    rule.p = rule.n = 0;
    for (auto row : prob.rows) {
      if (taken[row] || !rule_matches(c, rconds, row)) continue;
      taken[row] = 1;
      (c.label[row] == prob.target ? rule.p : rule.n)++;
    }
  }
}

inline ClassProblem make_problem(const Compiled& c, std::vector<std::size_t> rows,
                                 std::int32_t target, const TrainConfig& cfg) {
  ClassProblem prob;
  prob.data = &c;
  prob.rows = std::move(rows);
  prob.target = target;
  prob.w = Weights{cfg.loss_ratio, 1.0};
  prob.universe = condition_universe(c.schema);
  return prob;
}

}  // namespace detail

inline std::vector<Rule> learn_class_rules(const Dataset& data,
                                           const std::string& target_class,
                                           const TrainConfig& cfg) {
  auto c = detail::compile(data);
  auto target = static_cast<std::int32_t>(data.schema.class_index(target_class));
  std::vector<std::size_t> rows(data.rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  auto prob = detail::make_problem(c, std::move(rows), target, cfg);
  std::mt19937_64 rng(mix_seed(cfg.seed, "learn:" + target_class));
  return detail::learn_class_rules_impl(prob, cfg, rng);
}

inline std::vector<Rule> optimize(std::vector<Rule> rules, const Dataset& data,
                                  const std::string& target_class,
                                  const TrainConfig& cfg) {
  auto c = detail::compile(data);
  auto target = static_cast<std::int32_t>(data.schema.class_index(target_class));
  std::vector<std::size_t> rows(data.rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  auto prob = detail::make_problem(c, std::move(rows), target, cfg);
  std::mt19937_64 rng(mix_seed(cfg.seed, "optimize:" + target_class));
  detail::optimize_impl(rules, prob, cfg, rng);
  return rules;
}

// Ordered multi-class training: classes in increasing frequency order (ties
// toward class-universe order), each learned one-vs-rest on the examples the
// earlier classes left uncovered; the most frequent class is the default.
inline RuleSet train(const Dataset& data, const TrainConfig& cfg) {
  if (data.rows.empty()) fail("empty", "cannot train on an empty dataset");
  auto c = detail::compile(data);
  for (std::size_t r = 0; r < c.nrows; ++r)
    if (c.label[r] < 0) fail("unlabeled", "training example without label: " + data.rows[r].id);

  std::vector<long long> freq(data.schema.classes.size(), 0);
  for (auto l : c.label) freq[static_cast<std::size_t>(l)]++;
  std::vector<std::size_t> order(data.schema.classes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return freq[a] < freq[b];
  });

  RuleSet rs;
  rs.schema = data.schema;
  rs.config = cfg;
  rs.schema_fingerprint = schema_fingerprint(data.schema);
  rs.default_class = data.schema.classes[order.back()];

  std::vector<std::size_t> remaining(data.rows.size());
  for (std::size_t i = 0; i < remaining.size(); ++i) remaining[i] = i;

  for (std::size_t oi = 0; oi + 1 < order.size(); ++oi) {
    auto target = static_cast<std::int32_t>(order[oi]);
    const std::string& cls = data.schema.classes[order[oi]];
    rs.class_order.push_back(cls);
    auto prob = detail::make_problem(c, remaining, target, cfg);
    std::mt19937_64 learn_rng(mix_seed(cfg.seed, "learn:" + cls));
    auto rules = detail::learn_class_rules_impl(prob, cfg, learn_rng);
    std::mt19937_64 opt_rng(mix_seed(cfg.seed, "optimize:" + cls));
    detail::optimize_impl(rules, prob, cfg, opt_rng);

    std::vector<std::vector<detail::ResolvedCond>> resolved;
    for (const auto& r : rules) resolved.push_back(detail::resolve_rule(c, r.conds));
    std::vector<std::size_t> next;
    next.reserve(remaining.size());
    for (auto row : remaining) {
      bool covered = false;
      for (const auto& conds : resolved)
        if (detail::rule_matches(c, conds, row)) {
          covered = true;
          break;
        }
      if (!covered) next.push_back(row);
    }
    remaining = std::move(next);
    for (auto& r : rules) rs.rules.push_back(std::move(r));
  }
  rs.class_order.push_back(rs.default_class);
  return rs;
}

// ---- prediction ----

struct Prediction {
  std::string cls;
  std::optional<std::size_t> rule;  // empty: default class applied
};

inline bool condition_matches(const Condition& cond, const FeatureVector& fv) {
  const Value* v = fv.get(cond.feature);
  if (!v) return false;  // conditions never match missing values
  switch (cond.op) {
    case CondOp::le:
      return std::holds_alternative<double>(*v) && std::get<double>(*v) <= cond.threshold;
    case CondOp::ge:
      return std::holds_alternative<double>(*v) && std::get<double>(*v) >= cond.threshold;
    case CondOp::eq:
      return std::holds_alternative<std::string>(*v) && std::get<std::string>(*v) == cond.value;
    case CondOp::contains: {
      if (!std::holds_alternative<TokenBag>(*v)) return false;
      const auto& bag = std::get<TokenBag>(*v);
      return std::find(bag.begin(), bag.end(), cond.value) != bag.end();
    }
  }
  return false;
}

inline Prediction predict(const RuleSet& rs, const FeatureVector& fv) {
  validate_example(rs.schema, fv);
  for (std::size_t i = 0; i < rs.rules.size(); ++i) {
    bool all = true;
    for (const auto& cond : rs.rules[i].conds)
      if (!condition_matches(cond, fv)) {
        all = false;
        break;
      }
    if (all) return Prediction{rs.rules[i].cls, i};
  }
  return Prediction{rs.default_class, std::nullopt};
}

inline std::vector<Prediction> predict_dataset(const RuleSet& rs, const Dataset& ds) {
  if (schema_fingerprint(ds.schema) != rs.schema_fingerprint)
    fail("schema-mismatch", "dataset schema does not match the model's fingerprint");
  auto c = detail::compile(ds);
  std::vector<std::vector<detail::ResolvedCond>> resolved;
  resolved.reserve(rs.rules.size());
  for (const auto& r : rs.rules) resolved.push_back(detail::resolve_rule(c, r.conds));
  std::vector<Prediction> out;
  out.reserve(ds.rows.size());
  for (std::size_t row = 0; row < c.nrows; ++row) {
    Prediction p{rs.default_class, std::nullopt};
    for (std::size_t i = 0; i < rs.rules.size(); ++i)
      if (detail::rule_matches(c, resolved[i], row)) {
        p = Prediction{rs.rules[i].cls, i};
        break;
      }
    out.push_back(std::move(p));
  }
  return out;
}

// ---- serialization: canonical JSON ----

inline json ruleset_to_json(const RuleSet& rs) {
  json rules = json::array();
  for (const auto& r : rs.rules) {
    json conds = json::array();
    for (const auto& cond : r.conds) {
      json cj{{"feature", cond.feature}, {"op", to_string(cond.op)}};
      if (cond.op == CondOp::le || cond.op == CondOp::ge)
        cj["threshold"] = cond.threshold;
      else
        cj["value"] = cond.value;
      conds.push_back(std::move(cj));
    }
    rules.push_back(json{
        {"class", r.cls}, {"conds", conds}, {"p", r.p}, {"n", r.n}});
  }
  return json{{"format", "ruleset"},
              {"schema", schema_to_json(rs.schema)},
              {"schema_fingerprint", rs.schema_fingerprint},
              {"class_order", rs.class_order},
              {"default_class", rs.default_class},
              {"config", config_to_json(rs.config)},
              {"rules", rules}};
}

inline std::string save_ruleset_text_canonical(const RuleSet& rs) {
  return ruleset_to_json(rs).dump(2) + "\n";
}

inline RuleSet ruleset_from_json(const json& j) {
  if (!j.contains("format") || j.at("format") != "ruleset")
    fail("bad-format", "not a ruleset record");
  RuleSet rs;
  rs.schema = schema_from_json(j.at("schema"));
  rs.schema_fingerprint = j.at("schema_fingerprint").get<std::string>();
  if (rs.schema_fingerprint != schema_fingerprint(rs.schema))
    fail("schema-mismatch", "ruleset fingerprint does not match its schema");
  rs.class_order = j.at("class_order").get<std::vector<std::string>>();
  rs.default_class = j.at("default_class").get<std::string>();
  rs.config = config_from_json(j.at("config"));
  for (const auto& rj : j.at("rules")) {
    Rule r;
    r.cls = rj.at("class").get<std::string>();
    r.p = rj.at("p").get<long long>();
    r.n = rj.at("n").get<long long>();
    for (const auto& cj : rj.at("conds")) {
      Condition cond;
      cond.feature = cj.at("feature").get<std::string>();
      cond.op = parse_op(cj.at("op").get<std::string>());
      if (cond.op == CondOp::le || cond.op == CondOp::ge)
        cond.threshold = cj.at("threshold").get<double>();
      else
        cond.value = cj.at("value").get<std::string>();
      r.conds.push_back(std::move(cond));
    }
    rs.rules.push_back(std::move(r));
  }
  return rs;
}

inline RuleSet load_ruleset_text_canonical(const std::string& text) {
  return ruleset_from_json(json::parse(text));
}

// ---- serialization: display text format ----
//
//   if (f <= 3.12) ^ (g contains "help") ^ (h = SOME-VALUE) then CLASS
//   if true then CLASS
//   default CLASS

inline std::string quote_token(const std::string& t) {
  std::string out = "\"";
  for (char ch : t) {
    if (ch == '"' || ch == '\\') out.push_back('\\');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

inline std::string render_ruleset_text(const RuleSet& rs) {
  std::string out;
  for (const auto& r : rs.rules) {
    out += "if ";
    if (r.conds.empty()) {
      out += "true";
    } else {
      for (std::size_t i = 0; i < r.conds.size(); ++i) {
        const auto& cond = r.conds[i];
        if (i) out += " ^ ";
        out += "(" + cond.feature + " ";
        switch (cond.op) {
          case CondOp::le: out += "<= " + format_double(cond.threshold); break;
          case CondOp::ge: out += ">= " + format_double(cond.threshold); break;
          case CondOp::eq: out += "= " + cond.value; break;
          case CondOp::contains: out += "contains " + quote_token(cond.value); break;
        }
        out += ")";
      }
    }
    out += " then " + r.cls + "\n";
  }
  out += "default " + rs.default_class + "\n";
  return out;
}

namespace detail {

inline void skip_ws(const std::string& s, std::size_t& i) {
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
}

inline Condition parse_condition(const std::string& s, std::size_t& i) {
  if (s[i] != '(') fail("bad-format", "expected '(' in rule text");
  ++i;
  skip_ws(s, i);
  std::size_t start = i;
  while (i < s.size() && s[i] != ' ') ++i;
  Condition cond;
  cond.feature = s.substr(start, i - start);
  skip_ws(s, i);
  start = i;
  while (i < s.size() && s[i] != ' ') ++i;
  std::string op = s.substr(start, i - start);
  skip_ws(s, i);
  if (op == "<=" || op == ">=") {
    cond.op = op == "<=" ? CondOp::le : CondOp::ge;
    start = i;
    while (i < s.size() && s[i] != ')') ++i;
    std::string numtext = s.substr(start, i - start);
    while (!numtext.empty() && numtext.back() == ' ') numtext.pop_back();
    cond.threshold = parse_double(numtext);
  } else if (op == "=") {
    cond.op = CondOp::eq;
    start = i;
    while (i < s.size() && s[i] != ')') ++i;
    std::string v = s.substr(start, i - start);
    while (!v.empty() && v.back() == ' ') v.pop_back();
    cond.value = v;
  } else if (op == "contains") {
    cond.op = CondOp::contains;
    if (i >= s.size() || s[i] != '"') fail("bad-format", "contains needs a quoted token");
    ++i;
    std::string v;
    while (i < s.size() && s[i] != '"') {
      if (s[i] == '\\' && i + 1 < s.size()) ++i;
      v.push_back(s[i++]);
    }
    if (i >= s.size()) fail("bad-format", "unterminated token quote");
    ++i;  // closing quote
    cond.value = v;
  } else {
    fail("bad-format", "unknown operator in rule text: " + op);
  }
  skip_ws(s, i);
  if (i >= s.size() || s[i] != ')') fail("bad-format", "expected ')' in rule text");
  ++i;
  return cond;
}

}  // namespace detail

inline RuleSet parse_ruleset_text(const std::string& text) {
  RuleSet rs;
  std::istringstream in(text);
  std::string line;
  bool have_default = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("default ", 0) == 0) {
      rs.default_class = line.substr(8);
      have_default = true;
      continue;
    }
    if (line.rfind("if ", 0) != 0) fail("bad-format", "rule line must start with 'if': " + line);
    std::size_t then_pos = line.rfind(" then ");
    if (then_pos == std::string::npos) fail("bad-format", "rule line without 'then': " + line);
    Rule r;
    r.cls = line.substr(then_pos + 6);
    std::string body = line.substr(3, then_pos - 3);
    if (body != "true") {
      std::size_t i = 0;
      detail::skip_ws(body, i);
      while (i < body.size()) {
        r.conds.push_back(detail::parse_condition(body, i));
        detail::skip_ws(body, i);
        if (i < body.size()) {
          if (body[i] != '^') fail("bad-format", "expected '^' between conditions");
          ++i;
          detail::skip_ws(body, i);
        }
      }
    }
    if (std::find(rs.class_order.begin(), rs.class_order.end(), r.cls) ==
        rs.class_order.end())
      rs.class_order.push_back(r.cls);
    rs.rules.push_back(std::move(r));
  }
  if (!have_default) fail("bad-format", "rule text without a default line");
  if (std::find(rs.class_order.begin(), rs.class_order.end(), rs.default_class) ==
      rs.class_order.end())
    rs.class_order.push_back(rs.default_class);
  return rs;
}

}  // namespace ripple
