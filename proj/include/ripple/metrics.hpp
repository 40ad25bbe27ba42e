#pragma once

// Evaluation: confusion matrices, per-class precision/recall, accuracy,
// majority baseline, and the paired t-test used to compare classifier
// configurations on a shared test set.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <nlohmann/json.hpp>

#include "ripple/core.hpp"

namespace ripple {

struct ConfusionMatrix {
  std::vector<std::string> classes;
  std::vector<std::vector<long long>> counts;  // counts[truth][predicted]
  long long total = 0;

  long long at(std::size_t truth, std::size_t pred) const {
    return counts[truth][pred];
  }
  long long row_sum(std::size_t truth) const {
    long long s = 0;
    for (auto c : counts[truth]) s += c;
    return s;
  }
  long long col_sum(std::size_t pred) const {
    long long s = 0;
    for (const auto& row : counts) s += row[pred];
    return s;
  }
};

inline std::size_t index_of(const std::vector<std::string>& classes,
                            const std::string& c) {
  for (std::size_t i = 0; i < classes.size(); ++i)
    if (classes[i] == c) return i;
  fail("label-unknown", "label outside class list: " + c);
}

inline ConfusionMatrix confusion(const std::vector<std::string>& truth,
                                 const std::vector<std::string>& predicted,
                                 const std::vector<std::string>& classes) {
  if (truth.size() != predicted.size())
    fail("length-mismatch", "truth and prediction lengths differ");
  if (truth.empty()) fail("empty", "no examples to score");
  ConfusionMatrix cm;
  cm.classes = classes;
  cm.counts.assign(classes.size(), std::vector<long long>(classes.size(), 0));
  for (std::size_t i = 0; i < truth.size(); ++i)
    cm.counts[index_of(classes, truth[i])][index_of(classes, predicted[i])]++;
  cm.total = static_cast<long long>(truth.size());
  return cm;
}

// Builds a matrix directly from counts (counts[truth][predicted]).
inline ConfusionMatrix confusion_from_counts(
    const std::vector<std::string>& classes,
    const std::vector<std::vector<long long>>& counts) {
  ConfusionMatrix cm;
  cm.classes = classes;
  cm.counts = counts;
  cm.total = 0;
  for (const auto& row : counts)
    for (auto c : row) cm.total += c;
  return cm;
}

struct ClassPR {
  std::optional<double> recall;     // empty when the class has no true examples
  std::optional<double> precision;  // empty when the class is never predicted
  long long support = 0;
};

inline std::map<std::string, ClassPR> precision_recall(const ConfusionMatrix& cm) {
  std::map<std::string, ClassPR> out;
  for (std::size_t i = 0; i < cm.classes.size(); ++i) {
    ClassPR pr;
    long long rs = cm.row_sum(i), cs = cm.col_sum(i);
    pr.support = rs;
    if (rs > 0) pr.recall = static_cast<double>(cm.at(i, i)) / static_cast<double>(rs);
    if (cs > 0) pr.precision = static_cast<double>(cm.at(i, i)) / static_cast<double>(cs);
    out[cm.classes[i]] = pr;
  }
  return out;
}

inline double accuracy(const ConfusionMatrix& cm) {
  if (cm.total == 0) fail("empty", "cannot compute accuracy of an empty matrix");
  long long diag = 0;
  for (std::size_t i = 0; i < cm.classes.size(); ++i) diag += cm.at(i, i);
  return static_cast<double>(diag) / static_cast<double>(cm.total);
}

struct Baseline {
  std::string cls;
  double accuracy = 0;  // frequency of `cls` in the scored labels
};

// Most frequent class and its share. Ties break toward the class seen first
// (or toward `class_order` when given).
inline Baseline majority_baseline(
    const std::vector<std::string>& labels,
    const std::vector<std::string>& class_order = {}) {
  if (labels.empty()) fail("empty", "no labels for the baseline");
  std::vector<std::string> order = class_order;
  std::map<std::string, long long> counts;
  for (const auto& l : labels) {
    if (!counts.count(l) && class_order.empty()) order.push_back(l);
    counts[l]++;
  }
  std::string best;
  long long best_count = -1;
  for (const auto& c : order) {
    auto it = counts.find(c);
    if (it == counts.end()) continue;
    if (it->second > best_count) {
      best = c;
      best_count = it->second;
    }
  }
  if (best_count < 0) fail("label-unknown", "labels not covered by class order");
  return Baseline{best, static_cast<double>(best_count) /
                            static_cast<double>(labels.size())};
}

struct TTest {
  double t = 0;
  long long df = 0;
  double p = 1;
  // All differences equal and nonzero: the comparison is certain, the
  // statistic is unbounded. t is +/-inf, p is 0, and this flag is set.
  bool degenerate = false;
};

// Paired two-sided t-test over aligned score vectors (d_i = a_i - b_i,
// sample sd, df = n-1).
inline TTest paired_t(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) fail("length-mismatch", "paired vectors differ in length");
  if (a.size() < 2) fail("too-few", "paired t-test needs at least two pairs");
  const auto n = static_cast<double>(a.size());
  double mean = 0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
  mean /= n;
  double ss = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i] - mean;
    ss += d * d;
  }
  double sd = std::sqrt(ss / (n - 1));
  TTest r;
  r.df = static_cast<long long>(a.size()) - 1;
  if (sd == 0) {
    if (mean == 0) return r;  // t = 0, p = 1
    r.degenerate = true;
    r.t = mean > 0 ? std::numeric_limits<double>::infinity()
                   : -std::numeric_limits<double>::infinity();
    r.p = 0;
    return r;
  }
  r.t = mean / (sd / std::sqrt(n));
  boost::math::students_t_distribution<double> dist(static_cast<double>(r.df));
  r.p = 2 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.t)));
  return r;
}

// ---- evaluation report ----

struct TTestEntry {
  std::string versus;  // name of the reference configuration
  TTest test;
};

struct EvalReport {
  nlohmann::json config;  // configuration echo
  double accuracy = 0;
  ConfusionMatrix matrix;
  std::map<std::string, ClassPR> pr;
  Baseline baseline;                  // majority class of train, scored on test
  std::vector<TTestEntry> ttests;     // vs the reference configuration
  std::vector<double> correctness;    // per-example 0/1, pairing material
};

inline nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json prj = nlohmann::json::object();
  for (const auto& [cls, pr] : r.pr) {
    nlohmann::json e = nlohmann::json::object();
    e["support"] = pr.support;
    if (pr.recall) e["recall"] = *pr.recall;
    if (pr.precision) e["precision"] = *pr.precision;
    prj[cls] = e;
  }
  nlohmann::json tts = nlohmann::json::array();
  for (const auto& e : r.ttests) {
    nlohmann::json t{{"versus", e.versus},
                     {"df", e.test.df},
                     {"p", e.test.p},
                     {"degenerate", e.test.degenerate}};
    if (std::isfinite(e.test.t)) t["t"] = e.test.t;
    else t["t"] = e.test.t > 0 ? "inf" : "-inf";
    tts.push_back(t);
  }
  return nlohmann::json{
      {"config", r.config},
      {"accuracy", r.accuracy},
      {"classes", r.matrix.classes},
      {"matrix", r.matrix.counts},
      {"per_class", prj},
      {"baseline", {{"class", r.baseline.cls}, {"accuracy", r.baseline.accuracy}}},
      {"ttests", tts}};
}

inline std::string pct(double fraction, int decimals = 1) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, fraction * 100.0);
  return buf;
}

// Plain-text confusion matrix with per-class recall/precision margins.
inline std::string render_confusion(const ConfusionMatrix& cm) {
  auto prs = precision_recall(cm);
  std::size_t w = 12;
  for (const auto& c : cm.classes) w = std::max(w, c.size() + 2);
  std::string out;
  auto pad = [&](const std::string& s) {
    std::string t = s;
    if (t.size() < w) t.resize(w, ' ');
    return t;
  };
  out += pad("truth\\pred");
  for (const auto& c : cm.classes) out += pad(c);
  out += pad("recall%");
  out += '\n';
  for (std::size_t i = 0; i < cm.classes.size(); ++i) {
    out += pad(cm.classes[i]);
    for (std::size_t j = 0; j < cm.classes.size(); ++j)
      out += pad(std::to_string(cm.at(i, j)));
    const auto& pr = prs[cm.classes[i]];
    out += pad(pr.recall ? pct(*pr.recall) : std::string("-"));
    out += '\n';
  }
  out += pad("precision%");
  for (const auto& c : cm.classes) {
    const auto& pr = prs[c];
    out += pad(pr.precision ? pct(*pr.precision) : std::string("-"));
  }
  out += '\n';
  out += "accuracy " + pct(accuracy(cm), 2) + "% of " + std::to_string(cm.total) + "\n";
  return out;
}

}  // namespace ripple
