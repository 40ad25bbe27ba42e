#include <catch2/catch_amalgamated.hpp>

#include <boost/math/distributions/students_t.hpp>
#include <cmath>

#include "ripple/metrics.hpp"

using namespace ripple;

namespace {

// Reference four-class confusion matrix (truth rows, predicted columns) with
// hand-checked per-class precision/recall and overall accuracy.
const std::vector<std::string> kSluClasses{"RCORRECT", "NO-RECOG", "RMISMATCH",
                                           "RPARTIAL-MATCH"};
const std::vector<std::vector<long long>> kSluCounts{
    {2784, 6, 211, 5},
    {9, 3431, 44, 0},
    {409, 83, 1204, 10},
    {6, 0, 28, 10},
};

}  // namespace

TEST_CASE("four-class confusion matrix reproduces the reference scores") {
  ConfusionMatrix cm = confusion_from_counts(kSluClasses, kSluCounts);
  CHECK(cm.total == 8240);
  CHECK(cm.row_sum(0) == 3006);
  CHECK(cm.row_sum(1) == 3484);
  CHECK(cm.row_sum(2) == 1706);
  CHECK(cm.row_sum(3) == 44);
  CHECK(cm.col_sum(0) == 3208);
  CHECK(cm.col_sum(1) == 3520);
  CHECK(cm.col_sum(2) == 1487);
  CHECK(cm.col_sum(3) == 25);

  CHECK_THAT(accuracy(cm) * 100, Catch::Matchers::WithinAbs(90.16, 0.05));

  auto pr = precision_recall(cm);
  struct Expect {
    const char* cls;
    double recall, precision;
  };
  // recall / precision in percent
  for (const Expect& e : {Expect{"RCORRECT", 92.6, 86.8},
                          Expect{"NO-RECOG", 98.5, 97.5},
                          Expect{"RMISMATCH", 70.6, 81.0},
                          Expect{"RPARTIAL-MATCH", 22.7, 40.0}}) {
    INFO(e.cls);
    REQUIRE(pr.count(e.cls) == 1);
    REQUIRE(pr[e.cls].recall.has_value());
    REQUIRE(pr[e.cls].precision.has_value());
    CHECK_THAT(*pr[e.cls].recall * 100, Catch::Matchers::WithinAbs(e.recall, 0.05));
    CHECK_THAT(*pr[e.cls].precision * 100,
               Catch::Matchers::WithinAbs(e.precision, 0.05));
  }
  CHECK(pr["RPARTIAL-MATCH"].support == 44);
}

TEST_CASE("confusion matrix construction") {
  std::vector<std::string> classes{"a", "b"};
  auto cm = confusion({"a", "a", "b", "b", "a"}, {"a", "b", "b", "b", "a"}, classes);
  CHECK(cm.total == 5);
  CHECK(cm.at(0, 0) == 2);
  CHECK(cm.at(0, 1) == 1);
  CHECK(cm.at(1, 0) == 0);
  CHECK(cm.at(1, 1) == 2);
  CHECK_THAT(accuracy(cm), Catch::Matchers::WithinAbs(0.8, 1e-12));

  SECTION("stream and counts constructions agree") {
    auto cm2 = confusion_from_counts(classes, {{2, 1}, {0, 2}});
    CHECK(cm2.counts == cm.counts);
    CHECK(cm2.total == cm.total);
  }
  SECTION("never-predicted class has empty precision") {
    auto cm3 = confusion({"a", "b"}, {"a", "a"}, classes);
    auto pr = precision_recall(cm3);
    CHECK_FALSE(pr["b"].precision.has_value());
    REQUIRE(pr["b"].recall.has_value());
    CHECK(*pr["b"].recall == 0.0);
  }
  SECTION("errors") {
    try {
      confusion({"a"}, {}, classes);
      FAIL("expected length-mismatch");
    } catch (const error& e) {
      CHECK(e.kind == "length-mismatch");
    }
    try {
      confusion({}, {}, classes);
      FAIL("expected empty");
    } catch (const error& e) {
      CHECK(e.kind == "empty");
    }
    try {
      confusion({"zzz"}, {"a"}, classes);
      FAIL("expected label-unknown");
    } catch (const error& e) {
      CHECK(e.kind == "label-unknown");
    }
  }
}

TEST_CASE("majority baseline matches the reference corpus shares") {
  SECTION("understanding labels") {
    std::vector<std::string> labels;
    auto add = [&](const char* c, int n) { labels.insert(labels.end(), n, c); };
    add("RCORRECT", 7481);
    add("RPARTIAL-MATCH", 109);
    add("RMISMATCH", 4197);
    add("NO-RECOG", 8943);
    REQUIRE(labels.size() == 20730);
    auto b = majority_baseline(labels);
    CHECK(b.cls == "NO-RECOG");
    CHECK_THAT(b.accuracy * 100, Catch::Matchers::WithinAbs(43.14, 0.05));
  }
  SECTION("dialogue outcomes") {
    std::vector<std::string> labels(582, "TASKSUCCESS");
    labels.insert(labels.end(), 867 - 582, "PROBLEMATIC");
    auto b = majority_baseline(labels);
    CHECK(b.cls == "TASKSUCCESS");
    CHECK_THAT(b.accuracy * 100, Catch::Matchers::WithinAbs(67.13, 0.05));
  }
  SECTION("ties break toward first appearance") {
    auto b = majority_baseline({"x", "y", "y", "x"});
    CHECK(b.cls == "x");
    CHECK(b.accuracy == 0.5);
  }
  SECTION("explicit class order wins ties") {
    auto b = majority_baseline({"x", "y", "y", "x"}, {"y", "x"});
    CHECK(b.cls == "y");
  }
  SECTION("empty") {
    try {
      majority_baseline({});
      FAIL("expected empty");
    } catch (const error& e) {
      CHECK(e.kind == "empty");
    }
  }
}

TEST_CASE("paired t-test matches independently computed references") {
  SECTION("identical vectors") {
    auto r = paired_t({1, 0, 1}, {1, 0, 1});
    CHECK(r.t == 0.0);
    CHECK(r.p == 1.0);
    CHECK(r.df == 2);
    CHECK_FALSE(r.degenerate);
  }
  SECTION("small-sample reference") {
    auto r = paired_t({1, 0, 1, 0}, {0, 0, 0, 0});
    CHECK(r.df == 3);
    CHECK_THAT(r.t, Catch::Matchers::WithinAbs(std::sqrt(3.0), 1e-12));
    CHECK_THAT(r.p, Catch::Matchers::WithinAbs(0.18169011, 1e-6));
    CHECK_FALSE(r.degenerate);
  }
  SECTION("large-df tail probability") {
    // Same two-sided survival computation paired_t applies, checked against
    // an independent numeric reference at t = 2.1, df = 866.
    boost::math::students_t_distribution<double> dist(866.0);
    double p = 2 * boost::math::cdf(boost::math::complement(dist, 2.1));
    CHECK_THAT(p, Catch::Matchers::WithinAbs(0.03601760, 1e-6));
    CHECK_THAT(p, Catch::Matchers::WithinAbs(0.035, 0.002));
    double p_large = 2 * boost::math::cdf(boost::math::complement(dist, 7.2));
    CHECK(p_large < 0.001);
  }
  SECTION("antisymmetry") {
    std::vector<double> a{1, 0, 1, 1, 0, 1}, b{0, 0, 1, 0, 1, 0};
    auto ab = paired_t(a, b);
    auto ba = paired_t(b, a);
    CHECK_THAT(ab.t, Catch::Matchers::WithinAbs(-ba.t, 1e-12));
    CHECK_THAT(ab.p, Catch::Matchers::WithinAbs(ba.p, 1e-12));
  }
  SECTION("constant nonzero difference is degenerate") {
    auto r = paired_t({1, 1, 1}, {0, 0, 0});
    CHECK(r.degenerate);
    CHECK(std::isinf(r.t));
    CHECK(r.t > 0);
    CHECK(r.p == 0.0);
  }
  SECTION("errors") {
    try {
      paired_t({1, 2}, {1});
      FAIL("expected length-mismatch");
    } catch (const error& e) {
      CHECK(e.kind == "length-mismatch");
    }
    try {
      paired_t({1}, {1});
      FAIL("expected too-few");
    } catch (const error& e) {
      CHECK(e.kind == "too-few");
    }
  }
}

TEST_CASE("report serialization carries the scoreboard") {
  EvalReport r;
  r.config = nlohmann::json{{"name", "demo"}};
  r.accuracy = 0.75;
  r.matrix = confusion({"a", "b", "a", "a"}, {"a", "b", "b", "a"}, {"a", "b"});
  r.pr = precision_recall(r.matrix);
  r.baseline = Baseline{"a", 0.75};
  r.ttests.push_back({"ref", paired_t({1, 0, 1, 1}, {1, 1, 0, 1})});
  auto j = report_to_json(r);
  CHECK(j["accuracy"] == 0.75);
  CHECK(j["baseline"]["class"] == "a");
  CHECK(j["classes"].size() == 2);
  CHECK(j["matrix"].size() == 2);
  CHECK(j["ttests"][0]["versus"] == "ref");
  // correctness is pairing material, not part of the report payload
  CHECK_FALSE(j.contains("correctness"));
}

TEST_CASE("percentage formatting") {
  CHECK(pct(0.901577669902913) == "90.2");
  CHECK(pct(0.5, 2) == "50.00");
}
