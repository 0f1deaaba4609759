#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "qbe/errors.hpp"
#include "qbe/eval.hpp"
#include "qbe/rng.hpp"

using namespace qbe;
using namespace qbe::eval;

namespace {

QueryResult make_result(std::vector<bool> truth_sequence, std::uint32_t n_true,
                        double hours) {
  QueryResult r;
  r.query_type = "w";
  r.example_id = "q";
  r.n_true = n_true;
  r.search_hours = hours;
  for (std::size_t i = 0; i < truth_sequence.size(); ++i)
    r.hits.push_back({0.1 * static_cast<double>(i + 1), truth_sequence[i]});
  return r;
}

// Definitional oracles, written as straight replays of the metric text.

double oracle_fom(const QueryResult& r) {
  double total = 0.0;
  for (int a = 1; a <= 10; ++a) {
    auto allowed = static_cast<long>(std::floor(a * r.search_hours));
    long fa = 0;
    long correct = 0;
    for (const auto& h : r.hits) {
      if (!h.correct) {
        ++fa;
        if (fa == allowed + 1) break;
      } else {
        ++correct;
      }
    }
    total += static_cast<double>(correct) / r.n_true;
  }
  return 100.0 * total / 10.0;
}

double oracle_otwv(const QueryResult& r, double beta) {
  double trials = std::max(
      1.0, std::floor(3600.0 * r.search_hours) - static_cast<double>(r.n_true));
  std::vector<double> thresholds;
  for (const auto& h : r.hits) thresholds.push_back(h.score);
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());
  double best = 0.0;  // accept-nothing threshold
  for (double theta : thresholds) {
    double correct = 0.0, fa = 0.0;
    for (const auto& h : r.hits) {
      if (h.score > theta) continue;
      if (h.correct)
        correct += 1.0;
      else
        fa += 1.0;
    }
    best = std::max(best, correct / r.n_true - beta * fa / trials);
  }
  return best;
}

double oracle_p10(const QueryResult& r) {
  double correct = 0.0;
  for (std::size_t i = 0; i < r.hits.size() && i < 10; ++i)
    if (r.hits[i].correct) correct += 1.0;
  return correct / 10.0;
}

double oracle_ap(const std::vector<std::pair<double, bool>>& pairs) {
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return pairs[a].first < pairs[b].first;
                   });
  double same_seen = 0.0, sum = 0.0;
  for (std::size_t rank = 0; rank < order.size(); ++rank)
    if (pairs[order[rank]].second) {
      same_seen += 1.0;
      sum += same_seen / static_cast<double>(rank + 1);
    }
  return sum / same_seen;
}

}  // namespace

TEST_CASE("precision at 10 examples") {
  CHECK(precision_at_10(make_result(
            {true, true, true, true, true, true, false, false, false, false},
            10, 1.0)) == doctest::Approx(0.6));
  CHECK(precision_at_10(make_result({}, 3, 1.0)) == 0.0);
  CHECK(precision_at_10(make_result({true, true, true, true}, 4, 1.0)) ==
        doctest::Approx(0.4));
}

TEST_CASE("figure of merit examples") {
  SUBCASE("perfect retrieval scores 100") {
    CHECK(figure_of_merit(make_result({true, true, true}, 3, 1.0)) ==
          doctest::Approx(100.0));
  }
  SUBCASE("no correct hits scores 0") {
    CHECK(figure_of_merit(make_result({false, false}, 2, 1.0)) == 0.0);
  }
  SUBCASE("worked sequence C F C F F C at one hour") {
    auto r = make_result({true, false, true, false, false, true}, 4, 1.0);
    double got = figure_of_merit(r);
    CHECK(got == doctest::Approx(oracle_fom(r)).epsilon(1e-12));
    CHECK(got == doctest::Approx(70.0).epsilon(1e-12));
  }
  SUBCASE("n_true = 0 is an error") {
    CHECK_THROWS_AS(figure_of_merit(make_result({true}, 0, 1.0)), UsageError);
  }
}

TEST_CASE("otwv examples") {
  SUBCASE("perfect system reaches 1") {
    CHECK(otwv(make_result({true, true, false}, 2, 1.0)) ==
          doctest::Approx(1.0));
  }
  SUBCASE("zero correct hits gives 0 (accept nothing)") {
    CHECK(otwv(make_result({false, false, false}, 2, 1.0)) == 0.0);
  }
  SUBCASE("two truths, hits C F C, matches the threshold sweep oracle") {
    auto r = make_result({true, false, true}, 2, 1.0);
    double got = otwv(r, 999.9);
    CHECK(got == doctest::Approx(oracle_otwv(r, 999.9)).epsilon(1e-12));
    // Best threshold accepts everything: 1 - 999.9 / 3598.
    CHECK(got == doctest::Approx(1.0 - 999.9 / 3598.0).epsilon(1e-12));
  }
}

TEST_CASE("aggregate medians and maxima") {
  SUBCASE("single type, single example") {
    auto agg = aggregate({{"w", {0.7}}});
    CHECK(agg.mean_of_medians == 0.7);
    CHECK(agg.mean_of_maxima == 0.7);
  }
  SUBCASE("even count takes the mean of the middle two") {
    auto agg = aggregate({{"w", {0.2, 0.8}}});
    CHECK(agg.mean_of_medians == doctest::Approx(0.5));
    CHECK(agg.mean_of_maxima == doctest::Approx(0.8));
  }
  SUBCASE("three types: hand-computed means") {
    std::map<std::string, std::vector<double>> scores = {
        {"a", {0.1, 0.5, 0.9}}, {"b", {1.0}}, {"c", {0.0, 0.4}}};
    auto agg = aggregate(scores);
    CHECK(agg.mean_of_medians == doctest::Approx((0.5 + 1.0 + 0.2) / 3.0));
    CHECK(agg.mean_of_maxima == doctest::Approx((0.9 + 1.0 + 0.4) / 3.0));
  }
  SUBCASE("permutation of examples does not matter") {
    auto a = aggregate({{"w", {0.3, 0.9, 0.1, 0.5}}});
    auto b = aggregate({{"w", {0.9, 0.1, 0.5, 0.3}}});
    CHECK(a.mean_of_medians == b.mean_of_medians);
    CHECK(a.mean_of_maxima == b.mean_of_maxima);
  }
  SUBCASE("empty type is an error") {
    CHECK_THROWS_AS(aggregate({{"w", {}}}), UsageError);
  }
}

TEST_CASE("same/different average precision") {
  SUBCASE("perfect separation gives 1") {
    CHECK(same_different_ap({{0.1, true}, {0.2, true}, {0.5, false},
                             {0.9, false}}) == doctest::Approx(1.0));
  }
  SUBCASE("worked example 5/6") {
    CHECK(same_different_ap({{0.1, true}, {0.2, false}, {0.3, true}}) ==
          doctest::Approx(5.0 / 6.0).epsilon(1e-12));
  }
  SUBCASE("anti-separation follows the closed form") {
    // All different pairs strictly closer than all same pairs.
    std::vector<std::pair<double, bool>> pairs;
    const int n_diff = 7, n_same = 4;
    for (int i = 0; i < n_diff; ++i) pairs.push_back({0.1 * (i + 1), false});
    for (int i = 0; i < n_same; ++i) pairs.push_back({1.0 + 0.1 * i, true});
    double expect = 0.0;
    for (int i = 1; i <= n_same; ++i)
      expect += static_cast<double>(i) / (i + n_diff);
    expect /= n_same;
    CHECK(same_different_ap(pairs) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(same_different_ap(pairs) ==
          doctest::Approx(oracle_ap(pairs)).epsilon(1e-12));
  }
  SUBCASE("no same pairs is an error") {
    CHECK_THROWS_AS(same_different_ap({{0.5, false}}), UsageError);
  }
}

TEST_CASE("metrics match their definitional oracles on random inputs") {
  Rng rng(20230901);
  for (int trial = 0; trial < 50; ++trial) {
    QueryResult r;
    r.query_type = "w";
    r.example_id = "q";
    r.n_true = static_cast<std::uint32_t>(rng.next_int(1, 10));
    r.search_hours = rng.next_uniform(0.05, 3.0);
    auto hits = static_cast<std::uint32_t>(rng.next_int(0, 50));
    std::uint32_t correct_budget = r.n_true;
    double score = 0.0;
    for (std::uint32_t i = 0; i < hits; ++i) {
      score += rng.next_uniform(0.0, 0.05);  // allows duplicate scores
      bool correct = correct_budget > 0 && rng.next_double() < 0.3;
      if (correct) --correct_budget;
      r.hits.push_back({score, correct});
    }
    CHECK(std::abs(figure_of_merit(r) - oracle_fom(r)) <= 1e-12);
    CHECK(std::abs(otwv(r, 999.9) - oracle_otwv(r, 999.9)) <= 1e-12);
    CHECK(std::abs(precision_at_10(r) - oracle_p10(r)) <= 1e-12);
  }
}

TEST_CASE("metrics depend only on score order") {
  auto r = make_result({true, false, true, false, true}, 5, 0.8);
  QueryResult warped = r;
  for (auto& h : warped.hits) h.score = std::exp(3.0 * h.score) - 1.0;
  CHECK(figure_of_merit(r) == figure_of_merit(warped));
  CHECK(otwv(r) == doctest::Approx(otwv(warped)).epsilon(1e-12));
  CHECK(precision_at_10(r) == precision_at_10(warped));
}

TEST_CASE("relabeling a false alarm as correct never hurts") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    auto hits = static_cast<std::uint32_t>(rng.next_int(3, 20));
    std::vector<bool> seq(hits);
    for (auto&& b : seq) b = rng.next_double() < 0.4;
    auto n_true = static_cast<std::uint32_t>(hits + 2);
    auto r = make_result(seq, n_true, 1.3);
    std::size_t flip = 0;
    bool has_fa = false;
    for (std::size_t i = 0; i < seq.size(); ++i)
      if (!seq[i]) {
        flip = i;
        has_fa = true;
        break;
      }
    if (!has_fa) continue;
    QueryResult improved = r;
    improved.hits[flip].correct = true;
    CHECK(figure_of_merit(improved) >= figure_of_merit(r));
    CHECK(otwv(improved) >= otwv(r));
  }
}

TEST_CASE("report writer emits per-type rows and the summary") {
  std::vector<QueryResult> results;
  results.push_back(make_result({true, true}, 2, 1.0));
  results.back().query_type = "alpha";
  results.push_back(make_result({false, true}, 2, 1.0));
  results.back().query_type = "beta";
  ReportOptions opts;
  Report report = build_report(results, opts);
  CHECK(report.fom.size() == 2);
  CHECK(report.p10_summary.mean_of_medians ==
        doctest::Approx((0.2 + 0.1) / 2.0));
}
