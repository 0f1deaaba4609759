#include <cmath>
#include <limits>

#include "doctest.h"
#include "qbe/dtw.hpp"
#include "qbe/errors.hpp"
#include "qbe/rng.hpp"

using namespace qbe;
using namespace qbe::dtw;
using qbe::data::FeatureSequence;

namespace {

FeatureSequence seq1d(std::initializer_list<float> values) {
  return FeatureSequence(1, std::vector<float>(values));
}

FeatureSequence random_seq(std::uint32_t frames, std::uint32_t dim, Rng& rng) {
  FeatureSequence fs(frames, dim);
  for (auto& v : fs.values()) v = static_cast<float>(rng.next_normal());
  return fs;
}

// Independent oracle: explicit recursion over the full alignment lattice,
// tracking (cost sum, path cell count) with the same lexicographic tie rule.
struct OracleCost {
  double sum;
  std::uint32_t steps;
};

OracleCost oracle_cell(const FeatureSequence& a, const FeatureSequence& b,
                       FrameMetric metric, std::uint32_t i, std::uint32_t j,
                       std::vector<OracleCost>& memo,
                       std::vector<bool>& computed) {
  std::size_t idx = static_cast<std::size_t>(i) * b.frame_count() + j;
  if (computed[idx]) return memo[idx];
  double d = frame_distance(a.frame(i), b.frame(j), metric);
  OracleCost best;
  if (i == 0 && j == 0) {
    best = {0.0, 0};
  } else {
    best = {std::numeric_limits<double>::infinity(), 0};
    auto consider = [&](std::uint32_t pi, std::uint32_t pj) {
      OracleCost c = oracle_cell(a, b, metric, pi, pj, memo, computed);
      if (c.sum < best.sum || (c.sum == best.sum && c.steps < best.steps))
        best = c;
    };
    if (i > 0) consider(i - 1, j);
    if (j > 0) consider(i, j - 1);
    if (i > 0 && j > 0) consider(i - 1, j - 1);
  }
  memo[idx] = {best.sum + d, best.steps + 1};
  computed[idx] = true;
  return memo[idx];
}

double oracle_dtw(const FeatureSequence& a, const FeatureSequence& b,
                  FrameMetric metric) {
  std::vector<OracleCost> memo(
      static_cast<std::size_t>(a.frame_count()) * b.frame_count());
  std::vector<bool> computed(memo.size(), false);
  OracleCost final_cost = oracle_cell(a, b, metric, a.frame_count() - 1,
                                      b.frame_count() - 1, memo, computed);
  return final_cost.sum / final_cost.steps;
}

}  // namespace

TEST_CASE("identical sequences have zero distance") {
  Rng rng(3);
  auto a = random_seq(12, 4, rng);
  CHECK(dtw_distance(a, a, FrameMetric::kSquaredEuclidean) == 0.0);
  CHECK(dtw_distance(a, a, FrameMetric::kCosine) <= 1e-10);
}

TEST_CASE("single-frame pair reduces to the frame distance") {
  auto a = seq1d({1.5f});
  auto b = seq1d({-0.5f});
  double expect =
      frame_distance(a.frame(0), b.frame(0), FrameMetric::kSquaredEuclidean);
  CHECK(dtw_distance(a, b, FrameMetric::kSquaredEuclidean) ==
        doctest::Approx(expect).epsilon(1e-12));
  CHECK(expect == doctest::Approx(4.0));
}

TEST_CASE("worked example: (0,2) vs (0,1,2) is 1/3") {
  auto a = seq1d({0.0f, 2.0f});
  auto b = seq1d({0.0f, 1.0f, 2.0f});
  double d = dtw_distance(a, b, FrameMetric::kSquaredEuclidean);
  CHECK(d == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(oracle_dtw(a, b, FrameMetric::kSquaredEuclidean) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("matches the full-lattice oracle on small random pairs") {
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    auto ta = static_cast<std::uint32_t>(rng.next_int(1, 8));
    auto tb = static_cast<std::uint32_t>(rng.next_int(1, 8));
    if (ta * tb > 64) continue;
    auto dim = static_cast<std::uint32_t>(rng.next_int(1, 4));
    auto a = random_seq(ta, dim, rng);
    auto b = random_seq(tb, dim, rng);
    for (FrameMetric metric :
         {FrameMetric::kSquaredEuclidean, FrameMetric::kCosine}) {
      double got = dtw_distance(a, b, metric);
      double want = oracle_dtw(a, b, metric);
      CHECK(std::abs(got - want) <= 1e-12);
    }
  }
}

TEST_CASE("distance is exactly symmetric") {
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    auto a = random_seq(static_cast<std::uint32_t>(rng.next_int(1, 15)), 3, rng);
    auto b = random_seq(static_cast<std::uint32_t>(rng.next_int(1, 15)), 3, rng);
    CHECK(dtw_distance(a, b, FrameMetric::kSquaredEuclidean) ==
          dtw_distance(b, a, FrameMetric::kSquaredEuclidean));
    CHECK(dtw_distance(a, b, FrameMetric::kCosine) ==
          dtw_distance(b, a, FrameMetric::kCosine));
  }
}

TEST_CASE("dimension mismatch is rejected") {
  Rng rng(5);
  auto a = random_seq(4, 3, rng);
  auto b = random_seq(4, 2, rng);
  CHECK_THROWS_AS(dtw_distance(a, b, FrameMetric::kCosine), UsageError);
}

TEST_CASE("reference vector equals per-component DTW calls") {
  Rng rng(9);
  data::WordSegment seg;
  seg.recording_id = "seg";
  seg.features = random_seq(10, 3, rng);
  seg.start_frame = 0;
  seg.end_frame = 10;

  TemplateSet templates;
  for (int i = 0; i < 3; ++i) {
    data::WordSegment t;
    t.recording_id = "t" + std::to_string(i);
    t.features = random_seq(static_cast<std::uint32_t>(rng.next_int(4, 12)), 3, rng);
    t.start_frame = 0;
    t.end_frame = t.features.frame_count();
    templates.templates.push_back(std::move(t));
  }

  auto vec = reference_vector(seg, templates, FrameMetric::kCosine);
  REQUIRE(vec.size() == 3);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(vec[i] == dtw_distance(seg.features,
                                 templates.templates[i].features,
                                 FrameMetric::kCosine));

  SUBCASE("a segment that is its own template has component zero") {
    templates.templates[1] = seg;
    auto v2 = reference_vector(seg, templates, FrameMetric::kSquaredEuclidean);
    CHECK(v2[1] == 0.0);
  }

  SUBCASE("permuting templates permutes components") {
    TemplateSet swapped;
    swapped.templates = {templates.templates[2], templates.templates[0],
                         templates.templates[1]};
    auto v3 = reference_vector(seg, swapped, FrameMetric::kCosine);
    CHECK(v3[0] == vec[2]);
    CHECK(v3[1] == vec[0]);
    CHECK(v3[2] == vec[1]);
  }

  SUBCASE("seven templates give a seven-dimensional embedding") {
    TemplateSet seven;
    for (int i = 0; i < 7; ++i) seven.templates.push_back(templates.templates[0]);
    CHECK(reference_vector(seg, seven, FrameMetric::kCosine).size() == 7);
  }
}
