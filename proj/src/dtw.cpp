#include "qbe/dtw.hpp"

#include <cmath>
#include <limits>

#include "qbe/errors.hpp"

namespace qbe::dtw {

namespace {

struct PathCost {
  double sum;
  std::uint32_t steps;

  bool operator<(const PathCost& o) const {
    if (sum != o.sum) return sum < o.sum;
    return steps < o.steps;
  }
};

constexpr PathCost kUnreachable{std::numeric_limits<double>::infinity(), 0};

}  // namespace

double frame_distance(std::span<const float> a, std::span<const float> b,
                      FrameMetric metric) {
  if (metric == FrameMetric::kSquaredEuclidean) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
      sum += d * d;
    }
    return sum;
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    na += static_cast<double>(a[i]) * static_cast<double>(a[i]);
    nb += static_cast<double>(b[i]) * static_cast<double>(b[i]);
  }
  return 1.0 - dot / ((std::sqrt(na) + 1e-12) * (std::sqrt(nb) + 1e-12));
}

double dtw_distance(const data::FeatureSequence& a,
                    const data::FeatureSequence& b, FrameMetric metric) {
  const std::uint32_t ta = a.frame_count();
  const std::uint32_t tb = b.frame_count();
  if (ta == 0 || tb == 0) throw UsageError("dtw: empty sequence");
  if (a.dim() != b.dim()) throw UsageError("dtw: feature dimension mismatch");

  // Rolling rows of (cost sum, path cell count), lexicographic minimum so the
  // normalizer is well defined under cost ties.
  std::vector<PathCost> prev(tb, kUnreachable), cur(tb, kUnreachable);
  for (std::uint32_t i = 0; i < ta; ++i) {
    std::span<const float> fa = a.frame(i);
    for (std::uint32_t j = 0; j < tb; ++j) {
      double d = frame_distance(fa, b.frame(j), metric);
      PathCost best;
      if (i == 0 && j == 0) {
        best = {0.0, 0};
      } else {
        best = kUnreachable;
        if (i > 0) best = std::min(best, prev[j]);
        if (j > 0) best = std::min(best, cur[j - 1]);
        if (i > 0 && j > 0) best = std::min(best, prev[j - 1]);
      }
      cur[j] = {best.sum + d, best.steps + 1};
    }
    std::swap(prev, cur);
  }
  const PathCost& final_cost = prev[tb - 1];
  return final_cost.sum / static_cast<double>(final_cost.steps);
}

std::vector<double> reference_vector(const data::WordSegment& segment,
                                     const TemplateSet& templates,
                                     FrameMetric metric) {
  if (templates.templates.empty())
    throw UsageError("reference_vector: empty template set");
  std::vector<double> out;
  out.reserve(templates.templates.size());
  for (const auto& tmpl : templates.templates)
    out.push_back(dtw_distance(segment.features, tmpl.features, metric));
  return out;
}

}  // namespace qbe::dtw
