#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qbe/types.hpp"

namespace qbe::dtw {

enum class FrameMetric {
  kCosine,           // 1 - dot/((|a|+1e-12)(|b|+1e-12))
  kSquaredEuclidean  // sum of squared coordinate differences
};

double frame_distance(std::span<const float> a, std::span<const float> b,
                      FrameMetric metric);

// Minimum-cost monotonic alignment with steps (1,0), (0,1), (1,1) and both
// endpoint pairs matched, normalized by the number of cells on the optimal
// path. Among equal-cost paths the shorter one defines the normalizer.
// Symmetric in (a, b).
double dtw_distance(const data::FeatureSequence& a,
                    const data::FeatureSequence& b, FrameMetric metric);

// Template set for the reference-vector embedder; the fixed template order
// defines the embedding dimension M.
struct TemplateSet {
  std::vector<data::WordSegment> templates;
};

// Component i is dtw_distance(segment, templates[i]).
std::vector<double> reference_vector(const data::WordSegment& segment,
                                     const TemplateSet& templates,
                                     FrameMetric metric);

}  // namespace qbe::dtw
