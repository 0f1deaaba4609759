#pragma once

#include <cstdint>
#include <vector>

#include "qbe/types.hpp"

namespace qbe::data {

// Desk-scale corpus generator. Each word type gets one random prototype
// trajectory; instances are time-warped, noisy copies of it. Everything is a
// pure function of this config.
struct SynthConfig {
  std::uint32_t n_types = 20;
  std::uint32_t examples_per_type = 10;
  std::uint32_t proto_len_min = 40;
  std::uint32_t proto_len_max = 80;
  double warp_factor_max = 0.3;   // factor drawn in [1/(1+w), 1+w]
  double noise_sigma = 0.3;
  std::uint32_t filler_len_min = 30;
  std::uint32_t filler_len_max = 90;
  std::uint64_t seed = 12345;
  std::uint32_t feature_dim = 39;
  std::uint32_t words_per_recording = 8;

  void validate() const;
};

struct SynthCorpus {
  std::vector<WordSegment> train;
  std::vector<Recording> recordings;  // search collection, with alignments
  std::vector<WordSegment> queries;
};

SynthCorpus synthesize_corpus(const SynthConfig& cfg);

// Linear resampling of a sequence to new_len frames, interpolating between
// neighbouring prototype frames. new_len == T returns the input verbatim.
FeatureSequence resample_linear(const FeatureSequence& in, std::uint32_t new_len);

}  // namespace qbe::data
