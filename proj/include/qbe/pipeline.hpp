#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "qbe/dtw.hpp"
#include "qbe/embedding.hpp"
#include "qbe/lsh.hpp"
#include "qbe/nawe.hpp"
#include "qbe/types.hpp"

namespace qbe::pipeline {

struct WindowConfig {
  std::uint32_t min_len = 40;
  std::uint32_t max_len = 100;
  std::uint32_t len_step = 10;
  std::uint32_t stride = 5;

  void validate() const;
};

struct SegmentRef {
  std::string recording_id;
  std::uint32_t start_frame = 0;
  std::uint32_t end_frame = 0;
  std::uint32_t embedding_id = 0;

  bool operator==(const SegmentRef&) const = default;
};

enum class TruthLabel { kUnset, kCorrect, kFalseAlarm };

struct Hit {
  SegmentRef ref;
  double score = 0.0;  // cosine distance, lower is better
  TruthLabel truth = TruthLabel::kUnset;
};

// Uniform interface over the two embedders the system compares.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::uint32_t dim() const = 0;
  virtual Embedding embed(const data::FeatureSequence& features) const = 0;
};

class NaweEmbedder : public Embedder {
 public:
  explicit NaweEmbedder(nawe::EncoderParams params)
      : params_(std::move(params)) {}
  std::uint32_t dim() const override { return params_.embedding_dim(); }
  Embedding embed(const data::FeatureSequence& features) const override {
    return nawe::encode(params_, features);
  }
  const nawe::EncoderParams& params() const { return params_; }

 private:
  nawe::EncoderParams params_;
};

// Prior-work baseline: the raw vector of DTW alignment costs to a fixed
// template set.
class TemplateEmbedder : public Embedder {
 public:
  TemplateEmbedder(dtw::TemplateSet templates, dtw::FrameMetric metric)
      : templates_(std::move(templates)), metric_(metric) {}
  std::uint32_t dim() const override {
    return static_cast<std::uint32_t>(templates_.templates.size());
  }
  Embedding embed(const data::FeatureSequence& features) const override {
    data::WordSegment seg;
    seg.features = features;
    seg.start_frame = 0;
    seg.end_frame = features.frame_count();
    return dtw::reference_vector(seg, templates_, metric_);
  }

 private:
  dtw::TemplateSet templates_;
  dtw::FrameMetric metric_;
};

// All windows of each length in {min_len, min_len+len_step, ..., max_len}
// starting at multiples of stride, enumerated start-major then length.
// embedding_id fields are left 0; embed_collection assigns them.
std::vector<SegmentRef> extract_windows(const data::Recording& recording,
                                        const WindowConfig& cfg);

// One embedding per window over every recording, in deterministic order
// (recording order, then start, then length). Fans out across windows.
struct CollectionEmbedding {
  EmbeddingMatrix embeddings;  // not normalized
  std::vector<SegmentRef> refs;
};
CollectionEmbedding embed_collection(const std::vector<data::Recording>& recordings,
                                     const Embedder& embedder,
                                     const WindowConfig& cfg);

// Greedy, score-ascending: a later hit is dropped when it lands on the same
// recording and
//   |intersection| / min(len_a, len_b) > overlap_threshold.
std::vector<Hit> suppress_overlaps(std::vector<Hit> hits,
                                   double overlap_threshold);

struct TruthInterval {
  std::string recording_id;
  std::uint32_t start_frame = 0;
  std::uint32_t end_frame = 0;
};

// Midpoint-in-interval matching with single claiming: walking hits from best
// score, a hit is correct iff its midpoint lies inside an unclaimed truth
// interval on the same recording. Returns n_true (= truth.size()).
std::uint32_t match_hits_to_truth(std::vector<Hit>& hits,
                                  const std::vector<TruthInterval>& truth);

// A built retrieval system: index over the embedded collection.
struct SearchSystem {
  std::shared_ptr<const Embedder> embedder;
  lsh::HyperplaneSet planes;
  lsh::PermutedIndex index;
  EmbeddingMatrix embeddings;  // row-normalized at build time
  std::vector<SegmentRef> refs;
  lsh::ScoreMode score_mode = lsh::ScoreMode::kExact;
  double overlap_threshold = 0.5;
};

SearchSystem build_system(const std::vector<data::Recording>& recordings,
                          std::shared_ptr<const Embedder> embedder,
                          const WindowConfig& window_cfg,
                          const lsh::IndexConfig& index_cfg);

// Embeds the query, ranks all beam candidates, suppresses overlaps and
// truncates to top_k. Hits come back with truth unset.
std::vector<Hit> search(const data::WordSegment& query,
                        const SearchSystem& system, std::uint32_t beamwidth,
                        std::uint32_t top_k);

// Segment-reference table, UTF-8 TSV:
//   embedding_id <TAB> recording_id <TAB> start_frame <TAB> end_frame
void write_segment_refs(const std::vector<SegmentRef>& refs,
                        const std::string& path);
std::vector<SegmentRef> read_segment_refs(const std::string& path);

// Hit list, UTF-8 TSV:
//   query_id <TAB> recording_id <TAB> start <TAB> end <TAB> score <TAB> truth
struct HitRow {
  std::string query_id;
  Hit hit;
};
void write_hit_list(const std::vector<HitRow>& rows, const std::string& path);
std::vector<HitRow> read_hit_list(const std::string& path);

}  // namespace qbe::pipeline
