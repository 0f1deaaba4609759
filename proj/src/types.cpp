#include "qbe/types.hpp"

#include <algorithm>
#include <cmath>

#include "qbe/errors.hpp"

namespace qbe::data {

FeatureSequence FeatureSequence::slice(std::uint32_t first,
                                       std::uint32_t last) const {
  std::vector<float> out(values_.begin() + static_cast<std::size_t>(first) * dim_,
                         values_.begin() + static_cast<std::size_t>(last) * dim_);
  return FeatureSequence(dim_, std::move(out));
}

bool FeatureSequence::valid() const {
  if (dim_ == 0 || values_.empty() || values_.size() % dim_ != 0) return false;
  return std::all_of(values_.begin(), values_.end(),
                     [](float v) { return std::isfinite(v); });
}

void validate(const FeatureSequence& fs, const std::string& context) {
  if (fs.dim() == 0 || fs.frame_count() == 0)
    throw UsageError(context + ": empty feature sequence");
  if (!fs.valid())
    throw UsageError(context + ": non-finite feature value");
}

void validate(const WordSegment& seg) {
  if (seg.start_frame >= seg.end_frame)
    throw UsageError("segment " + seg.recording_id + ": empty frame interval");
  validate(seg.features, "segment " + seg.recording_id);
  if (seg.features.frame_count() != seg.end_frame - seg.start_frame)
    throw UsageError("segment " + seg.recording_id +
                     ": features do not match interval length");
}

void validate(const Recording& rec) {
  validate(rec.features, "recording " + rec.id);
  std::uint32_t total = rec.features.frame_count();
  std::vector<AlignmentEntry> sorted = rec.alignments;
  std::sort(sorted.begin(), sorted.end(),
            [](const AlignmentEntry& a, const AlignmentEntry& b) {
              return a.start_frame < b.start_frame;
            });
  std::uint32_t prev_end = 0;
  for (const auto& a : sorted) {
    if (a.start_frame >= a.end_frame || a.end_frame > total)
      throw UsageError("recording " + rec.id + ": alignment outside [0, T]");
    if (a.start_frame < prev_end)
      throw UsageError("recording " + rec.id + ": overlapping alignments");
    prev_end = a.end_frame;
  }
}

std::vector<WordSegment> extract_labeled_segments(
    const std::vector<Recording>& recordings) {
  std::vector<WordSegment> out;
  for (const auto& rec : recordings) {
    validate(rec);
    for (const auto& a : rec.alignments) {
      WordSegment seg;
      seg.recording_id = rec.id;
      seg.start_frame = a.start_frame;
      seg.end_frame = a.end_frame;
      seg.label = a.label;
      seg.features = rec.features.slice(a.start_frame, a.end_frame);
      out.push_back(std::move(seg));
    }
  }
  return out;
}

}  // namespace qbe::data
