#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace qbe::data {

// A T x F matrix of acoustic frames, frame-major. Entries are binary32 so a
// sequence written to an archive reads back bit-identical.
class FeatureSequence {
 public:
  FeatureSequence() = default;
  FeatureSequence(std::uint32_t frame_count, std::uint32_t dim)
      : dim_(dim), values_(static_cast<std::size_t>(frame_count) * dim, 0.0f) {}
  FeatureSequence(std::uint32_t dim, std::vector<float> values)
      : dim_(dim), values_(std::move(values)) {}

  std::uint32_t frame_count() const {
    return dim_ == 0 ? 0 : static_cast<std::uint32_t>(values_.size() / dim_);
  }
  std::uint32_t dim() const { return dim_; }

  float& at(std::uint32_t t, std::uint32_t f) {
    return values_[static_cast<std::size_t>(t) * dim_ + f];
  }
  float at(std::uint32_t t, std::uint32_t f) const {
    return values_[static_cast<std::size_t>(t) * dim_ + f];
  }
  std::span<const float> frame(std::uint32_t t) const {
    return {values_.data() + static_cast<std::size_t>(t) * dim_, dim_};
  }
  std::span<float> frame(std::uint32_t t) {
    return {values_.data() + static_cast<std::size_t>(t) * dim_, dim_};
  }

  const std::vector<float>& values() const { return values_; }
  std::vector<float>& values() { return values_; }

  // T in [first, last), all frames copied verbatim.
  FeatureSequence slice(std::uint32_t first, std::uint32_t last) const;

  // T >= 1, F >= 1, every entry finite.
  bool valid() const;

  bool operator==(const FeatureSequence&) const = default;

 private:
  std::uint32_t dim_ = 0;
  std::vector<float> values_;
};

struct AlignmentEntry {
  std::uint32_t start_frame = 0;
  std::uint32_t end_frame = 0;  // exclusive
  std::string label;

  bool operator==(const AlignmentEntry&) const = default;
};

struct WordSegment {
  std::string recording_id;
  std::uint32_t start_frame = 0;
  std::uint32_t end_frame = 0;  // exclusive
  std::string label;
  FeatureSequence features;

  bool operator==(const WordSegment&) const = default;
};

struct Recording {
  std::string id;
  FeatureSequence features;
  std::vector<AlignmentEntry> alignments;

  bool operator==(const Recording&) const = default;
};

// Throws UsageError with a description if an invariant is broken.
void validate(const FeatureSequence& fs, const std::string& context);
void validate(const WordSegment& seg);
void validate(const Recording& rec);

// One WordSegment per alignment entry; features are the exact frame slice.
std::vector<WordSegment> extract_labeled_segments(
    const std::vector<Recording>& recordings);

}  // namespace qbe::data
