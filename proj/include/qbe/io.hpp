#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "qbe/types.hpp"

namespace qbe::data {

// Feature archive, binary little-endian:
//   magic "QBE1", u32 recording count, then per recording
//   u32 id byte length, UTF-8 id, u32 T, u32 F, T*F binary32 frame-major.
void write_feature_archive(const std::vector<Recording>& recordings,
                           const std::string& path);
std::vector<Recording> read_feature_archive(const std::string& path);

void write_feature_archive(const std::vector<Recording>& recordings,
                           std::ostream& out);
std::vector<Recording> read_feature_archive(std::istream& in,
                                            const std::string& source_name);

// Alignment file, UTF-8 text. One record per line:
//   recording_id <TAB> start_frame <TAB> end_frame <TAB> label
// Lines beginning with '#' are ignored. end_frame is exclusive.
struct AlignmentRow {
  std::string recording_id;
  std::uint32_t start_frame = 0;
  std::uint32_t end_frame = 0;
  std::string label;
};

void write_alignment_file(const std::vector<AlignmentRow>& rows,
                          const std::string& path);
std::vector<AlignmentRow> read_alignment_file(const std::string& path);

// Query list, UTF-8 text: query_id <TAB> label per line, '#' comments.
// Each query_id names an archive recording whose full span is the query.
void write_query_list(const std::vector<std::pair<std::string, std::string>>& rows,
                      const std::string& path);
std::vector<std::pair<std::string, std::string>> read_query_list(
    const std::string& path);

// Attaches the rows of an alignment file to their recordings.
void apply_alignments(std::vector<Recording>& recordings,
                      const std::vector<AlignmentRow>& rows);

}  // namespace qbe::data
