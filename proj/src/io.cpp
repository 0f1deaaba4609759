#include "qbe/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "qbe/errors.hpp"

namespace qbe::data {

namespace {

constexpr char kMagic[4] = {'Q', 'B', 'E', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in, const std::string& what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw FormatError("truncated archive while reading " + what);
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f32(std::ostream& out, float v) {
  std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
  put_u32(out, bits);
}

}  // namespace

void write_feature_archive(const std::vector<Recording>& recordings,
                           std::ostream& out) {
  for (const auto& rec : recordings) validate(rec);
  out.write(kMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(recordings.size()));
  for (const auto& rec : recordings) {
    put_u32(out, static_cast<std::uint32_t>(rec.id.size()));
    out.write(rec.id.data(), static_cast<std::streamsize>(rec.id.size()));
    put_u32(out, rec.features.frame_count());
    put_u32(out, rec.features.dim());
    const auto& values = rec.features.values();
    if constexpr (std::endian::native == std::endian::little) {
      out.write(reinterpret_cast<const char*>(values.data()),
                static_cast<std::streamsize>(values.size() * sizeof(float)));
    } else {
      for (float v : values) put_f32(out, v);
    }
  }
  if (!out) throw IoError("failed while writing feature archive");
}

void write_feature_archive(const std::vector<Recording>& recordings,
                           const std::string& path) {
  for (const auto& rec : recordings) validate(rec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_feature_archive(recordings, static_cast<std::ostream&>(out));
  out.close();
  if (!out) throw IoError("failed while writing " + path);
}

std::vector<Recording> read_feature_archive(std::istream& in,
                                            const std::string& source_name) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError(source_name + ": bad magic, not a QBE1 feature archive");
  std::uint32_t count = get_u32(in, "recording count");
  std::vector<Recording> out;
  out.reserve(count);
  for (std::uint32_t r = 0; r < count; ++r) {
    std::string ordinal = "recording " + std::to_string(r);
    std::uint32_t id_len = get_u32(in, ordinal + " id length");
    std::string id(id_len, '\0');
    if (id_len > 0 && !in.read(id.data(), id_len))
      throw FormatError(source_name + ": truncated id in " + ordinal);
    std::uint32_t t = get_u32(in, ordinal + " (" + id + ") frame count");
    std::uint32_t f = get_u32(in, ordinal + " (" + id + ") feature dim");
    if (t == 0 || f == 0)
      throw FormatError(source_name + ": empty matrix in recording " + id);
    std::vector<float> values(static_cast<std::size_t>(t) * f);
    if (!in.read(reinterpret_cast<char*>(values.data()),
                 static_cast<std::streamsize>(values.size() * sizeof(float))))
      throw FormatError(source_name + ": truncated matrix in recording " + id);
    if constexpr (std::endian::native == std::endian::big) {
      for (float& v : values) {
        std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
        bits = __builtin_bswap32(bits);
        v = std::bit_cast<float>(bits);
      }
    }
    for (float v : values)
      if (!std::isfinite(v))
        throw FormatError(source_name + ": non-finite value in recording " + id);
    Recording rec;
    rec.id = std::move(id);
    rec.features = FeatureSequence(f, std::move(values));
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<Recording> read_feature_archive(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return read_feature_archive(in, path);
}

void write_alignment_file(const std::vector<AlignmentRow>& rows,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "# recording_id\tstart_frame\tend_frame\tlabel\n";
  for (const auto& row : rows) {
    out << row.recording_id << '\t' << row.start_frame << '\t' << row.end_frame
        << '\t' << row.label << '\n';
  }
  out.close();
  if (!out) throw IoError("failed while writing " + path);
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

std::uint32_t parse_u32_field(const std::string& s, const std::string& path,
                              std::size_t line_no) {
  try {
    std::size_t pos = 0;
    unsigned long v = std::stoul(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return static_cast<std::uint32_t>(v);
  } catch (const std::exception&) {
    throw FormatError(path + ":" + std::to_string(line_no) +
                      ": expected frame index, got '" + s + "'");
  }
}

}  // namespace

std::vector<AlignmentRow> read_alignment_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<AlignmentRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_tabs(line);
    if (fields.size() != 4)
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": expected 4 tab-separated fields");
    AlignmentRow row;
    row.recording_id = fields[0];
    row.start_frame = parse_u32_field(fields[1], path, line_no);
    row.end_frame = parse_u32_field(fields[2], path, line_no);
    row.label = fields[3];
    if (row.start_frame >= row.end_frame)
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": empty or inverted frame interval");
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_query_list(
    const std::vector<std::pair<std::string, std::string>>& rows,
    const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "# query_id\tlabel\n";
  for (const auto& [id, label] : rows) out << id << '\t' << label << '\n';
  out.close();
  if (!out) throw IoError("failed while writing " + path);
}

std::vector<std::pair<std::string, std::string>> read_query_list(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::pair<std::string, std::string>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_tabs(line);
    if (fields.size() != 2)
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": expected 2 tab-separated fields");
    rows.emplace_back(fields[0], fields[1]);
  }
  return rows;
}

void apply_alignments(std::vector<Recording>& recordings,
                      const std::vector<AlignmentRow>& rows) {
  std::unordered_map<std::string, Recording*> by_id;
  for (auto& rec : recordings) by_id[rec.id] = &rec;
  for (const auto& row : rows) {
    auto it = by_id.find(row.recording_id);
    if (it == by_id.end())
      throw FormatError("alignment references unknown recording " +
                        row.recording_id);
    it->second->alignments.push_back(
        {row.start_frame, row.end_frame, row.label});
  }
  for (auto& rec : recordings) validate(rec);
}

}  // namespace qbe::data
