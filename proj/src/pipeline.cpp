#include "qbe/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>

#include "qbe/errors.hpp"
#include "qbe/parallel.hpp"

namespace qbe::pipeline {

void WindowConfig::validate() const {
  if (min_len < 1 || min_len > max_len)
    throw UsageError("window: need 1 <= min_len <= max_len");
  if (len_step < 1 || stride < 1)
    throw UsageError("window: len_step and stride must be >= 1");
}

std::vector<SegmentRef> extract_windows(const data::Recording& recording,
                                        const WindowConfig& cfg) {
  cfg.validate();
  const std::uint32_t total = recording.features.frame_count();
  std::vector<SegmentRef> out;
  for (std::uint32_t start = 0; start + cfg.min_len <= total;
       start += cfg.stride) {
    for (std::uint32_t len = cfg.min_len; len <= cfg.max_len;
         len += cfg.len_step) {
      if (start + len > total) break;
      out.push_back({recording.id, start, start + len, 0});
    }
  }
  return out;
}

CollectionEmbedding embed_collection(
    const std::vector<data::Recording>& recordings, const Embedder& embedder,
    const WindowConfig& cfg) {
  CollectionEmbedding result;
  result.embeddings.dim = embedder.dim();
  std::vector<const data::Recording*> owners;
  for (const auto& rec : recordings) {
    auto windows = extract_windows(rec, cfg);
    for (auto& w : windows) {
      w.embedding_id = static_cast<std::uint32_t>(result.refs.size());
      result.refs.push_back(std::move(w));
      owners.push_back(&rec);
    }
  }
  result.embeddings.values.resize(static_cast<std::size_t>(result.refs.size()) *
                                  embedder.dim());
  parallel_for(result.refs.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const SegmentRef& ref = result.refs[i];
      data::FeatureSequence window =
          owners[i]->features.slice(ref.start_frame, ref.end_frame);
      Embedding e = embedder.embed(window);
      std::copy(e.begin(), e.end(),
                result.embeddings.values.begin() +
                    static_cast<std::size_t>(i) * embedder.dim());
    }
  });
  return result;
}

std::vector<Hit> suppress_overlaps(std::vector<Hit> hits,
                                   double overlap_threshold) {
  std::vector<Hit> kept;
  for (auto& hit : hits) {
    bool drop = false;
    for (const auto& k : kept) {
      if (k.ref.recording_id != hit.ref.recording_id) continue;
      std::uint32_t lo = std::max(k.ref.start_frame, hit.ref.start_frame);
      std::uint32_t hi = std::min(k.ref.end_frame, hit.ref.end_frame);
      if (hi <= lo) continue;
      std::uint32_t shorter = std::min(k.ref.end_frame - k.ref.start_frame,
                                       hit.ref.end_frame - hit.ref.start_frame);
      if (static_cast<double>(hi - lo) / shorter > overlap_threshold) {
        drop = true;
        break;
      }
    }
    if (!drop) kept.push_back(std::move(hit));
  }
  return kept;
}

std::uint32_t match_hits_to_truth(std::vector<Hit>& hits,
                                  const std::vector<TruthInterval>& truth) {
  std::vector<bool> claimed(truth.size(), false);
  for (auto& hit : hits) {
    double mid = (static_cast<double>(hit.ref.start_frame) +
                  static_cast<double>(hit.ref.end_frame)) /
                 2.0;
    hit.truth = TruthLabel::kFalseAlarm;
    for (std::size_t t = 0; t < truth.size(); ++t) {
      if (claimed[t]) continue;
      if (truth[t].recording_id != hit.ref.recording_id) continue;
      if (mid >= truth[t].start_frame && mid < truth[t].end_frame) {
        claimed[t] = true;
        hit.truth = TruthLabel::kCorrect;
        break;
      }
    }
  }
  return static_cast<std::uint32_t>(truth.size());
}

SearchSystem build_system(const std::vector<data::Recording>& recordings,
                          std::shared_ptr<const Embedder> embedder,
                          const WindowConfig& window_cfg,
                          const lsh::IndexConfig& index_cfg) {
  SearchSystem system;
  system.embedder = embedder;
  CollectionEmbedding collection =
      embed_collection(recordings, *embedder, window_cfg);
  system.embeddings = std::move(collection.embeddings);
  system.refs = std::move(collection.refs);
  if (system.refs.empty())
    throw UsageError("build_system: no windows extracted from the collection");
  system.embeddings.normalize_rows();
  system.planes = lsh::sample_hyperplanes(
      embedder->dim(), index_cfg.bits,
      derive_seed(index_cfg.seed, "lsh.hyperplanes"));

  std::vector<lsh::Signature> signatures(system.embeddings.count(),
                                         lsh::Signature(index_cfg.bits));
  parallel_for(signatures.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i)
      signatures[i] = lsh::signature(
          system.embeddings.row(static_cast<std::uint32_t>(i)), system.planes);
  });
  system.index = lsh::build_index(signatures, index_cfg);
  return system;
}

std::vector<Hit> search(const data::WordSegment& query,
                        const SearchSystem& system, std::uint32_t beamwidth,
                        std::uint32_t top_k) {
  Embedding q = system.embedder->embed(query.features);
  lsh::QueryOptions opts;
  opts.beamwidth = beamwidth;
  // Rank every beam candidate; truncation happens after overlap suppression.
  opts.top_k = std::numeric_limits<std::uint32_t>::max();
  opts.mode = system.score_mode;
  auto ranked = lsh::query(system.index, system.embeddings, system.planes, q, opts);

  // Greedy overlap suppression over the full ranking, stopping as soon as
  // top_k hits survive (later candidates cannot change the kept prefix).
  std::vector<Hit> kept;
  for (const auto& r : ranked) {
    Hit hit{system.refs[r.id], r.distance, TruthLabel::kUnset};
    bool drop = false;
    for (const auto& k : kept) {
      if (k.ref.recording_id != hit.ref.recording_id) continue;
      std::uint32_t lo = std::max(k.ref.start_frame, hit.ref.start_frame);
      std::uint32_t hi = std::min(k.ref.end_frame, hit.ref.end_frame);
      if (hi <= lo) continue;
      std::uint32_t shorter = std::min(k.ref.end_frame - k.ref.start_frame,
                                       hit.ref.end_frame - hit.ref.start_frame);
      if (static_cast<double>(hi - lo) / shorter > system.overlap_threshold) {
        drop = true;
        break;
      }
    }
    if (!drop) {
      kept.push_back(std::move(hit));
      if (kept.size() >= top_k) break;
    }
  }
  return kept;
}

namespace {

const char* truth_name(TruthLabel label) {
  switch (label) {
    case TruthLabel::kCorrect:
      return "correct";
    case TruthLabel::kFalseAlarm:
      return "false_alarm";
    default:
      return "unset";
  }
}

TruthLabel truth_from_name(const std::string& s, const std::string& path,
                           std::size_t line_no) {
  if (s == "correct") return TruthLabel::kCorrect;
  if (s == "false_alarm") return TruthLabel::kFalseAlarm;
  if (s == "unset") return TruthLabel::kUnset;
  throw FormatError(path + ":" + std::to_string(line_no) +
                    ": unknown truth label '" + s + "'");
}

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

std::uint32_t parse_u32(const std::string& s, const std::string& path,
                        std::size_t line_no) {
  try {
    std::size_t pos = 0;
    unsigned long v = std::stoul(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return static_cast<std::uint32_t>(v);
  } catch (const std::exception&) {
    throw FormatError(path + ":" + std::to_string(line_no) +
                      ": bad integer field '" + s + "'");
  }
}

double parse_double(const std::string& s, const std::string& path,
                    std::size_t line_no) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError(path + ":" + std::to_string(line_no) +
                      ": bad numeric field '" + s + "'");
  }
}

}  // namespace

void write_segment_refs(const std::vector<SegmentRef>& refs,
                        const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "# embedding_id\trecording_id\tstart_frame\tend_frame\n";
  for (const auto& r : refs)
    out << r.embedding_id << '\t' << r.recording_id << '\t' << r.start_frame
        << '\t' << r.end_frame << '\n';
  out.close();
  if (!out) throw IoError("failed while writing " + path);
}

std::vector<SegmentRef> read_segment_refs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<SegmentRef> refs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_tabs(line);
    if (fields.size() != 4)
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": expected 4 tab-separated fields");
    SegmentRef ref;
    ref.embedding_id = parse_u32(fields[0], path, line_no);
    ref.recording_id = fields[1];
    ref.start_frame = parse_u32(fields[2], path, line_no);
    ref.end_frame = parse_u32(fields[3], path, line_no);
    refs.push_back(std::move(ref));
  }
  return refs;
}

void write_hit_list(const std::vector<HitRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "# query_id\trecording_id\tstart_frame\tend_frame\tscore\ttruth\n";
  char score[64];
  for (const auto& row : rows) {
    std::snprintf(score, sizeof(score), "%.17g", row.hit.score);
    out << row.query_id << '\t' << row.hit.ref.recording_id << '\t'
        << row.hit.ref.start_frame << '\t' << row.hit.ref.end_frame << '\t'
        << score << '\t' << truth_name(row.hit.truth) << '\n';
  }
  out.close();
  if (!out) throw IoError("failed while writing " + path);
}

std::vector<HitRow> read_hit_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<HitRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_tabs(line);
    if (fields.size() != 6)
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": expected 6 tab-separated fields");
    HitRow row;
    row.query_id = fields[0];
    row.hit.ref.recording_id = fields[1];
    row.hit.ref.start_frame = parse_u32(fields[2], path, line_no);
    row.hit.ref.end_frame = parse_u32(fields[3], path, line_no);
    row.hit.score = parse_double(fields[4], path, line_no);
    row.hit.truth = truth_from_name(fields[5], path, line_no);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace qbe::pipeline
