#include "qbe/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <ostream>
#include <set>

#include "qbe/config.hpp"
#include "qbe/errors.hpp"
#include "qbe/eval.hpp"
#include "qbe/io.hpp"
#include "qbe/parallel.hpp"
#include "qbe/pipeline.hpp"
#include "qbe/synth.hpp"

namespace qbe::cli {

namespace {

constexpr double kSecondsPerFrame = 0.01;  // 10 ms frames

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

bool has_prefix(const std::string& s, const char* prefix) {
  return s.rfind(prefix, 0) == 0;
}

data::SynthConfig synth_config(const RunConfig& cfg) {
  data::SynthConfig sc;
  sc.n_types = cfg.get_u32("synth.n_types");
  sc.examples_per_type = cfg.get_u32("synth.examples_per_type");
  sc.proto_len_min = cfg.get_u32("synth.proto_len_min");
  sc.proto_len_max = cfg.get_u32("synth.proto_len_max");
  sc.warp_factor_max = cfg.get_double("synth.warp_factor_max");
  sc.noise_sigma = cfg.get_double("synth.noise_sigma");
  sc.filler_len_min = cfg.get_u32("synth.filler_len_min");
  sc.filler_len_max = cfg.get_u32("synth.filler_len_max");
  sc.feature_dim = cfg.get_u32("synth.feature_dim");
  sc.words_per_recording = cfg.get_u32("synth.words_per_recording");
  sc.seed = cfg.get_u64("seed");
  sc.validate();
  return sc;
}

nawe::TrainConfig train_config(const RunConfig& cfg) {
  nawe::TrainConfig tc;
  tc.layers = cfg.get_u32("train.layers");
  tc.hidden = cfg.get_u32("train.hidden");
  tc.margin = cfg.get_double("train.margin");
  tc.negatives = cfg.get_u32("train.negatives");
  tc.batch_size = cfg.get_u32("train.batch_size");
  tc.learning_rate = cfg.get_double("train.learning_rate");
  tc.beta1 = cfg.get_double("train.beta1");
  tc.beta2 = cfg.get_double("train.beta2");
  tc.epsilon = cfg.get_double("train.epsilon");
  tc.dropout_p = cfg.get_double("train.dropout");
  tc.epochs = cfg.get_u32("train.epochs");
  tc.seed = derive_seed(cfg.get_u64("seed"), "cli.train");
  std::string rule = cfg.get_string("train.negative_rule");
  if (rule == "min")
    tc.negative_rule = nawe::NegativeRule::kMinDistance;
  else if (rule == "max")
    tc.negative_rule = nawe::NegativeRule::kMaxDistance;
  else
    throw UsageError("train.negative_rule must be 'min' or 'max'");
  tc.validate();
  return tc;
}

pipeline::WindowConfig window_config(const RunConfig& cfg) {
  pipeline::WindowConfig wc;
  wc.min_len = cfg.get_u32("window.min_len");
  wc.max_len = cfg.get_u32("window.max_len");
  wc.len_step = cfg.get_u32("window.len_step");
  wc.stride = cfg.get_u32("window.stride");
  wc.validate();
  return wc;
}

dtw::FrameMetric template_metric(const RunConfig& cfg) {
  std::string m = cfg.get_string("template.metric");
  if (m == "cosine") return dtw::FrameMetric::kCosine;
  if (m == "sqeuclidean") return dtw::FrameMetric::kSquaredEuclidean;
  throw UsageError("template.metric must be 'cosine' or 'sqeuclidean'");
}

lsh::ScoreMode score_mode(const RunConfig& cfg) {
  std::string m = cfg.get_string("query.score_mode");
  if (m == "exact") return lsh::ScoreMode::kExact;
  if (m == "hamming") return lsh::ScoreMode::kHamming;
  throw UsageError("query.score_mode must be 'exact' or 'hamming'");
}

struct Corpus {
  std::vector<data::Recording> train;
  std::vector<data::Recording> search;
  std::vector<data::Recording> queries;
};

Corpus load_corpus(const RunConfig& cfg, bool need_alignments) {
  auto recordings = data::read_feature_archive(cfg.require_path("paths.archive"));
  if (need_alignments) {
    auto rows = data::read_alignment_file(cfg.require_path("paths.alignments"));
    data::apply_alignments(recordings, rows);
  }
  Corpus corpus;
  for (auto& rec : recordings) {
    if (has_prefix(rec.id, "train_"))
      corpus.train.push_back(std::move(rec));
    else if (has_prefix(rec.id, "search_"))
      corpus.search.push_back(std::move(rec));
    else if (has_prefix(rec.id, "query_"))
      corpus.queries.push_back(std::move(rec));
    else
      throw FormatError("recording id '" + rec.id +
                        "' lacks a train_/search_/query_ prefix");
  }
  return corpus;
}

std::vector<data::WordSegment> load_query_segments(const RunConfig& cfg,
                                                   const Corpus& corpus) {
  auto list = data::read_query_list(cfg.require_path("paths.queries"));
  std::map<std::string, const data::Recording*> by_id;
  for (const auto& rec : corpus.queries) by_id[rec.id] = &rec;
  std::vector<data::WordSegment> out;
  out.reserve(list.size());
  for (const auto& [id, label] : list) {
    auto it = by_id.find(id);
    if (it == by_id.end())
      throw FormatError("query list references unknown recording " + id);
    data::WordSegment seg;
    seg.recording_id = id;
    seg.label = label;
    seg.start_frame = 0;
    seg.end_frame = it->second->features.frame_count();
    seg.features = it->second->features;
    out.push_back(std::move(seg));
  }
  return out;
}

std::shared_ptr<const pipeline::Embedder> make_embedder(const RunConfig& cfg,
                                                        const Corpus& corpus) {
  std::string kind = cfg.get_string("index.embedder");
  if (kind == "nawe") {
    auto params = nawe::load_model(cfg.require_path("paths.model"));
    return std::make_shared<pipeline::NaweEmbedder>(std::move(params));
  }
  if (kind == "template") {
    auto segments = data::extract_labeled_segments(corpus.train);
    std::uint32_t per_type = cfg.get_u32("template.per_type");
    if (per_type < 1) throw UsageError("template.per_type must be >= 1");
    std::map<std::string, std::uint32_t> used;
    dtw::TemplateSet templates;
    for (const auto& seg : segments)
      if (used[seg.label]++ < per_type) templates.templates.push_back(seg);
    if (templates.templates.empty())
      throw UsageError("no training segments available as templates");
    return std::make_shared<pipeline::TemplateEmbedder>(std::move(templates),
                                                        template_metric(cfg));
  }
  throw UsageError("index.embedder must be 'nawe' or 'template'");
}

// Truth intervals and counts for one query type over the search collection.
struct TruthTable {
  std::map<std::string, std::vector<pipeline::TruthInterval>> by_label;
  double search_hours = 0.0;
};

TruthTable build_truth(const Corpus& corpus) {
  TruthTable table;
  double frames = 0.0;
  for (const auto& rec : corpus.search) {
    frames += rec.features.frame_count();
    for (const auto& a : rec.alignments)
      table.by_label[a.label].push_back({rec.id, a.start_frame, a.end_frame});
  }
  table.search_hours = frames * kSecondsPerFrame / 3600.0;
  return table;
}

int cmd_synth(const RunConfig& cfg, std::ostream& out) {
  data::SynthConfig sc = synth_config(cfg);
  data::SynthCorpus corpus = data::synthesize_corpus(sc);

  std::vector<data::Recording> archive;
  std::vector<data::AlignmentRow> alignments;
  for (const auto& seg : corpus.train) {
    data::Recording rec;
    rec.id = seg.recording_id;
    rec.features = seg.features;
    rec.alignments.push_back({0, seg.features.frame_count(), seg.label});
    alignments.push_back({rec.id, 0, seg.features.frame_count(), seg.label});
    archive.push_back(std::move(rec));
  }
  for (const auto& rec : corpus.recordings) {
    for (const auto& a : rec.alignments)
      alignments.push_back({rec.id, a.start_frame, a.end_frame, a.label});
    archive.push_back(rec);
  }
  std::vector<std::pair<std::string, std::string>> query_rows;
  for (const auto& seg : corpus.queries) {
    data::Recording rec;
    rec.id = seg.recording_id;
    rec.features = seg.features;
    archive.push_back(std::move(rec));
    query_rows.emplace_back(seg.recording_id, seg.label);
  }

  data::write_feature_archive(archive, cfg.require_path("paths.archive"));
  data::write_alignment_file(alignments, cfg.require_path("paths.alignments"));
  data::write_query_list(query_rows, cfg.require_path("paths.queries"));
  out << "synth: " << corpus.train.size() << " training segments, "
      << corpus.recordings.size() << " recordings, " << corpus.queries.size()
      << " queries\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  Corpus corpus = load_corpus(cfg, true);
  auto train_set = data::extract_labeled_segments(corpus.train);
  nawe::TrainConfig tc = train_config(cfg);

  std::function<double(const nawe::EncoderParams&)> dev_metric;
  std::string dev = cfg.get_string("train.dev");
  if (dev == "queries") {
    auto dev_segments = load_query_segments(cfg, corpus);
    dev_metric = [dev_segments](const nawe::EncoderParams& params) {
      std::vector<Embedding> embs;
      embs.reserve(dev_segments.size());
      for (const auto& seg : dev_segments)
        embs.push_back(nawe::encode(params, seg.features));
      std::vector<std::pair<double, bool>> pairs;
      for (std::size_t i = 0; i < embs.size(); ++i)
        for (std::size_t j = i + 1; j < embs.size(); ++j)
          pairs.emplace_back(cosine_distance(embs[i], embs[j]),
                             dev_segments[i].label == dev_segments[j].label);
      return eval::same_different_ap(pairs);
    };
  } else if (dev != "none") {
    throw UsageError("train.dev must be 'none' or 'queries'");
  }

  auto started = Clock::now();
  nawe::TrainResult result = nawe::train(train_set, tc, dev_metric);
  nawe::save_model(result.params, cfg.require_path("paths.model"));

  std::string history_path = cfg.get_string("paths.history");
  if (!history_path.empty()) {
    std::ofstream hist(history_path);
    if (!hist) throw IoError("cannot open " + history_path + " for writing");
    hist << "# epoch\tmean_loss\tdev_score\n";
    char lossbuf[64];
    for (std::size_t e = 0; e < result.history.size(); ++e) {
      std::snprintf(lossbuf, sizeof(lossbuf), "%.17g",
                    result.history[e].mean_loss);
      hist << (e + 1) << '\t' << lossbuf << '\t';
      if (result.history[e].dev_score) {
        std::snprintf(lossbuf, sizeof(lossbuf), "%.17g",
                      *result.history[e].dev_score);
        hist << lossbuf << '\n';
      } else {
        hist << "-\n";
      }
    }
    hist.close();
    if (!hist) throw IoError("failed while writing " + history_path);
  }
  out << "train: " << tc.epochs << " epochs over " << train_set.size()
      << " segments in " << seconds_since(started) << " s\n";
  return 0;
}

int cmd_index(const RunConfig& cfg, std::ostream& out) {
  Corpus corpus = load_corpus(cfg, true);
  auto embedder = make_embedder(cfg, corpus);
  pipeline::WindowConfig wc = window_config(cfg);
  lsh::IndexConfig ic;
  ic.bits = cfg.get_u32("index.bits");
  ic.permutations = cfg.get_u32("index.permutations");
  ic.beamwidth = cfg.get_u32("query.beamwidth");
  ic.seed = cfg.get_u64("seed");
  ic.validate();

  auto started = Clock::now();
  pipeline::SearchSystem system =
      pipeline::build_system(corpus.search, embedder, wc, ic);
  double elapsed = seconds_since(started);

  write_embedding_matrix(system.embeddings, cfg.require_path("paths.embeddings"));
  lsh::save_index(system.index, cfg.require_path("paths.index"));
  pipeline::write_segment_refs(system.refs, cfg.require_path("paths.segments"));
  out << "index: " << system.refs.size() << " windows, build_seconds="
      << elapsed << "\n";
  return 0;
}

int cmd_query(const RunConfig& cfg, std::ostream& out) {
  Corpus corpus = load_corpus(cfg, true);
  auto queries = load_query_segments(cfg, corpus);

  pipeline::SearchSystem system;
  system.embedder = make_embedder(cfg, corpus);
  system.embeddings = read_embedding_matrix(cfg.require_path("paths.embeddings"));
  system.index = lsh::load_index(cfg.require_path("paths.index"));
  system.refs = pipeline::read_segment_refs(cfg.require_path("paths.segments"));
  if (system.refs.size() != system.index.item_count ||
      system.embeddings.count() != system.index.item_count)
    throw FormatError("embeddings, index and segment table disagree on size");
  if (system.embedder->dim() != system.embeddings.dim)
    throw UsageError("embedder dimension does not match stored embeddings");
  system.planes = lsh::sample_hyperplanes(
      system.embeddings.dim, system.index.bit_count,
      derive_seed(system.index.seed, "lsh.hyperplanes"));
  system.score_mode = score_mode(cfg);
  system.overlap_threshold = cfg.get_double("query.overlap_threshold");

  std::uint32_t beamwidth = cfg.get_u32("query.beamwidth");
  std::uint32_t top_k = cfg.get_u32("query.top_k");

  std::vector<pipeline::HitRow> rows;
  std::vector<double> times;
  times.reserve(queries.size());
  for (const auto& q : queries) {
    auto started = Clock::now();
    auto hits = pipeline::search(q, system, beamwidth, top_k);
    times.push_back(seconds_since(started));
    for (auto& h : hits) rows.push_back({q.recording_id, std::move(h)});
  }
  pipeline::write_hit_list(rows, cfg.require_path("paths.hits"));

  if (!times.empty()) {
    std::vector<double> sorted = times;
    std::sort(sorted.begin(), sorted.end());
    double mean = 0.0;
    for (double t : times) mean += t;
    mean /= static_cast<double>(times.size());
    double median = sorted.size() % 2 == 1
                        ? sorted[sorted.size() / 2]
                        : 0.5 * (sorted[sorted.size() / 2 - 1] +
                                 sorted[sorted.size() / 2]);
    out << "query: " << queries.size() << " queries, mean_seconds=" << mean
        << " median_seconds=" << median << "\n";
  } else {
    out << "query: 0 queries\n";
  }
  return 0;
}

int cmd_eval(const RunConfig& cfg, std::ostream& out) {
  Corpus corpus = load_corpus(cfg, true);
  auto query_list = data::read_query_list(cfg.require_path("paths.queries"));
  std::map<std::string, std::string> label_of;
  for (const auto& [id, label] : query_list) label_of[id] = label;

  std::set<std::string> known_recordings;
  for (const auto& rec : corpus.search) known_recordings.insert(rec.id);
  TruthTable truth = build_truth(corpus);

  auto hit_rows = pipeline::read_hit_list(cfg.require_path("paths.hits"));
  std::map<std::string, std::vector<pipeline::Hit>> by_query;
  for (auto& row : hit_rows) {
    if (!known_recordings.count(row.hit.ref.recording_id))
      throw FormatError("hit list references unknown recording " +
                        row.hit.ref.recording_id);
    if (!label_of.count(row.query_id))
      throw FormatError("hit list references unknown query " + row.query_id);
    by_query[row.query_id].push_back(std::move(row.hit));
  }

  std::vector<eval::QueryResult> results;
  for (const auto& [query_id, label] : query_list) {
    auto hits_it = by_query.find(query_id);
    std::vector<pipeline::Hit> hits =
        hits_it == by_query.end() ? std::vector<pipeline::Hit>{}
                                  : hits_it->second;
    std::stable_sort(hits.begin(), hits.end(),
                     [](const pipeline::Hit& a, const pipeline::Hit& b) {
                       return a.score < b.score;
                     });
    auto truth_it = truth.by_label.find(label);
    std::vector<pipeline::TruthInterval> intervals =
        truth_it == truth.by_label.end()
            ? std::vector<pipeline::TruthInterval>{}
            : truth_it->second;
    std::uint32_t n_true = pipeline::match_hits_to_truth(hits, intervals);

    eval::QueryResult qr;
    qr.query_type = label;
    qr.example_id = query_id;
    qr.n_true = n_true;
    qr.search_hours = truth.search_hours;
    qr.hits.reserve(hits.size());
    for (const auto& h : hits)
      qr.hits.push_back({h.score, h.truth == pipeline::TruthLabel::kCorrect});
    if (qr.n_true == 0)
      throw FormatError("query type " + label +
                        " has no occurrences in the search collection");
    results.push_back(std::move(qr));
  }

  eval::ReportOptions opts;
  opts.otwv_beta = cfg.get_double("eval.beta");
  eval::Report report = eval::build_report(results, opts);
  eval::write_report(report, cfg.require_path("paths.report"));
  out << "eval: " << results.size() << " query examples, "
      << report.fom.size() << " types\n";
  return 0;
}

int cmd_sweep(const RunConfig& cfg, std::ostream& out) {
  auto bits_grid = cfg.get_u32_list("sweep.bits");
  auto perm_grid = cfg.get_u32_list("sweep.permutations");
  auto beam_grid = cfg.get_u32_list("sweep.beamwidths");

  Corpus corpus = load_corpus(cfg, true);
  auto queries = load_query_segments(cfg, corpus);
  auto embedder = make_embedder(cfg, corpus);
  pipeline::WindowConfig wc = window_config(cfg);
  std::uint32_t top_k = cfg.get_u32("query.top_k");
  TruthTable truth = build_truth(corpus);
  eval::ReportOptions report_opts;
  report_opts.otwv_beta = cfg.get_double("eval.beta");

  // The collection is embedded once; (b, P) pairs rebuild only the index.
  pipeline::CollectionEmbedding collection =
      pipeline::embed_collection(corpus.search, *embedder, wc);
  if (collection.refs.empty())
    throw UsageError("sweep: no windows extracted from the collection");
  collection.embeddings.normalize_rows();

  std::ofstream main_out(cfg.require_path("paths.sweep"));
  if (!main_out) throw IoError("cannot open sweep output for writing");
  main_out << "# b\tP\tB\tfom_med\totwv_med\tp10_med\tfom_best\totwv_best\t"
              "p10_best\n";
  std::string long_path = cfg.get_string("paths.sweep_long");
  std::ofstream long_out;
  if (!long_path.empty()) {
    long_out.open(long_path);
    if (!long_out) throw IoError("cannot open " + long_path + " for writing");
    long_out << "# b\tP\tB\tmetric\taggregate\tvalue\n";
  }

  char buf[64];
  auto fmt6 = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return std::string(buf);
  };

  for (std::uint32_t b : bits_grid) {
    pipeline::SearchSystem system;
    system.embedder = embedder;
    system.embeddings = collection.embeddings;
    system.refs = collection.refs;
    system.planes = lsh::sample_hyperplanes(
        embedder->dim(), b, derive_seed(cfg.get_u64("seed"), "lsh.hyperplanes"));
    system.score_mode = score_mode(cfg);
    system.overlap_threshold = cfg.get_double("query.overlap_threshold");

    std::vector<lsh::Signature> signatures(system.embeddings.count(),
                                           lsh::Signature(b));
    parallel_for(signatures.size(), [&](std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i)
        signatures[i] = lsh::signature(
            system.embeddings.row(static_cast<std::uint32_t>(i)), system.planes);
    });

    for (std::uint32_t p : perm_grid) {
      lsh::IndexConfig ic;
      ic.bits = b;
      ic.permutations = p;
      ic.seed = cfg.get_u64("seed");
      ic.beamwidth = beam_grid.front();
      ic.validate();
      auto build_started = Clock::now();
      system.index = lsh::build_index(signatures, ic);
      double build_seconds = seconds_since(build_started);

      for (std::uint32_t beam : beam_grid) {
        std::vector<eval::QueryResult> results;
        double query_seconds = 0.0;
        for (const auto& q : queries) {
          auto started = Clock::now();
          auto hits = pipeline::search(q, system, beam, top_k);
          query_seconds += seconds_since(started);
          auto truth_it = truth.by_label.find(q.label);
          std::vector<pipeline::TruthInterval> intervals =
              truth_it == truth.by_label.end()
                  ? std::vector<pipeline::TruthInterval>{}
                  : truth_it->second;
          std::uint32_t n_true = pipeline::match_hits_to_truth(hits, intervals);
          if (n_true == 0)
            throw UsageError("sweep: query type " + q.label +
                             " is absent from the collection");
          eval::QueryResult qr;
          qr.query_type = q.label;
          qr.example_id = q.recording_id;
          qr.n_true = n_true;
          qr.search_hours = truth.search_hours;
          for (const auto& h : hits)
            qr.hits.push_back(
                {h.score, h.truth == pipeline::TruthLabel::kCorrect});
          results.push_back(std::move(qr));
        }
        eval::Report report = eval::build_report(results, report_opts);
        main_out << b << '\t' << p << '\t' << beam << '\t'
                 << fmt6(report.fom_summary.mean_of_medians) << '\t'
                 << fmt6(report.otwv_summary.mean_of_medians) << '\t'
                 << fmt6(report.p10_summary.mean_of_medians) << '\t'
                 << fmt6(report.fom_summary.mean_of_maxima) << '\t'
                 << fmt6(report.otwv_summary.mean_of_maxima) << '\t'
                 << fmt6(report.p10_summary.mean_of_maxima) << '\n';
        if (long_out.is_open()) {
          auto emit = [&](const char* metric, const eval::AggregateScores& s) {
            long_out << b << '\t' << p << '\t' << beam << '\t' << metric
                     << "\tmedian\t" << fmt6(s.mean_of_medians) << '\n';
            long_out << b << '\t' << p << '\t' << beam << '\t' << metric
                     << "\tbest\t" << fmt6(s.mean_of_maxima) << '\n';
          };
          emit("fom", report.fom_summary);
          emit("otwv", report.otwv_summary);
          emit("p_at_10", report.p10_summary);
        }
        out << "sweep b=" << b << " P=" << p << " B=" << beam
            << " build_seconds=" << build_seconds
            << " query_seconds=" << query_seconds << "\n";
      }
    }
  }
  main_out.close();
  if (!main_out) throw IoError("failed while writing sweep output");
  if (long_out.is_open()) {
    long_out.close();
    if (!long_out) throw IoError("failed while writing " + long_path);
  }
  return 0;
}

const char kUsage[] =
    "usage: qbe <command> [--config PATH] [--KEY VALUE]...\n"
    "commands: synth train index query eval sweep\n"
    "Keys are flat config names (e.g. --seed 7 --index.bits 512); values in\n"
    "a --config file use KEY=VALUE lines. Command-line overrides win.\n";

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  try {
    if (args.empty()) {
      err << kUsage;
      return 2;
    }
    const std::string& command = args[0];
    if (command == "help" || command == "--help" || command == "-h") {
      out << kUsage;
      return 0;
    }

    std::string config_path;
    std::vector<std::pair<std::string, std::string>> overrides;
    for (std::size_t i = 1; i < args.size(); ++i) {
      const std::string& a = args[i];
      if (a.rfind("--", 0) != 0)
        throw UsageError("expected --key value, got '" + a + "'");
      if (i + 1 >= args.size())
        throw UsageError("missing value for '" + a + "'");
      std::string key = a.substr(2);
      const std::string& value = args[++i];
      if (key == "config")
        config_path = value;
      else
        overrides.emplace_back(key, value);
    }
    RunConfig cfg = RunConfig::load(config_path, overrides);
    set_thread_count(cfg.get_u32("threads"));

    if (command == "synth") return cmd_synth(cfg, out);
    if (command == "train") return cmd_train(cfg, out);
    if (command == "index") return cmd_index(cfg, out);
    if (command == "query") return cmd_query(cfg, out);
    if (command == "eval") return cmd_eval(cfg, out);
    if (command == "sweep") return cmd_sweep(cfg, out);
    err << "unknown command '" << command << "'\n" << kUsage;
    return 2;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    err << "unexpected error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace qbe::cli
