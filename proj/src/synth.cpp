#include "qbe/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "qbe/errors.hpp"
#include "qbe/rng.hpp"

namespace qbe::data {

namespace {

std::string padded(const char* prefix, std::uint32_t n) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%04u", prefix, n);
  return buf;
}

// AR(1) trajectory with unit marginal variance; smooth enough that linear
// time-warping stays close to the original path.
FeatureSequence ar1_trajectory(std::uint32_t len, std::uint32_t dim, Rng& rng) {
  constexpr double kRho = 0.8;
  const double innov = std::sqrt(1.0 - kRho * kRho);
  FeatureSequence traj(len, dim);
  for (std::uint32_t f = 0; f < dim; ++f) traj.at(0, f) = static_cast<float>(rng.next_normal());
  for (std::uint32_t t = 1; t < len; ++t)
    for (std::uint32_t f = 0; f < dim; ++f)
      traj.at(t, f) =
          static_cast<float>(kRho * traj.at(t - 1, f) + innov * rng.next_normal());
  return traj;
}

// Word prototypes are concatenations of sub-trajectories drawn from a small
// shared pool, so distinct types can share onsets or tails the way a small
// vocabulary shares phone sequences. Confusability is what separates the
// embedders under test; fully independent prototypes make every system look
// perfect.
std::vector<FeatureSequence> make_unit_pool(std::uint32_t dim, Rng& rng) {
  constexpr std::uint32_t kPoolSize = 10;
  std::vector<FeatureSequence> pool;
  pool.reserve(kPoolSize);
  for (std::uint32_t u = 0; u < kPoolSize; ++u) {
    auto len = static_cast<std::uint32_t>(rng.next_int(12, 20));
    pool.push_back(ar1_trajectory(len, dim, rng));
  }
  return pool;
}

FeatureSequence make_prototype(std::uint32_t len, std::uint32_t dim,
                               const std::vector<FeatureSequence>& pool,
                               Rng& rng) {
  std::vector<float> frames;
  while (frames.size() < static_cast<std::size_t>(len) * dim) {
    const FeatureSequence& unit =
        pool[static_cast<std::size_t>(rng.next_below(pool.size()))];
    frames.insert(frames.end(), unit.values().begin(), unit.values().end());
  }
  return resample_linear(FeatureSequence(dim, std::move(frames)), len);
}

FeatureSequence make_instance(const FeatureSequence& proto,
                              const SynthConfig& cfg, Rng& rng) {
  double warp = 1.0;
  if (cfg.warp_factor_max > 0.0)
    warp = rng.next_uniform(1.0 / (1.0 + cfg.warp_factor_max),
                            1.0 + cfg.warp_factor_max);
  auto new_len = static_cast<std::uint32_t>(std::max<long>(
      1, std::lround(warp * static_cast<double>(proto.frame_count()))));
  FeatureSequence inst = resample_linear(proto, new_len);
  if (cfg.noise_sigma > 0.0)
    for (float& v : inst.values())
      v = static_cast<float>(v + cfg.noise_sigma * rng.next_normal());
  return inst;
}

FeatureSequence make_filler(std::uint32_t len, std::uint32_t dim, double sigma,
                            Rng& rng) {
  FeatureSequence filler(len, dim);
  for (float& v : filler.values())
    v = static_cast<float>(sigma * rng.next_normal());
  return filler;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_types < 1 || examples_per_type < 1 || words_per_recording < 1)
    throw UsageError("synth: counts must be >= 1");
  if (proto_len_min < 1 || proto_len_min > proto_len_max)
    throw UsageError("synth: need 1 <= proto_len_min <= proto_len_max");
  if (filler_len_min < 1 || filler_len_min > filler_len_max)
    throw UsageError("synth: need 1 <= filler_len_min <= filler_len_max");
  if (warp_factor_max < 0.0) throw UsageError("synth: warp_factor_max < 0");
  if (noise_sigma < 0.0) throw UsageError("synth: noise_sigma < 0");
  if (feature_dim < 1) throw UsageError("synth: feature_dim < 1");
}

FeatureSequence resample_linear(const FeatureSequence& in,
                                std::uint32_t new_len) {
  const std::uint32_t t_in = in.frame_count();
  if (new_len == t_in) return in;
  const std::uint32_t dim = in.dim();
  FeatureSequence out(new_len, dim);
  for (std::uint32_t t = 0; t < new_len; ++t) {
    double src = (new_len == 1)
                     ? 0.0
                     : static_cast<double>(t) * (t_in - 1) / (new_len - 1);
    auto lo = static_cast<std::uint32_t>(src);
    double alpha = src - lo;
    std::uint32_t hi = std::min(lo + 1, t_in - 1);
    for (std::uint32_t f = 0; f < dim; ++f)
      out.at(t, f) = static_cast<float>((1.0 - alpha) * in.at(lo, f) +
                                        alpha * in.at(hi, f));
  }
  return out;
}

SynthCorpus synthesize_corpus(const SynthConfig& cfg) {
  cfg.validate();
  SynthCorpus corpus;

  Rng rng_proto(derive_seed(cfg.seed, "synth.prototypes"));
  Rng rng_train(derive_seed(cfg.seed, "synth.train"));
  Rng rng_search(derive_seed(cfg.seed, "synth.search"));
  Rng rng_query(derive_seed(cfg.seed, "synth.queries"));
  Rng rng_pack(derive_seed(cfg.seed, "synth.packing"));
  Rng rng_filler(derive_seed(cfg.seed, "synth.filler"));

  std::vector<FeatureSequence> unit_pool =
      make_unit_pool(cfg.feature_dim, rng_proto);
  std::vector<std::string> labels(cfg.n_types);
  std::vector<FeatureSequence> protos(cfg.n_types);
  for (std::uint32_t k = 0; k < cfg.n_types; ++k) {
    labels[k] = padded("w", k);
    auto len = static_cast<std::uint32_t>(
        rng_proto.next_int(cfg.proto_len_min, cfg.proto_len_max));
    protos[k] = make_prototype(len, cfg.feature_dim, unit_pool, rng_proto);
  }

  std::uint32_t train_idx = 0;
  for (std::uint32_t k = 0; k < cfg.n_types; ++k) {
    for (std::uint32_t e = 0; e < cfg.examples_per_type; ++e) {
      WordSegment seg;
      seg.recording_id = padded("train_", train_idx++);
      seg.label = labels[k];
      seg.features = make_instance(protos[k], cfg, rng_train);
      seg.start_frame = 0;
      seg.end_frame = seg.features.frame_count();
      corpus.train.push_back(std::move(seg));
    }
  }

  // Search-collection instances, shuffled, then packed into recordings with
  // filler before, between and after the words.
  std::vector<std::pair<std::uint32_t, FeatureSequence>> pool;
  for (std::uint32_t k = 0; k < cfg.n_types; ++k)
    for (std::uint32_t e = 0; e < cfg.examples_per_type; ++e)
      pool.emplace_back(k, make_instance(protos[k], cfg, rng_search));
  rng_pack.shuffle(pool);

  const double filler_sigma = std::max(cfg.noise_sigma, 0.1);
  std::uint32_t rec_idx = 0;
  for (std::size_t base = 0; base < pool.size();
       base += cfg.words_per_recording) {
    std::size_t count =
        std::min<std::size_t>(cfg.words_per_recording, pool.size() - base);
    Recording rec;
    rec.id = padded("search_", rec_idx++);
    std::vector<float> frames;
    std::uint32_t cursor = 0;
    auto append = [&](const FeatureSequence& fs) {
      frames.insert(frames.end(), fs.values().begin(), fs.values().end());
      cursor += fs.frame_count();
    };
    for (std::size_t w = 0; w < count; ++w) {
      auto filler_len = static_cast<std::uint32_t>(
          rng_pack.next_int(cfg.filler_len_min, cfg.filler_len_max));
      append(make_filler(filler_len, cfg.feature_dim, filler_sigma, rng_filler));
      const auto& [type, inst] = pool[base + w];
      std::uint32_t start = cursor;
      append(inst);
      rec.alignments.push_back({start, cursor, labels[type]});
    }
    auto tail_len = static_cast<std::uint32_t>(
        rng_pack.next_int(cfg.filler_len_min, cfg.filler_len_max));
    append(make_filler(tail_len, cfg.feature_dim, filler_sigma, rng_filler));
    rec.features = FeatureSequence(cfg.feature_dim, std::move(frames));
    corpus.recordings.push_back(std::move(rec));
  }

  std::uint32_t query_idx = 0;
  for (std::uint32_t k = 0; k < cfg.n_types; ++k) {
    for (std::uint32_t e = 0; e < cfg.examples_per_type; ++e) {
      WordSegment seg;
      seg.recording_id = padded("query_", query_idx++);
      seg.label = labels[k];
      seg.features = make_instance(protos[k], cfg, rng_query);
      seg.start_frame = 0;
      seg.end_frame = seg.features.frame_count();
      corpus.queries.push_back(std::move(seg));
    }
  }

  return corpus;
}

}  // namespace qbe::data
