#include "qbe/lsh.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "qbe/errors.hpp"
#include "qbe/parallel.hpp"
#include "qbe/rng.hpp"

namespace qbe::lsh {

namespace {

constexpr double kPi = 3.14159265358979323846;

int compare_keys(const std::uint64_t* a, const std::uint64_t* b,
                 std::uint32_t words) {
  for (std::uint32_t w = 0; w < words; ++w) {
    if (a[w] != b[w]) return a[w] < b[w] ? -1 : 1;
  }
  return 0;
}

Signature permute(const Signature& s, const std::vector<std::uint32_t>& pi) {
  Signature out(s.bit_count);
  for (std::uint32_t i = 0; i < s.bit_count; ++i)
    if (s.get(pi[i])) out.set(i, true);
  return out;
}

// First position whose key is >= the probe (insertion position).
std::uint32_t lower_bound_key(const PermutedIndex::SortedList& list,
                              const std::uint64_t* key, std::uint32_t words) {
  std::uint32_t lo = 0;
  auto hi = static_cast<std::uint32_t>(list.ids.size());
  while (lo < hi) {
    std::uint32_t mid = lo + (hi - lo) / 2;
    if (compare_keys(list.keys.data() + static_cast<std::size_t>(mid) * words,
                     key, words) < 0)
      lo = mid + 1;
    else
      hi = mid;
  }
  return lo;
}

}  // namespace

HyperplaneSet sample_hyperplanes(std::uint32_t dim, std::uint32_t bits,
                                 std::uint64_t seed) {
  if (dim < 1 || bits < 1)
    throw UsageError("sample_hyperplanes: dim and bits must be >= 1");
  HyperplaneSet planes;
  planes.bits = bits;
  planes.dim = dim;
  planes.seed = seed;
  planes.values.resize(static_cast<std::size_t>(bits) * dim);
  Rng rng(seed);
  for (auto& v : planes.values) v = rng.next_normal();
  return planes;
}

Signature signature(std::span<const double> x, const HyperplaneSet& planes) {
  if (x.size() != planes.dim)
    throw UsageError("signature: embedding dim does not match hyperplanes");
  double norm2 = 0.0;
  for (double v : x) norm2 += v * v;
  if (norm2 == 0.0) throw NumericError("signature: zero vector");
  Signature s(planes.bits);
  for (std::uint32_t i = 0; i < planes.bits; ++i) {
    auto r = planes.row(i);
    double d = 0.0;
    for (std::uint32_t j = 0; j < planes.dim; ++j) d += r[j] * x[j];
    if (d >= 0.0) s.set(i, true);  // tie at 0 maps to 1
  }
  return s;
}

std::uint32_t hamming_distance(const Signature& a, const Signature& b) {
  if (a.bit_count != b.bit_count)
    throw UsageError("hamming_distance: signature length mismatch");
  std::uint32_t h = 0;
  for (std::size_t w = 0; w < a.words.size(); ++w)
    h += static_cast<std::uint32_t>(std::popcount(a.words[w] ^ b.words[w]));
  return h;
}

double approx_cosine_distance(const Signature& a, const Signature& b) {
  std::uint32_t h = hamming_distance(a, b);
  double theta = kPi * static_cast<double>(h) / static_cast<double>(a.bit_count);
  return 1.0 - std::cos(theta);
}

void IndexConfig::validate() const {
  if (bits < 128 || bits > 4096)
    throw UsageError("index: bits must lie in [128, 4096]");
  if (permutations < 1) throw UsageError("index: permutations must be >= 1");
  if (beamwidth < 1) throw UsageError("index: beamwidth must be >= 1");
}

Signature PermutedIndex::item_signature(std::uint32_t id) const {
  const SortedList& identity = lists[0];
  std::uint32_t pos = identity_pos_[id];
  Signature s(bit_count);
  std::memcpy(s.words.data(),
              identity.keys.data() +
                  static_cast<std::size_t>(pos) * words_per_signature(),
              words_per_signature() * sizeof(std::uint64_t));
  return s;
}

void PermutedIndex::rebuild_identity_positions() {
  identity_pos_.assign(item_count, 0);
  const auto& ids = lists[0].ids;
  for (std::uint32_t pos = 0; pos < ids.size(); ++pos)
    identity_pos_[ids[pos]] = pos;
}

PermutedIndex build_index(const std::vector<Signature>& signatures,
                          const IndexConfig& cfg) {
  if (signatures.empty()) throw UsageError("build_index: no signatures");
  if (cfg.bits < 1 || cfg.permutations < 1)
    throw UsageError("build_index: bits and permutations must be >= 1");
  for (const auto& s : signatures)
    if (s.bit_count != cfg.bits)
      throw UsageError("build_index: inconsistent signature length");

  PermutedIndex index;
  index.bit_count = cfg.bits;
  index.perm_count = cfg.permutations;
  index.item_count = static_cast<std::uint32_t>(signatures.size());
  index.seed = cfg.seed;

  index.permutations.resize(cfg.permutations);
  for (std::uint32_t p = 0; p < cfg.permutations; ++p) {
    auto& pi = index.permutations[p];
    pi.resize(cfg.bits);
    std::iota(pi.begin(), pi.end(), 0u);
    if (p > 0) {
      // Depends only on (seed, p): extending P preserves earlier lists.
      Rng rng(derive_seed(cfg.seed, "lsh.permutation", p));
      rng.shuffle(pi);
    }
  }

  const std::uint32_t words = index.words_per_signature();
  const std::uint32_t n = index.item_count;
  index.lists.resize(cfg.permutations);
  parallel_for(cfg.permutations, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) {
      std::vector<std::uint64_t> keys(static_cast<std::size_t>(n) * words);
      for (std::uint32_t i = 0; i < n; ++i) {
        Signature perm_sig = p == 0 ? signatures[i]
                                    : permute(signatures[i],
                                              index.permutations[p]);
        std::memcpy(keys.data() + static_cast<std::size_t>(i) * words,
                    perm_sig.words.data(), words * sizeof(std::uint64_t));
      }
      std::vector<std::uint32_t> order(n);
      std::iota(order.begin(), order.end(), 0u);
      std::sort(order.begin(), order.end(),
                [&](std::uint32_t a, std::uint32_t b) {
                  int c = compare_keys(
                      keys.data() + static_cast<std::size_t>(a) * words,
                      keys.data() + static_cast<std::size_t>(b) * words, words);
                  if (c != 0) return c < 0;
                  return a < b;  // duplicate signatures: ascending item id
                });
      auto& list = index.lists[p];
      list.ids = order;
      list.keys.resize(static_cast<std::size_t>(n) * words);
      for (std::uint32_t pos = 0; pos < n; ++pos)
        std::memcpy(list.keys.data() + static_cast<std::size_t>(pos) * words,
                    keys.data() + static_cast<std::size_t>(order[pos]) * words,
                    words * sizeof(std::uint64_t));
    }
  });

  index.rebuild_identity_positions();
  return index;
}

std::vector<std::uint32_t> beam_lookup(const PermutedIndex& index,
                                       const Signature& s,
                                       std::uint32_t beamwidth) {
  if (s.bit_count != index.bit_count)
    throw UsageError("beam_lookup: signature length mismatch");
  const std::uint32_t words = index.words_per_signature();
  const std::uint32_t n = index.item_count;
  std::vector<std::uint32_t> candidates;
  candidates.reserve(std::min<std::size_t>(static_cast<std::size_t>(2) * beamwidth,
                                           n) *
                     index.perm_count);
  for (std::uint32_t p = 0; p < index.perm_count; ++p) {
    Signature probe = p == 0 ? s : permute(s, index.permutations[p]);
    const auto& list = index.lists[p];
    std::uint32_t pos = lower_bound_key(list, probe.words.data(), words);
    std::uint32_t first = pos > beamwidth ? pos - beamwidth : 0;
    std::uint32_t last = std::min(n, pos + beamwidth);
    for (std::uint32_t i = first; i < last; ++i)
      candidates.push_back(list.ids[i]);
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()),
                   candidates.end());
  return candidates;
}

std::vector<QueryHit> query(const PermutedIndex& index,
                            const EmbeddingMatrix& embeddings,
                            const HyperplaneSet& planes,
                            std::span<const double> q,
                            const QueryOptions& opts) {
  if (opts.top_k < 1) throw UsageError("query: top_k must be >= 1");
  if (opts.mode == ScoreMode::kExact && embeddings.count() != index.item_count)
    throw UsageError("query: embedding count does not match index");

  Signature qs = signature(q, planes);  // throws on zero vector
  std::vector<std::uint32_t> candidates =
      beam_lookup(index, qs, opts.beamwidth);

  std::vector<QueryHit> hits;
  hits.reserve(candidates.size());
  if (opts.mode == ScoreMode::kExact) {
    for (std::uint32_t id : candidates)
      hits.push_back({id, cosine_distance(q, embeddings.row(id))});
  } else {
    for (std::uint32_t id : candidates)
      hits.push_back({id, approx_cosine_distance(qs, index.item_signature(id))});
  }
  std::sort(hits.begin(), hits.end(), [](const QueryHit& a, const QueryHit& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.id < b.id;
  });
  if (hits.size() > opts.top_k) hits.resize(opts.top_k);
  return hits;
}

namespace {

constexpr char kIndexMagic[4] = {'Q', 'B', 'E', 'I'};

void put_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ofstream& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    unsigned char b = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(&b), 1);
  }
}

std::uint32_t get_u32(std::ifstream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw FormatError(path + ": truncated index file");
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(std::ifstream& in, const std::string& path) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8))
    throw FormatError(path + ": truncated index file");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

}  // namespace

void save_index(const PermutedIndex& index, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(kIndexMagic, 4);
  put_u32(out, index.bit_count);
  put_u32(out, index.perm_count);
  put_u32(out, index.item_count);
  put_u64(out, index.seed);
  for (const auto& pi : index.permutations)
    for (std::uint32_t v : pi) put_u32(out, v);

  const std::uint32_t words = index.words_per_signature();
  const std::uint32_t sig_bytes = (index.bit_count + 7) / 8;
  std::vector<unsigned char> packed(sig_bytes);
  for (const auto& list : index.lists) {
    for (std::uint32_t pos = 0; pos < index.item_count; ++pos) {
      const std::uint64_t* key =
          list.keys.data() + static_cast<std::size_t>(pos) * words;
      for (std::uint32_t byte = 0; byte < sig_bytes; ++byte)
        packed[byte] = static_cast<unsigned char>(
            key[byte / 8] >> (56 - 8 * (byte % 8)));
      out.write(reinterpret_cast<const char*>(packed.data()), sig_bytes);
      put_u32(out, list.ids[pos]);
    }
  }
  out.close();
  if (!out) throw IoError("failed while writing " + path);
}

PermutedIndex load_index(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kIndexMagic, 4) != 0)
    throw FormatError(path + ": bad magic, not a QBEI index file");

  PermutedIndex index;
  index.bit_count = get_u32(in, path);
  index.perm_count = get_u32(in, path);
  index.item_count = get_u32(in, path);
  index.seed = get_u64(in, path);
  if (index.bit_count < 1 || index.perm_count < 1 || index.item_count < 1)
    throw FormatError(path + ": degenerate index header");

  index.permutations.assign(index.perm_count,
                            std::vector<std::uint32_t>(index.bit_count));
  for (auto& pi : index.permutations) {
    std::vector<bool> seen(index.bit_count, false);
    for (auto& v : pi) {
      v = get_u32(in, path);
      if (v >= index.bit_count || seen[v])
        throw FormatError(path + ": permutation is not a bijection");
      seen[v] = true;
    }
  }

  const std::uint32_t words = index.words_per_signature();
  const std::uint32_t sig_bytes = (index.bit_count + 7) / 8;
  std::vector<unsigned char> packed(sig_bytes);
  index.lists.resize(index.perm_count);
  for (auto& list : index.lists) {
    list.keys.assign(static_cast<std::size_t>(index.item_count) * words, 0);
    list.ids.resize(index.item_count);
    for (std::uint32_t pos = 0; pos < index.item_count; ++pos) {
      if (!in.read(reinterpret_cast<char*>(packed.data()), sig_bytes))
        throw FormatError(path + ": truncated signature entries");
      std::uint64_t* key =
          list.keys.data() + static_cast<std::size_t>(pos) * words;
      for (std::uint32_t byte = 0; byte < sig_bytes; ++byte)
        key[byte / 8] |= static_cast<std::uint64_t>(packed[byte])
                         << (56 - 8 * (byte % 8));
      list.ids[pos] = get_u32(in, path);
      if (list.ids[pos] >= index.item_count)
        throw FormatError(path + ": item id out of range");
    }
  }
  index.rebuild_identity_positions();
  return index;
}

}  // namespace qbe::lsh
