#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qbe/embedding.hpp"

namespace qbe::lsh {

// Random projection directions for cosine LSH; entry (i, j) is hyperplanes
// row i, coordinate j. Standard normals from the counter-based generator in
// rng.hpp (SplitMix64 counter stream + Box-Muller), so a seed pins the
// whole matrix.
struct HyperplaneSet {
  std::uint32_t bits = 0;  // b
  std::uint32_t dim = 0;   // d
  std::uint64_t seed = 0;
  std::vector<double> values;  // b x d row-major

  std::span<const double> row(std::uint32_t i) const {
    return {values.data() + static_cast<std::size_t>(i) * dim, dim};
  }
};

HyperplaneSet sample_hyperplanes(std::uint32_t dim, std::uint32_t bits,
                                 std::uint64_t seed);

// b-bit signature packed into 64-bit words, bit 0 at the most significant
// position of word 0 so lexicographic bit order equals numeric word order.
struct Signature {
  std::uint32_t bit_count = 0;
  std::vector<std::uint64_t> words;

  explicit Signature(std::uint32_t bits = 0)
      : bit_count(bits), words((bits + 63) / 64, 0) {}

  bool get(std::uint32_t i) const {
    return (words[i >> 6] >> (63 - (i & 63))) & 1ULL;
  }
  void set(std::uint32_t i, bool v) {
    std::uint64_t mask = 1ULL << (63 - (i & 63));
    if (v)
      words[i >> 6] |= mask;
    else
      words[i >> 6] &= ~mask;
  }
  bool operator==(const Signature&) const = default;
};

// Bit i is 1 iff row_i . x >= 0. Throws NumericError on a zero vector.
Signature signature(std::span<const double> x, const HyperplaneSet& planes);

std::uint32_t hamming_distance(const Signature& a, const Signature& b);

// 1 - cos(pi * hamming / b): the angle reconstructed from bit disagreement.
double approx_cosine_distance(const Signature& a, const Signature& b);

struct IndexConfig {
  std::uint32_t bits = 1024;      // b
  std::uint32_t permutations = 16;  // P
  std::uint32_t beamwidth = 2000;   // B
  std::uint64_t seed = 12345;

  // CLI-facing range check (b in [128, 4096], P >= 1, B >= 1). Library
  // entry points only need the shapes to be consistent.
  void validate() const;
};

// P bit-permutations, each with the collection's permuted signatures in
// lexicographic order. Permutation 0 is the identity; the rest come from
// seeded Fisher-Yates draws that depend only on (seed, p), so growing P
// keeps the existing lists.
class PermutedIndex {
 public:
  struct SortedList {
    std::vector<std::uint64_t> keys;  // item_count x words_per_signature
    std::vector<std::uint32_t> ids;
  };

  std::uint32_t bit_count = 0;
  std::uint32_t perm_count = 0;
  std::uint32_t item_count = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<std::uint32_t>> permutations;  // perm_count x bits
  std::vector<SortedList> lists;

  std::uint32_t words_per_signature() const { return (bit_count + 63) / 64; }

  // Position of each item id in the identity-permutation list; gives O(1)
  // access to any item's unpermuted signature.
  const std::vector<std::uint32_t>& identity_positions() const {
    return identity_pos_;
  }
  Signature item_signature(std::uint32_t id) const;
  void rebuild_identity_positions();

 private:
  std::vector<std::uint32_t> identity_pos_;
};

PermutedIndex build_index(const std::vector<Signature>& signatures,
                          const IndexConfig& cfg);

// Union over permutations of the B entries on each side of the permuted
// query's insertion position (clipped at the ends). Sorted by item id.
std::vector<std::uint32_t> beam_lookup(const PermutedIndex& index,
                                       const Signature& s,
                                       std::uint32_t beamwidth);

enum class ScoreMode {
  kExact,   // cosine distance against stored embeddings
  kHamming  // signature-only approximation (memory-lean mode)
};

struct QueryOptions {
  std::uint32_t beamwidth = 2000;
  std::uint32_t top_k = 10;
  ScoreMode mode = ScoreMode::kExact;
};

struct QueryHit {
  std::uint32_t id = 0;
  double distance = 0.0;
};

// Candidates from beam_lookup, deduplicated, scored, ascending distance with
// ties broken by ascending id, truncated to top_k.
std::vector<QueryHit> query(const PermutedIndex& index,
                            const EmbeddingMatrix& embeddings,
                            const HyperplaneSet& planes,
                            std::span<const double> q,
                            const QueryOptions& opts);

// Index file: binary little-endian, magic "QBEI", u32 b, u32 P, u32 N,
// u64 seed, the P permutations as u32 arrays, then per permutation the
// sorted (signature bytes, u32 id) entries with bits packed MSB-first.
void save_index(const PermutedIndex& index, const std::string& path);
PermutedIndex load_index(const std::string& path);

}  // namespace qbe::lsh
