#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace qbe {

using Embedding = std::vector<double>;

// 1 - cos(x1, x2), in [0, 2]. Throws NumericError when either norm is below
// 1e-8; callers that can see zero vectors must screen them first.
double cosine_distance(std::span<const double> x1, std::span<const double> x2);

// Dense row-major collection of embeddings.
struct EmbeddingMatrix {
  std::uint32_t dim = 0;
  std::vector<double> values;

  std::uint32_t count() const {
    return dim == 0 ? 0 : static_cast<std::uint32_t>(values.size() / dim);
  }
  std::span<const double> row(std::uint32_t i) const {
    return {values.data() + static_cast<std::size_t>(i) * dim, dim};
  }
  std::span<double> row(std::uint32_t i) {
    return {values.data() + static_cast<std::size_t>(i) * dim, dim};
  }
  void append(std::span<const double> v) {
    values.insert(values.end(), v.begin(), v.end());
  }

  // Scales every row to unit L2 norm. Throws NumericError on a zero row.
  void normalize_rows();
};

// Binary file, little-endian: magic "QBEE", u32 count, u32 dim, then
// count*dim binary64 row-major.
void write_embedding_matrix(const EmbeddingMatrix& m, const std::string& path);
EmbeddingMatrix read_embedding_matrix(const std::string& path);

}  // namespace qbe
