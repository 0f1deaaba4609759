#include "qbe/embedding.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "qbe/errors.hpp"

namespace qbe {

double cosine_distance(std::span<const double> x1, std::span<const double> x2) {
  if (x1.size() != x2.size())
    throw UsageError("cosine_distance: dimension mismatch");
  double dot = 0.0, n1 = 0.0, n2 = 0.0;
  for (std::size_t i = 0; i < x1.size(); ++i) {
    dot += x1[i] * x2[i];
    n1 += x1[i] * x1[i];
    n2 += x2[i] * x2[i];
  }
  n1 = std::sqrt(n1);
  n2 = std::sqrt(n2);
  if (n1 <= 1e-8 || n2 <= 1e-8)
    throw NumericError("cosine_distance: near-zero norm");
  return 1.0 - dot / (n1 * n2);
}

void EmbeddingMatrix::normalize_rows() {
  for (std::uint32_t i = 0; i < count(); ++i) {
    auto r = row(i);
    double n = 0.0;
    for (double v : r) n += v * v;
    n = std::sqrt(n);
    if (n <= 1e-12)
      throw NumericError("embedding row " + std::to_string(i) + " has zero norm");
    for (double& v : r) v /= n;
  }
}

namespace {

constexpr char kMagic[4] = {'Q', 'B', 'E', 'E'};

void put_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw FormatError(path + ": truncated embedding file");
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_embedding_matrix(const EmbeddingMatrix& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(kMagic, 4);
  put_u32(out, m.count());
  put_u32(out, m.dim);
  static_assert(std::endian::native == std::endian::little,
                "embedding serialization assumes little-endian");
  out.write(reinterpret_cast<const char*>(m.values.data()),
            static_cast<std::streamsize>(m.values.size() * sizeof(double)));
  out.close();
  if (!out) throw IoError("failed while writing " + path);
}

EmbeddingMatrix read_embedding_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError(path + ": bad magic, not a QBEE embedding file");
  std::uint32_t count = get_u32(in, path);
  std::uint32_t dim = get_u32(in, path);
  EmbeddingMatrix m;
  m.dim = dim;
  m.values.resize(static_cast<std::size_t>(count) * dim);
  if (!in.read(reinterpret_cast<char*>(m.values.data()),
               static_cast<std::streamsize>(m.values.size() * sizeof(double))))
    throw FormatError(path + ": truncated embedding payload");
  for (double v : m.values)
    if (!std::isfinite(v))
      throw FormatError(path + ": non-finite embedding value");
  return m;
}

}  // namespace qbe
