#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qbe/embedding.hpp"
#include "qbe/rng.hpp"
#include "qbe/types.hpp"

namespace qbe::nawe {

// One direction of one stacked layer. Weight rows are ordered by gate:
// input, forget, cell candidate, output (4H rows total).
struct LstmCell {
  std::vector<double> w_in;   // [4H x in_dim] row-major
  std::vector<double> w_rec;  // [4H x H] row-major
  std::vector<double> bias;   // [4H]
};

struct EncoderParams {
  std::uint32_t layers = 0;     // L
  std::uint32_t hidden = 0;     // H per direction
  std::uint32_t input_dim = 0;  // F at layer 1; layers above see 2H
  std::vector<LstmCell> cells;  // 2L cells, cells[2*layer + dir], dir 0 = fwd

  std::uint32_t embedding_dim() const { return 2 * hidden; }
  std::uint32_t layer_input_dim(std::uint32_t layer) const {
    return layer == 0 ? input_dim : 2 * hidden;
  }
  LstmCell& cell(std::uint32_t layer, std::uint32_t dir) {
    return cells[2 * layer + dir];
  }
  const LstmCell& cell(std::uint32_t layer, std::uint32_t dir) const {
    return cells[2 * layer + dir];
  }
  std::size_t parameter_count() const;
  bool all_finite() const;
};

// Zero-valued parameter set with consistent shapes (also the gradient and
// Adam accumulator shape).
EncoderParams zero_params(std::uint32_t layers, std::uint32_t hidden,
                          std::uint32_t input_dim);

// Uniform [-0.05, 0.05] init with forget-gate biases at 1.0.
EncoderParams init_params(std::uint32_t layers, std::uint32_t hidden,
                          std::uint32_t input_dim, std::uint64_t seed);

enum class NegativeRule {
  kMinDistance,  // negative closest to the anchor (most margin-violating)
  kMaxDistance   // formula-literal max over the sampled set
};

struct TrainConfig {
  std::uint32_t layers = 3;
  std::uint32_t hidden = 256;
  double margin = 0.5;
  std::uint32_t negatives = 10;  // k
  std::uint32_t batch_size = 32;
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double dropout_p = 0.3;
  std::uint32_t epochs = 100;
  std::uint64_t seed = 12345;
  NegativeRule negative_rule = NegativeRule::kMinDistance;

  void validate() const;
};

// x = [h_T of the top forward pass ; h_1 of the top backward pass].
// Deterministic; dropout off.
Embedding encode(const EncoderParams& params, const data::FeatureSequence& y);

// Training-mode encode: inverted dropout on the inputs of layers 2..L,
// masks drawn from rng.
Embedding encode(const EncoderParams& params, const data::FeatureSequence& y,
                 double dropout_p, Rng& rng);

// Uniform choice of k distinct segment indices whose label differs from
// anchor_label. Throws UsageError when fewer than k candidates exist.
std::vector<std::size_t> sample_negatives(
    const std::vector<data::WordSegment>& train, const std::string& anchor_label,
    std::uint32_t k, Rng& rng);

// max{0, margin + d_cos(xa, xs) - d_cos(xa, x_sel)} with x_sel picked from
// the negatives by rule (ties: lowest index).
double triplet_loss(std::span<const double> anchor, std::span<const double> same,
                    const std::vector<Embedding>& negatives, double margin,
                    NegativeRule rule = NegativeRule::kMinDistance);

struct Triplet {
  const data::FeatureSequence* anchor = nullptr;
  const data::FeatureSequence* same = nullptr;
  std::vector<const data::FeatureSequence*> negatives;
  // One seed per sequence in order [anchor, same, negatives...]; empty
  // disables dropout for the triplet.
  std::vector<std::uint64_t> dropout_seeds;
};

struct GradientResult {
  EncoderParams grads;  // same shape as the parameters
  double mean_loss = 0.0;
};

// Exact gradient of the mean triplet loss over the batch, hardest-negative
// choice frozen at the forward pass. Throws NumericError if anything goes
// non-finite.
GradientResult loss_gradients(const EncoderParams& params,
                              const std::vector<Triplet>& batch,
                              const TrainConfig& cfg);

struct AdamState {
  EncoderParams m;  // first moment
  EncoderParams v;  // second moment
  std::uint64_t step = 0;

  static AdamState zeros(const EncoderParams& like);
};

void adam_step(EncoderParams& params, const EncoderParams& grads,
               AdamState& state, const TrainConfig& cfg);

struct EpochStats {
  double mean_loss = 0.0;
  std::optional<double> dev_score;
};

struct TrainResult {
  EncoderParams params;
  std::vector<EpochStats> history;
};

// Anchor/same pairs are all ordered same-label pairs, reshuffled per epoch;
// negatives are re-sampled per anchor per epoch and embedded with the
// current parameters. dev_metric (when given) runs after each epoch with
// dropout off.
TrainResult train(
    const std::vector<data::WordSegment>& train_set, const TrainConfig& cfg,
    const std::function<double(const EncoderParams&)>& dev_metric = {});

// Model file: binary little-endian, magic "QBEM", u32 L, u32 H, u32 F, then
// per layer (ascending), per direction (forward, backward): w_in, w_rec,
// bias as binary64 in row-major order.
void save_model(const EncoderParams& params, const std::string& path);
EncoderParams load_model(const std::string& path);

}  // namespace qbe::nawe
