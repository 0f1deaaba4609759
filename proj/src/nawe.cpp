#include "qbe/nawe.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include "qbe/errors.hpp"
#include "qbe/parallel.hpp"

namespace qbe::nawe {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

struct DirCache {
  // All T*H, post-activation, indexed by real timestep t.
  std::vector<double> gate_i, gate_f, gate_g, gate_o;
  std::vector<double> c, tanh_c, h;

  void resize(std::size_t n) {
    gate_i.assign(n, 0.0);
    gate_f.assign(n, 0.0);
    gate_g.assign(n, 0.0);
    gate_o.assign(n, 0.0);
    c.assign(n, 0.0);
    tanh_c.assign(n, 0.0);
    h.assign(n, 0.0);
  }
};

struct LayerCache {
  std::vector<double> input;  // T*in as fed to the cells (post dropout)
  std::vector<double> mask;   // inverted-dropout mask, empty when off
  DirCache dir[2];
};

struct ForwardCache {
  std::uint32_t steps = 0;
  std::vector<LayerCache> layers;
  Embedding embedding;
};

// One direction over the full sequence. Writes h rows into out_h (T*H) and,
// when cache is non-null, the gate activations needed by backprop.
void run_direction(const LstmCell& cell, const std::vector<double>& input,
                   std::uint32_t steps, std::uint32_t in_dim, std::uint32_t h_dim,
                   bool backward_dir, std::vector<double>& out_h,
                   DirCache* cache) {
  const double* w = cell.w_in.data();
  const double* u = cell.w_rec.data();
  const double* b = cell.bias.data();
  std::vector<double> h_prev(h_dim, 0.0), c_prev(h_dim, 0.0), acts(4 * h_dim);

  for (std::uint32_t step = 0; step < steps; ++step) {
    std::uint32_t t = backward_dir ? steps - 1 - step : step;
    const double* x = input.data() + static_cast<std::size_t>(t) * in_dim;
    for (std::uint32_t r = 0; r < 4 * h_dim; ++r)
      acts[r] = b[r] + dot(w + static_cast<std::size_t>(r) * in_dim, x, in_dim) +
                dot(u + static_cast<std::size_t>(r) * h_dim, h_prev.data(), h_dim);
    double* h_row = out_h.data() + static_cast<std::size_t>(t) * h_dim;
    for (std::uint32_t j = 0; j < h_dim; ++j) {
      double gi = sigmoid(acts[j]);
      double gf = sigmoid(acts[h_dim + j]);
      double gg = std::tanh(acts[2 * h_dim + j]);
      double go = sigmoid(acts[3 * h_dim + j]);
      double c = gf * c_prev[j] + gi * gg;
      double tc = std::tanh(c);
      double h = go * tc;
      if (cache) {
        std::size_t idx = static_cast<std::size_t>(t) * h_dim + j;
        cache->gate_i[idx] = gi;
        cache->gate_f[idx] = gf;
        cache->gate_g[idx] = gg;
        cache->gate_o[idx] = go;
        cache->c[idx] = c;
        cache->tanh_c[idx] = tc;
      }
      c_prev[j] = c;
      h_prev[j] = h;
      h_row[j] = h;
    }
  }
  if (cache) cache->h = out_h;
}

void apply_dropout(std::vector<double>& rows, double p, Rng& rng,
                   std::vector<double>* mask_out) {
  const double scale = 1.0 / (1.0 - p);
  if (mask_out) mask_out->resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double m = rng.next_double() < p ? 0.0 : scale;
    if (mask_out) (*mask_out)[i] = m;
    rows[i] *= m;
  }
}

// Shared forward pass. dropout_seeds: one seed per stacked boundary is not
// needed; a single stream covers the whole pass (mask draws are ordered by
// layer, then row-major within the layer input).
Embedding forward(const EncoderParams& params, const data::FeatureSequence& y,
                  double dropout_p, const std::uint64_t* dropout_seed,
                  ForwardCache* cache) {
  if (params.layers == 0 || params.hidden == 0)
    throw UsageError("encode: uninitialized parameters");
  if (y.frame_count() == 0) throw UsageError("encode: empty sequence");
  if (y.dim() != params.input_dim)
    throw UsageError("encode: feature dim " + std::to_string(y.dim()) +
                     " does not match model input dim " +
                     std::to_string(params.input_dim));

  const std::uint32_t steps = y.frame_count();
  const std::uint32_t h_dim = params.hidden;
  Rng drop_rng(dropout_seed ? *dropout_seed : 0);
  const bool dropout_on = dropout_seed != nullptr && dropout_p > 0.0;

  if (cache) {
    cache->steps = steps;
    cache->layers.resize(params.layers);
  }

  std::vector<double> current(static_cast<std::size_t>(steps) * params.input_dim);
  for (std::uint32_t t = 0; t < steps; ++t)
    for (std::uint32_t f = 0; f < params.input_dim; ++f)
      current[static_cast<std::size_t>(t) * params.input_dim + f] = y.at(t, f);

  std::vector<double> fwd_h, bwd_h;
  for (std::uint32_t layer = 0; layer < params.layers; ++layer) {
    const std::uint32_t in_dim = params.layer_input_dim(layer);
    std::vector<double>* mask_out = nullptr;
    if (cache) mask_out = &cache->layers[layer].mask;
    if (layer > 0 && dropout_on)
      apply_dropout(current, dropout_p, drop_rng, mask_out);
    if (cache) cache->layers[layer].input = current;

    fwd_h.assign(static_cast<std::size_t>(steps) * h_dim, 0.0);
    bwd_h.assign(static_cast<std::size_t>(steps) * h_dim, 0.0);
    DirCache* cf = cache ? &cache->layers[layer].dir[0] : nullptr;
    DirCache* cb = cache ? &cache->layers[layer].dir[1] : nullptr;
    if (cf) cf->resize(static_cast<std::size_t>(steps) * h_dim);
    if (cb) cb->resize(static_cast<std::size_t>(steps) * h_dim);
    run_direction(params.cell(layer, 0), current, steps, in_dim, h_dim, false,
                  fwd_h, cf);
    run_direction(params.cell(layer, 1), current, steps, in_dim, h_dim, true,
                  bwd_h, cb);

    current.resize(static_cast<std::size_t>(steps) * 2 * h_dim);
    for (std::uint32_t t = 0; t < steps; ++t) {
      std::memcpy(current.data() + static_cast<std::size_t>(t) * 2 * h_dim,
                  fwd_h.data() + static_cast<std::size_t>(t) * h_dim,
                  h_dim * sizeof(double));
      std::memcpy(current.data() + static_cast<std::size_t>(t) * 2 * h_dim + h_dim,
                  bwd_h.data() + static_cast<std::size_t>(t) * h_dim,
                  h_dim * sizeof(double));
    }
  }

  Embedding emb(2 * h_dim);
  std::memcpy(emb.data(),
              fwd_h.data() + static_cast<std::size_t>(steps - 1) * h_dim,
              h_dim * sizeof(double));
  std::memcpy(emb.data() + h_dim, bwd_h.data(), h_dim * sizeof(double));
  if (cache) cache->embedding = emb;
  return emb;
}

// Reverse-time pass of one direction. dh_ext holds the gradient w.r.t. h_t
// coming from consumers above; dx accumulates the gradient w.r.t. the layer
// input. Parameter gradients accumulate into grad.
void backprop_direction(const LstmCell& cell, LstmCell& grad,
                        const std::vector<double>& input, const DirCache& dc,
                        std::uint32_t steps, std::uint32_t in_dim,
                        std::uint32_t h_dim, bool backward_dir,
                        const std::vector<double>& dh_ext,
                        std::vector<double>& dx) {
  const double* w = cell.w_in.data();
  const double* u = cell.w_rec.data();
  std::vector<double> dh_carry(h_dim, 0.0), dc_carry(h_dim, 0.0);
  std::vector<double> da(4 * h_dim);

  for (std::uint32_t step = 0; step < steps; ++step) {
    // Iterate in reverse of the processing order.
    std::uint32_t t = backward_dir ? step : steps - 1 - step;
    bool first_step = backward_dir ? (t == steps - 1) : (t == 0);
    std::size_t row = static_cast<std::size_t>(t) * h_dim;
    std::size_t prev_row =
        backward_dir ? row + h_dim : (row >= h_dim ? row - h_dim : 0);
    const double* x = input.data() + static_cast<std::size_t>(t) * in_dim;

    for (std::uint32_t j = 0; j < h_dim; ++j) {
      double gi = dc.gate_i[row + j];
      double gf = dc.gate_f[row + j];
      double gg = dc.gate_g[row + j];
      double go = dc.gate_o[row + j];
      double tc = dc.tanh_c[row + j];
      double c_prev = first_step ? 0.0 : dc.c[prev_row + j];

      double dh = dh_ext[row + j] + dh_carry[j];
      double d_o = dh * tc;
      double d_c = dc_carry[j] + dh * go * (1.0 - tc * tc);
      double d_i = d_c * gg;
      double d_g = d_c * gi;
      double d_f = d_c * c_prev;

      da[j] = d_i * gi * (1.0 - gi);
      da[h_dim + j] = d_f * gf * (1.0 - gf);
      da[2 * h_dim + j] = d_g * (1.0 - gg * gg);
      da[3 * h_dim + j] = d_o * go * (1.0 - go);
      dc_carry[j] = d_c * gf;
    }

    const double* h_prev = first_step ? nullptr : dc.h.data() + prev_row;
    double* dx_row = dx.data() + static_cast<std::size_t>(t) * in_dim;
    std::fill(dh_carry.begin(), dh_carry.end(), 0.0);
    for (std::uint32_t r = 0; r < 4 * h_dim; ++r) {
      double a = da[r];
      if (a == 0.0) continue;
      axpy(a, x, grad.w_in.data() + static_cast<std::size_t>(r) * in_dim, in_dim);
      if (h_prev)
        axpy(a, h_prev, grad.w_rec.data() + static_cast<std::size_t>(r) * h_dim,
             h_dim);
      grad.bias[r] += a;
      axpy(a, w + static_cast<std::size_t>(r) * in_dim, dx_row, in_dim);
      axpy(a, u + static_cast<std::size_t>(r) * h_dim, dh_carry.data(), h_dim);
    }
  }
}

// Full BPTT for one sequence: d_embedding -> parameter gradients.
void backprop_sequence(const EncoderParams& params, const ForwardCache& cache,
                       const Embedding& d_embedding, EncoderParams& grads) {
  const std::uint32_t steps = cache.steps;
  const std::uint32_t h_dim = params.hidden;
  std::vector<double> dh_fwd(static_cast<std::size_t>(steps) * h_dim, 0.0);
  std::vector<double> dh_bwd(static_cast<std::size_t>(steps) * h_dim, 0.0);
  for (std::uint32_t j = 0; j < h_dim; ++j) {
    dh_fwd[static_cast<std::size_t>(steps - 1) * h_dim + j] = d_embedding[j];
    dh_bwd[j] = d_embedding[h_dim + j];
  }

  for (std::int32_t layer = static_cast<std::int32_t>(params.layers) - 1;
       layer >= 0; --layer) {
    const auto l = static_cast<std::uint32_t>(layer);
    const std::uint32_t in_dim = params.layer_input_dim(l);
    const LayerCache& lc = cache.layers[l];
    std::vector<double> dx(static_cast<std::size_t>(steps) * in_dim, 0.0);
    backprop_direction(params.cell(l, 0), grads.cell(l, 0), lc.input,
                       lc.dir[0], steps, in_dim, h_dim, false, dh_fwd, dx);
    backprop_direction(params.cell(l, 1), grads.cell(l, 1), lc.input,
                       lc.dir[1], steps, in_dim, h_dim, true, dh_bwd, dx);
    if (l == 0) break;
    if (!lc.mask.empty())
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= lc.mask[i];
    dh_fwd.assign(static_cast<std::size_t>(steps) * h_dim, 0.0);
    dh_bwd.assign(static_cast<std::size_t>(steps) * h_dim, 0.0);
    for (std::uint32_t t = 0; t < steps; ++t) {
      std::memcpy(dh_fwd.data() + static_cast<std::size_t>(t) * h_dim,
                  dx.data() + static_cast<std::size_t>(t) * in_dim,
                  h_dim * sizeof(double));
      std::memcpy(dh_bwd.data() + static_cast<std::size_t>(t) * h_dim,
                  dx.data() + static_cast<std::size_t>(t) * in_dim + h_dim,
                  h_dim * sizeof(double));
    }
  }
}

// d/dx of (1 - x.y / (|x||y|)).
Embedding cosine_grad_wrt_first(std::span<const double> x,
                                std::span<const double> y) {
  double dot_xy = 0.0, nx2 = 0.0, ny2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    dot_xy += x[i] * y[i];
    nx2 += x[i] * x[i];
    ny2 += y[i] * y[i];
  }
  double nx = std::sqrt(nx2), ny = std::sqrt(ny2);
  if (nx <= 1e-8 || ny <= 1e-8)
    throw NumericError("triplet gradient: near-zero embedding norm");
  double cos_xy = dot_xy / (nx * ny);
  Embedding g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    g[i] = cos_xy * x[i] / nx2 - y[i] / (nx * ny);
  return g;
}

void accumulate(EncoderParams& dst, const EncoderParams& src) {
  for (std::size_t c = 0; c < dst.cells.size(); ++c) {
    auto& d = dst.cells[c];
    const auto& s = src.cells[c];
    for (std::size_t i = 0; i < d.w_in.size(); ++i) d.w_in[i] += s.w_in[i];
    for (std::size_t i = 0; i < d.w_rec.size(); ++i) d.w_rec[i] += s.w_rec[i];
    for (std::size_t i = 0; i < d.bias.size(); ++i) d.bias[i] += s.bias[i];
  }
}

void scale(EncoderParams& p, double factor) {
  for (auto& c : p.cells) {
    for (auto& v : c.w_in) v *= factor;
    for (auto& v : c.w_rec) v *= factor;
    for (auto& v : c.bias) v *= factor;
  }
}

void zero_fill(EncoderParams& p) {
  for (auto& c : p.cells) {
    std::fill(c.w_in.begin(), c.w_in.end(), 0.0);
    std::fill(c.w_rec.begin(), c.w_rec.end(), 0.0);
    std::fill(c.bias.begin(), c.bias.end(), 0.0);
  }
}

std::size_t select_negative(std::span<const double> anchor,
                            const std::vector<Embedding>& negatives,
                            NegativeRule rule, double* selected_distance) {
  std::size_t best = 0;
  double best_d = cosine_distance(anchor, negatives[0]);
  for (std::size_t j = 1; j < negatives.size(); ++j) {
    double d = cosine_distance(anchor, negatives[j]);
    bool better = rule == NegativeRule::kMinDistance ? d < best_d : d > best_d;
    if (better) {
      best = j;
      best_d = d;
    }
  }
  if (selected_distance) *selected_distance = best_d;
  return best;
}

// Gradients for one triplet, unscaled (caller divides by batch size).
double triplet_gradients(const EncoderParams& params, const Triplet& triplet,
                         const TrainConfig& cfg, EncoderParams& grads) {
  const bool dropout_on =
      cfg.dropout_p > 0.0 && !triplet.dropout_seeds.empty();
  auto seed_ptr = [&](std::size_t idx) -> const std::uint64_t* {
    return dropout_on ? &triplet.dropout_seeds[idx] : nullptr;
  };

  ForwardCache cache_a, cache_s;
  Embedding xa = forward(params, *triplet.anchor, cfg.dropout_p, seed_ptr(0),
                         &cache_a);
  Embedding xs =
      forward(params, *triplet.same, cfg.dropout_p, seed_ptr(1), &cache_s);

  std::vector<Embedding> xn;
  xn.reserve(triplet.negatives.size());
  for (std::size_t j = 0; j < triplet.negatives.size(); ++j)
    xn.push_back(forward(params, *triplet.negatives[j], cfg.dropout_p,
                         seed_ptr(2 + j), nullptr));

  double d_neg = 0.0;
  std::size_t sel = select_negative(xa, xn, cfg.negative_rule, &d_neg);
  double d_same = cosine_distance(xa, xs);
  double z = cfg.margin + d_same - d_neg;
  if (z <= 0.0) return 0.0;

  ForwardCache cache_n;
  forward(params, *triplet.negatives[sel], cfg.dropout_p, seed_ptr(2 + sel),
          &cache_n);

  Embedding d_xs = cosine_grad_wrt_first(xs, xa);
  Embedding d_xn = cosine_grad_wrt_first(cache_n.embedding, xa);
  for (auto& v : d_xn) v = -v;
  Embedding ga_s = cosine_grad_wrt_first(xa, xs);
  Embedding ga_n = cosine_grad_wrt_first(xa, cache_n.embedding);
  Embedding d_xa(xa.size());
  for (std::size_t i = 0; i < xa.size(); ++i) d_xa[i] = ga_s[i] - ga_n[i];

  backprop_sequence(params, cache_a, d_xa, grads);
  backprop_sequence(params, cache_s, d_xs, grads);
  backprop_sequence(params, cache_n, d_xn, grads);
  return z;
}

}  // namespace

std::size_t EncoderParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& c : cells)
    n += c.w_in.size() + c.w_rec.size() + c.bias.size();
  return n;
}

bool EncoderParams::all_finite() const {
  auto ok = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(),
                       [](double x) { return std::isfinite(x); });
  };
  for (const auto& c : cells)
    if (!ok(c.w_in) || !ok(c.w_rec) || !ok(c.bias)) return false;
  return true;
}

EncoderParams zero_params(std::uint32_t layers, std::uint32_t hidden,
                          std::uint32_t input_dim) {
  if (layers == 0 || hidden == 0 || input_dim == 0)
    throw UsageError("encoder shape must be positive");
  EncoderParams p;
  p.layers = layers;
  p.hidden = hidden;
  p.input_dim = input_dim;
  p.cells.resize(2 * layers);
  for (std::uint32_t l = 0; l < layers; ++l) {
    const std::uint32_t in_dim = p.layer_input_dim(l);
    for (std::uint32_t d = 0; d < 2; ++d) {
      auto& c = p.cell(l, d);
      c.w_in.assign(static_cast<std::size_t>(4 * hidden) * in_dim, 0.0);
      c.w_rec.assign(static_cast<std::size_t>(4 * hidden) * hidden, 0.0);
      c.bias.assign(4 * hidden, 0.0);
    }
  }
  return p;
}

EncoderParams init_params(std::uint32_t layers, std::uint32_t hidden,
                          std::uint32_t input_dim, std::uint64_t seed) {
  EncoderParams p = zero_params(layers, hidden, input_dim);
  Rng rng(seed);
  for (auto& c : p.cells) {
    for (auto& v : c.w_in) v = rng.next_uniform(-0.05, 0.05);
    for (auto& v : c.w_rec) v = rng.next_uniform(-0.05, 0.05);
    for (auto& v : c.bias) v = rng.next_uniform(-0.05, 0.05);
    std::fill(c.bias.begin() + hidden, c.bias.begin() + 2 * hidden, 1.0);
  }
  return p;
}

void TrainConfig::validate() const {
  if (layers < 1 || hidden < 1) throw UsageError("train: layers/hidden >= 1");
  if (!(margin > 0.0 && margin < 2.0))
    throw UsageError("train: margin must lie in (0, 2)");
  if (negatives < 1) throw UsageError("train: negatives >= 1");
  if (batch_size < 1) throw UsageError("train: batch_size >= 1");
  if (!(learning_rate > 0.0)) throw UsageError("train: learning_rate > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw UsageError("train: beta1/beta2 must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw UsageError("train: epsilon > 0");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0))
    throw UsageError("train: dropout must lie in [0, 1)");
}

Embedding encode(const EncoderParams& params, const data::FeatureSequence& y) {
  return forward(params, y, 0.0, nullptr, nullptr);
}

Embedding encode(const EncoderParams& params, const data::FeatureSequence& y,
                 double dropout_p, Rng& rng) {
  if (dropout_p <= 0.0) return forward(params, y, 0.0, nullptr, nullptr);
  std::uint64_t seed = rng.next_u64();
  return forward(params, y, dropout_p, &seed, nullptr);
}

std::vector<std::size_t> sample_negatives(
    const std::vector<data::WordSegment>& train,
    const std::string& anchor_label, std::uint32_t k, Rng& rng) {
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < train.size(); ++i)
    if (train[i].label != anchor_label) candidates.push_back(i);
  if (candidates.size() < k)
    throw UsageError("sample_negatives: only " +
                     std::to_string(candidates.size()) +
                     " segments with a different label, need " +
                     std::to_string(k));
  // Partial Fisher-Yates: first k entries are a uniform draw w/o replacement.
  for (std::uint32_t i = 0; i < k; ++i) {
    std::size_t j =
        i + static_cast<std::size_t>(rng.next_below(candidates.size() - i));
    std::swap(candidates[i], candidates[j]);
  }
  candidates.resize(k);
  return candidates;
}

double triplet_loss(std::span<const double> anchor,
                    std::span<const double> same,
                    const std::vector<Embedding>& negatives, double margin,
                    NegativeRule rule) {
  if (negatives.empty()) throw UsageError("triplet_loss: empty negative set");
  double d_neg = 0.0;
  select_negative(anchor, negatives, rule, &d_neg);
  double z = margin + cosine_distance(anchor, same) - d_neg;
  return z > 0.0 ? z : 0.0;
}

GradientResult loss_gradients(const EncoderParams& params,
                              const std::vector<Triplet>& batch,
                              const TrainConfig& cfg) {
  if (batch.empty()) throw UsageError("loss_gradients: empty batch");
  GradientResult result;
  result.grads = zero_params(params.layers, params.hidden, params.input_dim);

  const std::size_t wave = std::max<std::size_t>(1, effective_thread_count());
  std::vector<EncoderParams> slot(
      std::min(wave, batch.size()),
      zero_params(params.layers, params.hidden, params.input_dim));
  std::vector<double> losses(batch.size(), 0.0);

  for (std::size_t base = 0; base < batch.size(); base += wave) {
    std::size_t count = std::min(wave, batch.size() - base);
    parallel_for(count, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t s = lo; s < hi; ++s) {
        zero_fill(slot[s]);
        losses[base + s] =
            triplet_gradients(params, batch[base + s], cfg, slot[s]);
      }
    });
    // Reduce in triplet order so the sum is independent of thread count.
    for (std::size_t s = 0; s < count; ++s) accumulate(result.grads, slot[s]);
  }

  scale(result.grads, 1.0 / static_cast<double>(batch.size()));
  double total = 0.0;
  for (double l : losses) total += l;
  result.mean_loss = total / static_cast<double>(batch.size());

  if (!std::isfinite(result.mean_loss) || !result.grads.all_finite())
    throw NumericError("loss_gradients: non-finite loss or gradient");
  return result;
}

AdamState AdamState::zeros(const EncoderParams& like) {
  AdamState s;
  s.m = zero_params(like.layers, like.hidden, like.input_dim);
  s.v = zero_params(like.layers, like.hidden, like.input_dim);
  s.step = 0;
  return s;
}

void adam_step(EncoderParams& params, const EncoderParams& grads,
               AdamState& state, const TrainConfig& cfg) {
  if (grads.cells.size() != params.cells.size() ||
      grads.layers != params.layers || grads.hidden != params.hidden ||
      grads.input_dim != params.input_dim)
    throw UsageError("adam_step: gradient shape mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  auto update = [&](std::vector<double>& theta, const std::vector<double>& g,
                    std::vector<double>& m, std::vector<double>& v) {
    if (g.size() != theta.size())
      throw UsageError("adam_step: gradient shape mismatch");
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      double m_hat = m[i] / bc1;
      double v_hat = v[i] / bc2;
      theta[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  };
  for (std::size_t c = 0; c < params.cells.size(); ++c) {
    update(params.cells[c].w_in, grads.cells[c].w_in, state.m.cells[c].w_in,
           state.v.cells[c].w_in);
    update(params.cells[c].w_rec, grads.cells[c].w_rec, state.m.cells[c].w_rec,
           state.v.cells[c].w_rec);
    update(params.cells[c].bias, grads.cells[c].bias, state.m.cells[c].bias,
           state.v.cells[c].bias);
  }
}

TrainResult train(const std::vector<data::WordSegment>& train_set,
                  const TrainConfig& cfg,
                  const std::function<double(const EncoderParams&)>& dev_metric) {
  cfg.validate();
  if (train_set.empty()) throw UsageError("train: empty training set");
  const std::uint32_t feat_dim = train_set[0].features.dim();
  std::map<std::string, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < train_set.size(); ++i) {
    if (train_set[i].features.dim() != feat_dim)
      throw UsageError("train: inconsistent feature dimensions");
    by_label[train_set[i].label].push_back(i);
  }
  if (by_label.size() < 2)
    throw UsageError("train: need at least 2 word types, got " +
                     std::to_string(by_label.size()));

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (const auto& [label, members] : by_label)
    for (std::size_t a : members)
      for (std::size_t s : members)
        if (a != s) pairs.emplace_back(a, s);
  if (pairs.empty())
    throw UsageError("train: no same-label pairs (every type has one example)");

  TrainResult result;
  result.params = init_params(cfg.layers, cfg.hidden, feat_dim,
                              derive_seed(cfg.seed, "nawe.init"));
  if (cfg.epochs == 0) return result;

  AdamState adam = AdamState::zeros(result.params);
  for (std::uint32_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng rng_shuffle(derive_seed(cfg.seed, "nawe.shuffle", epoch));
    Rng rng_neg(derive_seed(cfg.seed, "nawe.negatives", epoch));
    Rng rng_drop(derive_seed(cfg.seed, "nawe.dropout", epoch));
    rng_shuffle.shuffle(pairs);

    double loss_sum = 0.0;
    for (std::size_t base = 0; base < pairs.size(); base += cfg.batch_size) {
      std::size_t count = std::min<std::size_t>(cfg.batch_size, pairs.size() - base);
      std::vector<Triplet> batch(count);
      for (std::size_t i = 0; i < count; ++i) {
        const auto& [a_idx, s_idx] = pairs[base + i];
        Triplet& t = batch[i];
        t.anchor = &train_set[a_idx].features;
        t.same = &train_set[s_idx].features;
        auto neg_idx = sample_negatives(train_set, train_set[a_idx].label,
                                        cfg.negatives, rng_neg);
        for (std::size_t n : neg_idx) t.negatives.push_back(&train_set[n].features);
        if (cfg.dropout_p > 0.0) {
          t.dropout_seeds.resize(2 + neg_idx.size());
          for (auto& s : t.dropout_seeds) s = rng_drop.next_u64();
        }
      }
      GradientResult g = loss_gradients(result.params, batch, cfg);
      adam_step(result.params, g.grads, adam, cfg);
      loss_sum += g.mean_loss * static_cast<double>(count);
    }

    EpochStats stats;
    stats.mean_loss = loss_sum / static_cast<double>(pairs.size());
    if (dev_metric) stats.dev_score = dev_metric(result.params);
    result.history.push_back(stats);
  }
  return result;
}

namespace {

constexpr char kModelMagic[4] = {'Q', 'B', 'E', 'M'};

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
    throw FormatError(path + ": truncated model file");
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_block(std::ofstream& out, const std::vector<double>& v) {
  static_assert(std::endian::native == std::endian::little,
                "model serialization assumes little-endian");
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void read_block(std::ifstream& in, std::vector<double>& v,
                const std::string& path) {
  if (!in.read(reinterpret_cast<char*>(v.data()),
               static_cast<std::streamsize>(v.size() * sizeof(double))))
    throw FormatError(path + ": truncated model payload");
  for (double x : v)
    if (!std::isfinite(x))
      throw FormatError(path + ": non-finite model parameter");
}

}  // namespace

void save_model(const EncoderParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(kModelMagic, 4);
  put_u32(out, params.layers);
  put_u32(out, params.hidden);
  put_u32(out, params.input_dim);
  for (const auto& c : params.cells) {
    write_block(out, c.w_in);
    write_block(out, c.w_rec);
    write_block(out, c.bias);
  }
  out.close();
  if (!out) throw IoError("failed while writing " + path);
}

EncoderParams load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kModelMagic, 4) != 0)
    throw FormatError(path + ": bad magic, not a QBEM model file");
  std::uint32_t layers = get_u32(in, path);
  std::uint32_t hidden = get_u32(in, path);
  std::uint32_t input_dim = get_u32(in, path);
  if (layers == 0 || hidden == 0 || input_dim == 0)
    throw FormatError(path + ": degenerate model shape");
  EncoderParams p = zero_params(layers, hidden, input_dim);
  for (auto& c : p.cells) {
    read_block(in, c.w_in, path);
    read_block(in, c.w_rec, path);
    read_block(in, c.bias, path);
  }
  return p;
}

}  // namespace qbe::nawe
