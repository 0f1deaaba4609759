#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "qbe/errors.hpp"
#include "qbe/nawe.hpp"
#include "qbe/parallel.hpp"
#include "qbe/rng.hpp"
#include "qbe/synth.hpp"

using namespace qbe;
using namespace qbe::nawe;
using qbe::data::FeatureSequence;

namespace {

FeatureSequence random_seq(std::uint32_t frames, std::uint32_t dim, Rng& rng) {
  FeatureSequence fs(frames, dim);
  for (auto& v : fs.values()) v = static_cast<float>(rng.next_normal());
  return fs;
}

EncoderParams random_params(std::uint32_t layers, std::uint32_t hidden,
                            std::uint32_t input_dim, std::uint64_t seed) {
  EncoderParams p = zero_params(layers, hidden, input_dim);
  Rng rng(seed);
  for (auto& c : p.cells) {
    for (auto& v : c.w_in) v = rng.next_uniform(-0.4, 0.4);
    for (auto& v : c.w_rec) v = rng.next_uniform(-0.4, 0.4);
    for (auto& v : c.bias) v = rng.next_uniform(-0.2, 0.2);
  }
  return p;
}

double batch_loss(const EncoderParams& params, const std::vector<Triplet>& batch,
                  const TrainConfig& cfg) {
  double total = 0.0;
  for (const auto& t : batch) {
    Embedding xa = encode(params, *t.anchor);
    Embedding xs = encode(params, *t.same);
    std::vector<Embedding> negs;
    for (const auto* n : t.negatives) negs.push_back(encode(params, *n));
    total += triplet_loss(xa, xs, negs, cfg.margin, cfg.negative_rule);
  }
  return total / static_cast<double>(batch.size());
}

template <typename Fn>
void for_each_coordinate(EncoderParams& p, Fn&& fn) {
  for (auto& c : p.cells) {
    for (auto& v : c.w_in) fn(v);
    for (auto& v : c.w_rec) fn(v);
    for (auto& v : c.bias) fn(v);
  }
}

}  // namespace

TEST_CASE("paper shape gives 512-dimensional embeddings, zero net maps to zero") {
  EncoderParams p = zero_params(3, 256, 39);
  Rng rng(1);
  for (std::uint32_t frames : {1u, 2u, 7u}) {
    auto emb = encode(p, random_seq(frames, 39, rng));
    REQUIRE(emb.size() == 512);
    for (double v : emb) CHECK(v == 0.0);
  }
}

TEST_CASE("scalar two-step recurrence matches a hand computation") {
  // L=1, H=1, F=1. Hand-pick the twelve scalars and evaluate the textbook
  // cell equations directly as the oracle.
  EncoderParams p = zero_params(1, 1, 1);
  const double wi = 0.6, wf = -0.4, wg = 0.9, wo = 0.3;
  const double ui = 0.2, uf = 0.5, ug = -0.7, uo = 0.8;
  const double bi = 0.1, bf = 0.2, bg = -0.1, bo = 0.05;
  for (int dir = 0; dir < 2; ++dir) {
    auto& c = p.cells[dir];
    c.w_in = {wi, wf, wg, wo};
    c.w_rec = {ui, uf, ug, uo};
    c.bias = {bi, bf, bg, bo};
  }

  const double x1 = 0.5, x2 = -0.25;
  auto sigmoid = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  auto step = [&](double x, double h_prev, double c_prev, double& c_out) {
    double i = sigmoid(wi * x + ui * h_prev + bi);
    double f = sigmoid(wf * x + uf * h_prev + bf);
    double g = std::tanh(wg * x + ug * h_prev + bg);
    double o = sigmoid(wo * x + uo * h_prev + bo);
    c_out = f * c_prev + i * g;
    return o * std::tanh(c_out);
  };

  double c1 = 0.0;
  double h1 = step(x1, 0.0, 0.0, c1);
  double c2 = 0.0;
  double h_fwd = step(x2, h1, c1, c2);

  double cb1 = 0.0;
  double hb1 = step(x2, 0.0, 0.0, cb1);
  double cb2 = 0.0;
  double h_bwd = step(x1, hb1, cb1, cb2);

  FeatureSequence seq(1, {static_cast<float>(x1), static_cast<float>(x2)});
  auto emb = encode(p, seq);
  REQUIRE(emb.size() == 2);
  CHECK(emb[0] == doctest::Approx(h_fwd).epsilon(1e-12));
  CHECK(emb[1] == doctest::Approx(h_bwd).epsilon(1e-12));
}

TEST_CASE("cosine distance basics") {
  Embedding x = {1.0, 2.0, -0.5};
  Embedding nx = {-1.0, -2.0, 0.5};
  CHECK(cosine_distance(x, x) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(cosine_distance(x, nx) == doctest::Approx(2.0).epsilon(1e-14));
  Embedding a = {1.0, 0.0}, b = {0.0, 3.0};
  CHECK(cosine_distance(a, b) == doctest::Approx(1.0).epsilon(1e-14));
  Embedding zero = {0.0, 0.0};
  CHECK_THROWS_AS(cosine_distance(a, zero), NumericError);

  SUBCASE("scale invariance") {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
      Embedding u(5), v(5);
      for (auto& q : u) q = rng.next_normal();
      for (auto& q : v) q = rng.next_normal();
      double alpha = rng.next_uniform(0.01, 50.0);
      double beta = rng.next_uniform(0.01, 50.0);
      Embedding au(5), bv(5);
      for (int i = 0; i < 5; ++i) {
        au[i] = alpha * u[i];
        bv[i] = beta * v[i];
      }
      CHECK(std::abs(cosine_distance(au, bv) - cosine_distance(u, v)) <= 1e-12);
    }
  }
}

TEST_CASE("sample_negatives honors labels, count and determinism") {
  std::vector<data::WordSegment> train(12);
  for (std::size_t i = 0; i < train.size(); ++i) {
    train[i].recording_id = "seg" + std::to_string(i);
    train[i].label = i < 5 ? "target" : "other" + std::to_string(i % 3);
    train[i].start_frame = 0;
    train[i].end_frame = 1;
    train[i].features = FeatureSequence(1, std::vector<float>{1.0f});
  }

  Rng rng(7);
  auto picks = sample_negatives(train, "target", 4, rng);
  CHECK(picks.size() == 4);
  for (std::size_t idx : picks) CHECK(train[idx].label != "target");
  std::set<std::size_t> unique(picks.begin(), picks.end());
  CHECK(unique.size() == 4);

  SUBCASE("k equal to the eligible count returns exactly that set") {
    Rng rng2(8);
    auto all = sample_negatives(train, "target", 7, rng2);
    std::set<std::size_t> got(all.begin(), all.end());
    CHECK(got.size() == 7);
    for (std::size_t i = 5; i < 12; ++i) CHECK(got.count(i) == 1);
  }
  SUBCASE("insufficient candidates throw") {
    Rng rng3(9);
    CHECK_THROWS_AS(sample_negatives(train, "target", 8, rng3), UsageError);
  }
  SUBCASE("same rng state, same draw") {
    Rng r1(42), r2(42);
    CHECK(sample_negatives(train, "target", 4, r1) ==
          sample_negatives(train, "target", 4, r2));
  }
}

TEST_CASE("triplet loss worked examples") {
  // Unit vectors in the plane at controlled angles from the anchor.
  auto at_distance = [](double d) {
    double theta = std::acos(1.0 - d);
    return Embedding{std::cos(theta), std::sin(theta)};
  };
  Embedding anchor = {1.0, 0.0};
  Embedding same = at_distance(0.1);
  std::vector<Embedding> negatives = {at_distance(0.3), at_distance(0.9)};

  CHECK(triplet_loss(anchor, same, negatives, 0.5,
                     NegativeRule::kMinDistance) ==
        doctest::Approx(0.3).epsilon(1e-12));
  CHECK(triplet_loss(anchor, same, negatives, 0.5,
                     NegativeRule::kMaxDistance) == 0.0);

  SUBCASE("hinge inactive when every negative clears the margin") {
    Embedding s_same = anchor;  // distance 0
    std::vector<Embedding> far = {at_distance(0.5), at_distance(1.4)};
    CHECK(triplet_loss(anchor, s_same, far, 0.5, NegativeRule::kMinDistance) ==
          0.0);
  }
  SUBCASE("empty negative set throws") {
    CHECK_THROWS_AS(triplet_loss(anchor, same, {}, 0.5), UsageError);
  }
}

TEST_CASE("analytic gradients match central finite differences") {
  Rng rng(20240517);
  for (int config = 0; config < 3; ++config) {
    EncoderParams params = random_params(2, 4, 3, rng.next_u64());
    TrainConfig cfg;
    cfg.layers = 2;
    cfg.hidden = 4;
    cfg.margin = 0.9;
    cfg.dropout_p = 0.0;
    cfg.negative_rule =
        config % 2 == 0 ? NegativeRule::kMinDistance : NegativeRule::kMaxDistance;

    std::vector<FeatureSequence> storage;
    for (int s = 0; s < 10; ++s)
      storage.push_back(
          random_seq(static_cast<std::uint32_t>(rng.next_int(1, 5)), 3, rng));
    std::vector<Triplet> batch(2);
    for (int t = 0; t < 2; ++t) {
      batch[t].anchor = &storage[t * 5];
      batch[t].same = &storage[t * 5 + 1];
      for (int n = 0; n < 3; ++n)
        batch[t].negatives.push_back(&storage[t * 5 + 2 + n]);
    }

    GradientResult analytic = loss_gradients(params, batch, cfg);
    REQUIRE(analytic.mean_loss > 0.0);  // fixture keeps the hinge active
    CHECK(analytic.mean_loss ==
          doctest::Approx(batch_loss(params, batch, cfg)).epsilon(1e-12));

    const double h = 1e-5;
    std::vector<double> numeric;
    for_each_coordinate(params, [&](double& v) {
      double saved = v;
      v = saved + h;
      double up = batch_loss(params, batch, cfg);
      v = saved - h;
      double down = batch_loss(params, batch, cfg);
      v = saved;
      numeric.push_back((up - down) / (2.0 * h));
    });

    std::size_t i = 0;
    double worst = 0.0;
    for_each_coordinate(analytic.grads, [&](double& g) {
      double n = numeric[i++];
      double rel = std::abs(g - n) / std::max({std::abs(g), std::abs(n), 1e-6});
      worst = std::max(worst, rel);
    });
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("gradients with dropout on match finite differences of the same masks") {
  // Dropout masks depend only on the triplet's fixed seeds, so perturbing
  // parameters and re-running loss_gradients evaluates the identical
  // stochastic network; central differences stay valid.
  Rng rng(87);
  EncoderParams params = random_params(2, 3, 2, rng.next_u64());
  TrainConfig cfg;
  cfg.layers = 2;
  cfg.hidden = 3;
  cfg.margin = 0.9;
  cfg.dropout_p = 0.4;

  std::vector<FeatureSequence> storage;
  for (int s = 0; s < 4; ++s)
    storage.push_back(
        random_seq(static_cast<std::uint32_t>(rng.next_int(2, 5)), 2, rng));
  Triplet t;
  t.anchor = &storage[0];
  t.same = &storage[1];
  t.negatives = {&storage[2], &storage[3]};
  t.dropout_seeds = {11, 22, 33, 44};
  std::vector<Triplet> batch = {t};

  GradientResult analytic = loss_gradients(params, batch, cfg);
  REQUIRE(analytic.mean_loss > 0.0);

  const double h = 1e-5;
  double worst = 0.0;
  std::vector<double> flat;
  for_each_coordinate(analytic.grads, [&](double& v) { flat.push_back(v); });
  std::size_t i = 0;
  for_each_coordinate(params, [&](double& v) {
    double saved = v;
    v = saved + h;
    double up = loss_gradients(params, batch, cfg).mean_loss;
    v = saved - h;
    double down = loss_gradients(params, batch, cfg).mean_loss;
    v = saved;
    double numeric = (up - down) / (2.0 * h);
    double rel = std::abs(flat[i] - numeric) /
                 std::max({std::abs(flat[i]), std::abs(numeric), 1e-6});
    worst = std::max(worst, rel);
    ++i;
  });
  CHECK(worst < 1e-4);
}

TEST_CASE("gradients are independent of the worker count") {
  Rng rng(55);
  EncoderParams params = random_params(1, 4, 3, rng.next_u64());
  TrainConfig cfg;
  cfg.layers = 1;
  cfg.hidden = 4;
  cfg.margin = 1.0;
  cfg.dropout_p = 0.0;

  std::vector<FeatureSequence> storage;
  for (int s = 0; s < 15; ++s)
    storage.push_back(
        random_seq(static_cast<std::uint32_t>(rng.next_int(2, 6)), 3, rng));
  std::vector<Triplet> batch(5);
  for (int t = 0; t < 5; ++t) {
    batch[t].anchor = &storage[t * 3];
    batch[t].same = &storage[t * 3 + 1];
    batch[t].negatives = {&storage[t * 3 + 2]};
  }

  set_thread_count(1);
  auto serial = loss_gradients(params, batch, cfg);
  set_thread_count(4);
  auto threaded = loss_gradients(params, batch, cfg);
  set_thread_count(0);

  CHECK(serial.mean_loss == threaded.mean_loss);
  std::vector<double> flat;
  for_each_coordinate(serial.grads, [&](double& v) { flat.push_back(v); });
  std::size_t i = 0;
  for_each_coordinate(threaded.grads, [&](double& v) { CHECK(v == flat[i++]); });
}

TEST_CASE("zero-loss batch yields exactly zero gradients") {
  Rng rng(99);
  EncoderParams params = random_params(1, 3, 2, rng.next_u64());
  auto seq_a = random_seq(4, 2, rng);
  auto seq_n1 = random_seq(3, 2, rng);
  auto seq_n2 = random_seq(5, 2, rng);

  Embedding xa = encode(params, seq_a);
  double dn1 = cosine_distance(xa, encode(params, seq_n1));
  double dn2 = cosine_distance(xa, encode(params, seq_n2));
  double lowest = std::min(dn1, dn2);
  REQUIRE(lowest > 0.0);

  TrainConfig cfg;
  cfg.layers = 1;
  cfg.hidden = 3;
  cfg.margin = std::min(1.9, 0.5 * lowest);  // anchor==same, so z = m - d < 0
  cfg.dropout_p = 0.0;

  Triplet t;
  t.anchor = &seq_a;
  t.same = &seq_a;
  t.negatives = {&seq_n1, &seq_n2};
  GradientResult g = loss_gradients(params, {t}, cfg);
  CHECK(g.mean_loss == 0.0);
  for_each_coordinate(g.grads, [&](double& v) { CHECK(v == 0.0); });
}

TEST_CASE("duplicating a triplet keeps the mean gradient") {
  Rng rng(123);
  EncoderParams params = random_params(1, 4, 3, rng.next_u64());
  auto a1 = random_seq(4, 3, rng), s1 = random_seq(3, 3, rng),
       n1 = random_seq(2, 3, rng);
  auto a2 = random_seq(5, 3, rng), s2 = random_seq(4, 3, rng),
       n2 = random_seq(3, 3, rng);
  TrainConfig cfg;
  cfg.layers = 1;
  cfg.hidden = 4;
  cfg.margin = 1.0;
  cfg.dropout_p = 0.0;

  Triplet t1{&a1, &s1, {&n1}, {}};
  Triplet t2{&a2, &s2, {&n2}, {}};
  auto once = loss_gradients(params, {t1, t2}, cfg);
  auto twice = loss_gradients(params, {t1, t2, t1, t2}, cfg);
  CHECK(once.mean_loss == doctest::Approx(twice.mean_loss).epsilon(1e-12));

  std::vector<double> flat_once;
  for_each_coordinate(once.grads, [&](double& v) { flat_once.push_back(v); });
  std::size_t i = 0;
  for_each_coordinate(twice.grads, [&](double& v) {
    CHECK(std::abs(v - flat_once[i]) <=
          1e-12 * std::max(1.0, std::abs(flat_once[i])));
    ++i;
  });
}

TEST_CASE("adam single step matches the hand-rolled oracle") {
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  EncoderParams params = zero_params(1, 2, 2);
  Rng rng(5);
  for_each_coordinate(params, [&](double& v) { v = rng.next_normal(); });
  EncoderParams grads = zero_params(1, 2, 2);
  for_each_coordinate(grads, [&](double& v) { v = rng.next_normal(); });

  EncoderParams before = params;
  AdamState state = AdamState::zeros(params);
  adam_step(params, grads, state, cfg);
  CHECK(state.step == 1);

  // After one step from zero state the bias corrections cancel:
  // m_hat = g, v_hat = g^2, so theta -= lr * g / (|g| + eps).
  std::vector<double> g_flat, before_flat;
  for_each_coordinate(grads, [&](double& v) { g_flat.push_back(v); });
  for_each_coordinate(before, [&](double& v) { before_flat.push_back(v); });
  std::size_t i = 0;
  for_each_coordinate(params, [&](double& v) {
    double g = g_flat[i];
    double expect =
        before_flat[i] - cfg.learning_rate * g / (std::abs(g) + cfg.epsilon);
    CHECK(v == doctest::Approx(expect).epsilon(1e-12));
    ++i;
  });
}

TEST_CASE("adam leaves params unchanged on zero gradient and zero state") {
  TrainConfig cfg;
  EncoderParams params = random_params(1, 2, 2, 3);
  EncoderParams before = params;
  EncoderParams grads = zero_params(1, 2, 2);
  AdamState state = AdamState::zeros(params);
  adam_step(params, grads, state, cfg);
  std::vector<double> before_flat;
  for_each_coordinate(before, [&](double& v) { before_flat.push_back(v); });
  std::size_t i = 0;
  for_each_coordinate(params, [&](double& v) { CHECK(v == before_flat[i++]); });
}

TEST_CASE("equal gradients get equal updates") {
  TrainConfig cfg;
  EncoderParams params = zero_params(1, 1, 2);
  EncoderParams grads = zero_params(1, 1, 2);
  for_each_coordinate(grads, [&](double& v) { v = 0.37; });
  AdamState state = AdamState::zeros(params);
  adam_step(params, grads, state, cfg);
  double first = params.cells[0].w_in[0];
  for_each_coordinate(params, [&](double& v) { CHECK(v == first); });
}

namespace {

data::SynthConfig tiny_synth() {
  data::SynthConfig cfg;
  cfg.n_types = 4;
  cfg.examples_per_type = 3;
  cfg.proto_len_min = 8;
  cfg.proto_len_max = 12;
  cfg.warp_factor_max = 0.1;
  cfg.noise_sigma = 0.05;
  cfg.filler_len_min = 5;
  cfg.filler_len_max = 10;
  cfg.feature_dim = 4;
  cfg.seed = 321;
  return cfg;
}

TrainConfig tiny_train_config() {
  TrainConfig cfg;
  cfg.layers = 1;
  cfg.hidden = 6;
  cfg.negatives = 2;
  cfg.batch_size = 8;
  cfg.epochs = 2;
  cfg.dropout_p = 0.0;
  cfg.seed = 777;
  return cfg;
}

}  // namespace

TEST_CASE("training is reproducible and epochs=0 returns the initialization") {
  auto corpus = data::synthesize_corpus(tiny_synth());
  TrainConfig cfg = tiny_train_config();

  SUBCASE("epochs = 0") {
    cfg.epochs = 0;
    auto result = train(corpus.train, cfg);
    CHECK(result.history.empty());
    // Untouched init: weights inside [-0.05, 0.05], forget biases exactly 1.
    for (const auto& c : result.params.cells) {
      for (double v : c.w_in) CHECK(std::abs(v) <= 0.05);
      for (std::uint32_t j = cfg.hidden; j < 2 * cfg.hidden; ++j)
        CHECK(c.bias[j] == 1.0);
    }
  }

  SUBCASE("same seed, same trajectory (dropout off, bitwise)") {
    auto r1 = train(corpus.train, cfg);
    auto r2 = train(corpus.train, cfg);
    REQUIRE(r1.history.size() == r2.history.size());
    for (std::size_t e = 0; e < r1.history.size(); ++e)
      CHECK(r1.history[e].mean_loss == r2.history[e].mean_loss);
    std::vector<double> flat1;
    for_each_coordinate(r1.params, [&](double& v) { flat1.push_back(v); });
    std::size_t i = 0;
    for_each_coordinate(r2.params, [&](double& v) { CHECK(v == flat1[i++]); });
  }

  SUBCASE("same seed, same trajectory with dropout on") {
    cfg.dropout_p = 0.3;
    cfg.epochs = 1;
    auto r1 = train(corpus.train, cfg);
    auto r2 = train(corpus.train, cfg);
    CHECK(r1.history[0].mean_loss == r2.history[0].mean_loss);
  }

  SUBCASE("fewer than two types is an error") {
    std::vector<data::WordSegment> single(corpus.train.begin(),
                                          corpus.train.begin() + 3);
    CHECK_THROWS_AS(train(single, cfg), UsageError);
  }
}

TEST_CASE("loss trends down on a separable fixture") {
  auto synth_cfg = tiny_synth();
  synth_cfg.n_types = 5;
  synth_cfg.examples_per_type = 4;
  auto corpus = data::synthesize_corpus(synth_cfg);

  TrainConfig cfg = tiny_train_config();
  cfg.epochs = 20;
  cfg.learning_rate = 0.005;
  auto result = train(corpus.train, cfg);
  REQUIRE(result.history.size() == 20);
  CHECK(result.history[19].mean_loss < result.history[0].mean_loss);
}

TEST_CASE("model file round trip") {
  EncoderParams p = random_params(2, 3, 5, 42);
  std::string path =
      (std::filesystem::temp_directory_path() / "qbe_model_test.qbem").string();
  save_model(p, path);
  EncoderParams back = load_model(path);
  CHECK(back.layers == p.layers);
  CHECK(back.hidden == p.hidden);
  CHECK(back.input_dim == p.input_dim);
  std::vector<double> flat;
  for_each_coordinate(p, [&](double& v) { flat.push_back(v); });
  std::size_t i = 0;
  for_each_coordinate(back, [&](double& v) { CHECK(v == flat[i++]); });

  SUBCASE("bad magic is a format error") {
    std::ofstream out(path, std::ios::binary);
    out << "XXXXGARBAGE";
    out.close();
    CHECK_THROWS_AS(load_model(path), FormatError);
  }
  std::filesystem::remove(path);
}

TEST_CASE("encode rejects mismatched dimensions") {
  EncoderParams p = zero_params(1, 2, 3);
  Rng rng(6);
  CHECK_THROWS_AS(encode(p, random_seq(4, 2, rng)), UsageError);
}
