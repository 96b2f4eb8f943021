#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "gradcheck.hpp"
#include "xferlab/error.hpp"
#include "xferlab/gradcore/adam.hpp"
#include "xferlab/gradcore/ops.hpp"
#include "xferlab/models/models.hpp"

using namespace xferlab;
using namespace xferlab::grad;
using namespace xferlab::models;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0,
                     bool requires_grad = false) {
  std::normal_distribution<double> nd(0.0, scale);
  std::vector<double> v(r * c);
  for (auto& x : v) x = nd(rng);
  auto t = Tensor::matrix(r, c, std::move(v));
  t.set_requires_grad(requires_grad);
  return t;
}

GruCell zero_cell(std::size_t in, std::size_t h) {
  return {Tensor::zeros({in, 3 * h}, true), Tensor::zeros({h, 2 * h}, true),
          Tensor::zeros({h, h}, true), Tensor::zeros({1, 3 * h}, true), h};
}

double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Scalar per-step oracle for one sequence (batch 1).
std::vector<std::vector<double>> gru_oracle(const std::vector<std::vector<double>>& x,
                                            const GruCell& c) {
  const std::size_t h = c.hidden, in = x[0].size();
  const auto wx = c.wx.data(), uzr = c.uzr.data(), uh = c.uh.data(), b = c.b.data();
  std::vector<double> state(h, 0.0);
  std::vector<std::vector<double>> out;
  for (const auto& xt : x) {
    std::vector<double> z(h), r(h), cand(h), next(h);
    for (std::size_t j = 0; j < h; ++j) {
      double az = b[j], ar = b[h + j];
      for (std::size_t i = 0; i < in; ++i) {
        az += xt[i] * wx[i * 3 * h + j];
        ar += xt[i] * wx[i * 3 * h + h + j];
      }
      for (std::size_t i = 0; i < h; ++i) {
        az += state[i] * uzr[i * 2 * h + j];
        ar += state[i] * uzr[i * 2 * h + h + j];
      }
      z[j] = sigm(az);
      r[j] = sigm(ar);
    }
    for (std::size_t j = 0; j < h; ++j) {
      double ac = b[2 * h + j];
      for (std::size_t i = 0; i < in; ++i) ac += xt[i] * wx[i * 3 * h + 2 * h + j];
      for (std::size_t i = 0; i < h; ++i) ac += r[i] * state[i] * uh[i * h + j];
      cand[j] = std::tanh(ac);
    }
    for (std::size_t j = 0; j < h; ++j) next[j] = z[j] * state[j] + (1.0 - z[j]) * cand[j];
    state = next;
    out.push_back(state);
  }
  return out;
}

std::vector<Tensor> tensors(const ParamList& p) {
  std::vector<Tensor> out;
  for (const auto& n : p) out.push_back(n.tensor);
  return out;
}

ArnnConfig tiny_arnn() { return {.freq_bins = 9, .filters = 4, .hidden = 3, .attention = 3}; }

// Time-major random input for n epochs of `frames` x `bins`.
Tensor random_input(std::size_t frames, std::size_t n, std::size_t bins, std::mt19937_64& rng) {
  return random_matrix(frames * n, bins, rng);
}

Tensor labelled_loss(const Tensor& posteriors, const std::vector<std::size_t>& labels) {
  return scale(sum(log(pick(posteriors, labels))), -1.0 / static_cast<double>(labels.size()));
}

}  // namespace

TEST_CASE("filterbank selects bins and checks shapes") {
  std::mt19937_64 rng(1);
  const Tensor spec = random_matrix(29, 129, rng);
  std::vector<double> w(129 * 32, 0.0);
  for (std::size_t d = 0; d < 32; ++d) w[d * 32 + d] = 1.0;
  const Tensor out = filterbank_forward(spec, Tensor::matrix(129, 32, w));
  CHECK(out.shape() == Shape{29, 32});
  for (std::size_t t = 0; t < 29; ++t) {
    for (std::size_t d = 0; d < 32; ++d) CHECK(out.at(t, d) == spec.at(t, d));
  }
  CHECK_THROWS_AS(filterbank_forward(spec, Tensor::zeros({128, 32})), DimensionError);

  const Tensor small = random_matrix(6, 9, rng);
  Tensor weights = random_matrix(9, 4, rng, 0.5, true);
  auto r = testing::gradient_check({weights}, [&] {
    return sum(square(grad::tanh(filterbank_forward(small, weights))));
  });
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("GRU with zero weights and input stays at zero") {
  const GruCell f = zero_cell(4, 3), b = zero_cell(4, 3);
  const Tensor out = bigru_forward(Tensor::zeros({5 * 2, 4}), 5, f, b);
  CHECK(out.shape() == Shape{10, 6});
  for (double v : out.data()) CHECK(v == 0.0);
}

TEST_CASE("GRU matches the scalar oracle") {
  std::mt19937_64 rng(2);
  const GruCell cell = make_gru(3, 2, rng);
  const std::vector<std::vector<double>> x{{0.3, -1.0, 0.5}, {1.2, 0.1, -0.4}, {-0.7, 0.9, 0.2}};
  std::vector<double> flat;
  for (const auto& r : x) flat.insert(flat.end(), r.begin(), r.end());
  const Tensor out = gru_forward(Tensor::matrix(3, 3, flat), 3, cell, false);
  const auto ref = gru_oracle(x, cell);
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(out.at(t, j) - ref[t][j]) < 1e-6);
  }
}

TEST_CASE("backward direction is the forward run on the reversed sequence") {
  std::mt19937_64 rng(3);
  const std::size_t steps = 4, batch = 2;
  const GruCell fwd = make_gru(3, 2, rng), bwd = make_gru(3, 2, rng);
  const Tensor seq = random_matrix(steps * batch, 3, rng);
  std::vector<std::size_t> rev;
  for (std::size_t t = steps; t-- > 0;) {
    for (std::size_t b = 0; b < batch; ++b) rev.push_back(t * batch + b);
  }
  const Tensor both = bigru_forward(seq, steps, fwd, bwd);
  const Tensor manual = gather_rows(gru_forward(gather_rows(seq, rev), steps, bwd, false), rev);
  for (std::size_t i = 0; i < steps * batch; ++i) {
    for (std::size_t j = 0; j < 2; ++j) CHECK(both.at(i, 2 + j) == doctest::Approx(manual.at(i, j)).epsilon(1e-12));
  }
  const Tensor forward_only = gru_forward(seq, steps, fwd, false);
  for (std::size_t i = 0; i < steps * batch; ++i) {
    for (std::size_t j = 0; j < 2; ++j) CHECK(both.at(i, j) == forward_only.at(i, j));
  }
}

TEST_CASE("GRU recurrence gradients agree with finite differences") {
  std::mt19937_64 rng(4);
  GruCell cell = make_gru(3, 3, rng);
  Tensor seq = random_matrix(4 * 2, 3, rng, 1.0, true);
  for (bool reverse : {false, true}) {
    auto r = testing::gradient_check({seq, cell.wx, cell.uzr, cell.uh, cell.b}, [&] {
      return sum(square(gru_forward(seq, 4, cell, reverse)));
    });
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("attention pooling") {
  std::mt19937_64 rng(5);
  const std::size_t steps = 4, batch = 2, k = 3;
  const Tensor states = random_matrix(steps * batch, k, rng);

  SUBCASE("equal scores give the mean") {
    const AttentionParams p{Tensor::zeros({k, 2}), Tensor::zeros({1, 2}), Tensor::zeros({2, 1})};
    const auto res = attention_pool(states, steps, p);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t j = 0; j < k; ++j) {
        double mean = 0.0;
        for (std::size_t t = 0; t < steps; ++t) mean += states.at(t * batch + b, j) / steps;
        CHECK(res.pooled.at(b, j) == doctest::Approx(mean).epsilon(1e-12));
      }
    }
  }

  SUBCASE("a dominant score selects its step") {
    // Score = u * tanh(h W + b) with W reading a marker column; step 2 gets +30.
    std::vector<double> v(steps * batch * (k + 1), 0.0);
    for (std::size_t i = 0; i < steps * batch; ++i) {
      for (std::size_t j = 0; j < k; ++j) v[i * (k + 1) + j] = states.at(i, j);
      v[i * (k + 1) + k] = (i / batch == 2) ? 1.0 : 0.0;
    }
    const Tensor marked = Tensor::matrix(steps * batch, k + 1, v);
    std::vector<double> w(k + 1, 0.0);
    w[k] = 10.0;
    const AttentionParams p{Tensor::matrix(k + 1, 1, w), Tensor::zeros({1, 1}),
                            Tensor::matrix(1, 1, {30.0})};
    const auto res = attention_pool(marked, steps, p);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t j = 0; j < k; ++j) {
        CHECK(std::abs(res.pooled.at(b, j) - marked.at(2 * batch + b, j)) < 1e-6);
      }
    }
  }

  SUBCASE("weights sum to one") {
    const AttentionParams p{random_matrix(k, 4, rng), random_matrix(1, 4, rng),
                            random_matrix(4, 1, rng)};
    const auto res = attention_pool(states, steps, p);
    CHECK(res.weights.shape() == Shape{batch, steps});
    for (std::size_t b = 0; b < batch; ++b) {
      double s = 0.0;
      for (std::size_t t = 0; t < steps; ++t) s += res.weights.at(b, t);
      CHECK(std::abs(s - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("ARNN output shapes, posteriors and determinism") {
  std::mt19937_64 rng(6);
  const ArnnConfig cfg{.freq_bins = 129, .filters = 8, .hidden = 5, .attention = 4};
  const Arnn net(cfg, rng);
  const Tensor x = random_input(29, 3, 129, rng);
  const auto a = net.forward(x, 3);
  const auto b = net.forward(x, 3);
  CHECK(a.features.shape() == Shape{3, 10});
  CHECK(a.posteriors.shape() == Shape{3, 5});
  for (std::size_t i = 0; i < 3; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 5; ++j) {
      CHECK(a.posteriors.at(i, j) >= 0.0);
      s += a.posteriors.at(i, j);
    }
    CHECK(std::abs(s - 1.0) < 1e-6);
  }
  CHECK(std::ranges::equal(a.posteriors.data(), b.posteriors.data()));
  CHECK(std::ranges::equal(a.features.data(), b.features.data()));

  const Tensor zeros = Tensor::zeros({29 * 3, 129});
  CHECK(net.forward(zeros, 3).features.shape() == Shape{3, 10});
}

TEST_CASE("SeqSleepNet sequence handling") {
  std::mt19937_64 rng(7);
  SeqConfig cfg{.encoder = {.freq_bins = 20, .filters = 4, .hidden = 3, .attention = 3},
                .seq_hidden = 3, .seq_len = 10};
  const SeqSleepNet net(cfg, rng);
  const Tensor x = random_input(6, 10, 20, rng);
  const auto out = net.forward(x, 1);
  CHECK(out.posteriors.shape() == Shape{10, 5});
  CHECK(out.features.shape() == Shape{10, 6});
  CHECK_THROWS_AS(net.forward(random_input(6, 9, 20, rng), 1), DimensionError);

  cfg.seq_len = 1;
  const SeqSleepNet single(cfg, rng);
  CHECK(single.forward(random_input(6, 1, 20, rng), 1).posteriors.shape() == Shape{1, 5});

  // Permute the epochs (whole frame blocks) and compare per-epoch outputs.
  std::vector<std::size_t> perm(10);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  if (std::is_sorted(perm.begin(), perm.end())) std::swap(perm[0], perm[1]);
  std::vector<std::size_t> rows;
  for (std::size_t t = 0; t < 6; ++t) {
    for (std::size_t e = 0; e < 10; ++e) rows.push_back(t * 10 + perm[e]);
  }
  const auto permuted = net.forward(gather_rows(x, rows), 1);
  double diff = 0.0;
  for (std::size_t e = 0; e < 10; ++e) {
    for (std::size_t j = 0; j < 5; ++j) {
      diff = std::max(diff, std::abs(permuted.posteriors.at(e, j) - out.posteriors.at(perm[e], j)));
    }
  }
  CHECK(diff > 1e-9);
}

TEST_CASE("split and merge parameters") {
  std::mt19937_64 rng(8);
  NetworkConfig cfg;
  cfg.arnn = tiny_arnn();
  cfg.seq = {.encoder = tiny_arnn(), .seq_hidden = 3, .seq_len = 3};
  for (auto arch : {Architecture::arnn, Architecture::seqsleepnet}) {
    cfg.architecture = arch;
    const auto net = make_network(cfg, rng);
    const auto all = net->params();
    const auto parts = split_params(all);
    CHECK(parts.classifier.size() == 2);
    CHECK(parts.classifier[0].tensor.rank() == 2);
    CHECK(parts.classifier[0].name.ends_with("classifier.W"));
    CHECK(parts.classifier[1].name.ends_with("classifier.b"));
    CHECK(parts.classifier[1].tensor.shape() == Shape{1, 5});
    for (const auto& p : parts.feature_extractor) CHECK(p.name.find("classifier") == std::string::npos);
    CHECK(parts.feature_extractor.size() + 2 == all.size());
    const auto merged = merge_params(parts);
    REQUIRE(merged.size() == all.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
      CHECK(merged[i].name == all[i].name);
      CHECK(merged[i].tensor.id() == all[i].tensor.id());
      CHECK(std::ranges::equal(merged[i].tensor.data(), all[i].tensor.data()));
    }
  }
  CHECK(architecture_name(Architecture::seqsleepnet) == "seqsleepnet");
  CHECK_THROWS_AS(parse_architecture("lstm"), ConfigError);
}

TEST_CASE("end-to-end gradient check on both architectures") {
  std::mt19937_64 rng(9);
  NetworkConfig cfg;
  cfg.arnn = tiny_arnn();
  cfg.seq = {.encoder = tiny_arnn(), .seq_hidden = 3, .seq_len = 3};
  for (auto arch : {Architecture::arnn, Architecture::seqsleepnet}) {
    CAPTURE(architecture_name(arch));
    cfg.architecture = arch;
    const auto net = make_network(cfg, rng);
    const std::size_t batch = 2, n = batch * net->sequence_length();
    const Tensor x = random_input(5, n, 9, rng);
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = i % 5;
    auto r = testing::gradient_check(tensors(net->params()), [&] {
      const auto out = net->forward(x, batch);
      return add(labelled_loss(out.posteriors, labels), scale(mean(square(out.features)), 0.3));
    });
    CHECK(r.max_rel_error < 1e-4);
    CHECK(r.checked > 100);
  }
}

TEST_CASE("both architectures overfit a fixed 32-sample batch") {
  std::mt19937_64 rng(10);
  const std::size_t frames = 29, bins = 129;
  // Class-dependent spectral bumps plus noise: learnable but not trivial.
  auto make_epoch = [&](std::size_t label) {
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> v(frames * bins);
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t f = 0; f < bins; ++f) {
        const double centre = 8.0 + 25.0 * static_cast<double>(label);
        const double bump = std::exp(-0.5 * std::pow((static_cast<double>(f) - centre) / 6.0, 2));
        v[t * bins + f] = 1.5 * bump + 0.5 * nd(rng);
      }
    }
    return v;
  };

  NetworkConfig cfg;
  cfg.arnn = {.freq_bins = bins, .filters = 8, .hidden = 16, .attention = 8};
  cfg.seq = {.encoder = cfg.arnn, .seq_hidden = 16, .seq_len = 2};
  for (auto arch : {Architecture::arnn, Architecture::seqsleepnet}) {
    CAPTURE(architecture_name(arch));
    cfg.architecture = arch;
    auto net = make_network(cfg, rng);
    const std::size_t m = net->sequence_length();
    const std::size_t batch = 32 / m, n = batch * m;
    std::vector<std::size_t> labels(n);
    std::vector<double> flat(frames * n * bins);
    for (std::size_t e = 0; e < n; ++e) {
      labels[e] = (e * 7 + e / 5) % 5;
      const auto v = make_epoch(labels[e]);
      for (std::size_t t = 0; t < frames; ++t) {
        std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(t * bins), bins,
                    flat.begin() + static_cast<std::ptrdiff_t>((t * n + e) * bins));
      }
    }
    const Tensor x = Tensor::matrix(frames * n, bins, flat);
    auto params = tensors(net->params());
    auto state = make_adam_state(params, AdamConfig{.lr = 1e-4});
    double best = 0.0;
    for (int step = 0; step < 500 && best < 0.99; ++step) {
      for (auto& p : params) p.zero_grad();
      const auto out = net->forward(x, batch);
      std::size_t correct = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto row = out.posteriors.data().subspan(i * 5, 5);
        correct += static_cast<std::size_t>(std::ranges::max_element(row) - row.begin()) == labels[i];
      }
      best = std::max(best, static_cast<double>(correct) / static_cast<double>(n));
      backward(labelled_loss(out.posteriors, labels));
      adam_step(params, state);
    }
    CHECK(best >= 0.99);
  }
}
