#include "xferlab/transfer/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <ostream>

#include "xferlab/error.hpp"
#include "xferlab/eval/eval.hpp"
#include "xferlab/gradcore/adam.hpp"
#include "xferlab/gradcore/ops.hpp"
#include "xferlab/rng.hpp"

namespace xferlab::transfer {

using namespace grad;
using data::EpochStore;
using data::WindowRef;
using models::StagingNetwork;

namespace {

constexpr std::uint64_t kInitTag = 0x696e6974ULL;
constexpr std::uint64_t kShuffleTag = 0x73687566ULL;

void require_row_stochastic(const Tensor& p, const char* what) {
  if (p.rank() != 2 || p.cols() != kNumStages) {
    throw ContractError(std::string(what) + ": expected n x 5 posteriors, got " + shape_str(p.shape()));
  }
  const auto v = p.data();
  for (std::size_t i = 0; i < p.rows(); ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < kNumStages; ++k) {
      const double x = v[i * kNumStages + k];
      if (!(x >= 0.0) || !std::isfinite(x)) {
        throw ContractError(std::string(what) + ": row " + std::to_string(i) + " is not a distribution");
      }
      s += x;
    }
    if (std::abs(s - 1.0) > 1e-6) {
      throw ContractError(std::string(what) + ": row " + std::to_string(i) + " sums to " + std::to_string(s));
    }
  }
}

std::vector<std::size_t> as_index(std::span<const std::uint8_t> labels) {
  std::vector<std::size_t> out(labels.begin(), labels.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] >= kNumStages) {
      throw ContractError("label " + std::to_string(out[i]) + " out of range at index " + std::to_string(i));
    }
  }
  return out;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return s;
}

// A window drawn from one of several stores (feature matching mixes two).
struct Draw {
  const EpochStore* store;
  WindowRef window;
};

Tensor stack_draws(std::span<const Draw> draws, std::size_t m, Modality modality) {
  const std::size_t b = draws.size();
  std::vector<const preproc::EpochTensor*> epochs(b * m);
  for (std::size_t w = 0; w < b; ++w) {
    for (std::size_t k = 0; k < m; ++k) {
      epochs[k * b + w] = &draws[w].store->epoch(draws[w].window.recording, modality, draws[w].window.start + k);
    }
  }
  return models::stack_time_major(epochs);
}

std::vector<std::uint8_t> draw_labels(std::span<const Draw> draws, std::size_t m) {
  const std::size_t b = draws.size();
  std::vector<std::uint8_t> out(b * m);
  for (std::size_t w = 0; w < b; ++w) {
    for (std::size_t k = 0; k < m; ++k) {
      out[k * b + w] = draws[w].store->label(draws[w].window.recording, draws[w].window.start + k);
    }
  }
  return out;
}

double val_accuracy(const StagingNetwork& net, const EpochStore& store,
                    std::span<const std::size_t> ids, Modality modality) {
  const auto p = eval::predict(net, store, ids, modality);
  return eval::accuracy(eval::confusion_matrix(p.pred, p.truth));
}

// Shared optimisation loop. `step_loss` builds the loss for batch i of the
// current epoch; `validate` scores the network being selected; `snapshot`
// returns a copy of it.
struct LoopHooks {
  std::function<std::size_t(std::mt19937_64&)> begin_epoch;  // returns batch count
  std::function<LossBreakdown(std::size_t)> step_loss;
  std::function<double()> validate;
  std::function<std::unique_ptr<StagingNetwork>()> snapshot;
};

StrategyResult optimise(const TransferPlan& plan, std::size_t epochs, std::vector<Tensor> params,
                        std::mt19937_64& rng, const LoopHooks& hooks) {
  StrategyResult result;
  auto adam = make_adam_state(params, AdamConfig{.lr = plan.lr});
  std::size_t step = 0;
  bool evaluated = false;
  auto run_validation = [&](LogRow& row) {
    const double acc = hooks.validate();
    row.val_accuracy = acc;
    evaluated = true;
    if (!result.best_step || acc > result.best_val_accuracy) {
      result.best_val_accuracy = acc;
      result.best_step = row.step;
      result.network = hooks.snapshot();
    }
  };
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    const std::size_t batches = hooks.begin_epoch(rng);
    for (std::size_t b = 0; b < batches; ++b) {
      for (auto& p : params) p.zero_grad();
      const LossBreakdown loss = hooks.step_loss(b);
      backward(loss.total_tensor);
      adam_step(params, adam);
      ++step;
      LogRow row{.step = step, .ce_source = loss.ce_source, .ce_target = loss.ce_target,
                 .match = loss.match, .l2 = loss.l2, .total = loss.total, .val_accuracy = {}};
      if (step % plan.val_every == 0) run_validation(row);
      result.log.push_back(row);
    }
  }
  if (!evaluated && !result.log.empty()) run_validation(result.log.back());
  result.optimizer_steps = step;
  if (!result.network) result.network = hooks.snapshot();
  return result;
}

// Plain classification training on one modality of one store.
StrategyResult train_classifier(const TransferPlan& plan, StagingNetwork& net,
                                const StagingNetwork* frozen, const EpochStore& store,
                                std::span<const std::size_t> train_ids,
                                std::span<const std::size_t> val_ids, Modality modality,
                                std::size_t epochs, std::mt19937_64& rng) {
  const std::size_t m = net.sequence_length();
  const auto pool = make_pool(store, train_ids, m);
  if (pool.empty()) throw ContractError("training pool is empty");
  const auto params = net.params();
  std::vector<std::vector<std::size_t>> batches;
  LoopHooks hooks;
  hooks.begin_epoch = [&](std::mt19937_64& r) {
    batches = shuffled_batches(pool.size(), plan.finetune_batch, r);
    return batches.size();
  };
  hooks.step_loss = [&](std::size_t i) {
    std::vector<Draw> draws;
    for (std::size_t idx : batches[i]) draws.push_back({&store, pool[idx]});
    const Tensor x = stack_draws(draws, m, modality);
    const auto labels = draw_labels(draws, m);
    const auto out = net.forward(x, draws.size());
    Tensor frozen_post;
    if (frozen) {
      NoGradGuard no_grad;
      frozen_post = frozen->forward(x, draws.size()).posteriors;
    }
    auto loss = classification_loss(out, labels, m, plan.lambda2, params, frozen_post,
                                    frozen ? plan.lambda_kl : 0.0);
    if (modality == Modality::source) std::swap(loss.ce_source, loss.ce_target);
    return loss;
  };
  hooks.validate = [&] { return val_accuracy(net, store, val_ids, modality); };
  hooks.snapshot = [&] { return net.clone(); };
  return optimise(plan, epochs, tensors_of(params), rng, hooks);
}

StrategyResult train_feature_match(const TransferPlan& plan, const TrainingData& data,
                                   const StagingNetwork& pretrained, std::mt19937_64& rng) {
  if (!data.source_store) throw ConfigError("feature_match needs a source dataset");
  const std::size_t m = pretrained.sequence_length();
  auto source_net = pretrained.clone();
  auto target_net = pretrained.clone();
  const auto target_pool = make_pool(*data.target_store, data.train_ids, m);
  const auto source_pool = make_pool(*data.source_store, data.source_ids, m);
  if (target_pool.empty() || source_pool.empty()) throw ContractError("feature_match: empty pool");
  const auto spec = MinibatchSpec::from_sizes(source_pool.size(), target_pool.size(), plan.n_target_pairs);

  grad::ParamList params = source_net->params();
  for (auto& p : target_net->params()) params.push_back({"target." + p.name, p.tensor});
  const LossWeights weights{.lambda1 = spec.lambda1(), .lambda2 = plan.lambda2, .match = plan.match};

  std::vector<Minibatch> batches;
  LoopHooks hooks;
  hooks.begin_epoch = [&](std::mt19937_64& r) {
    batches = build_minibatches(source_pool.size(), target_pool.size(), spec, r);
    return batches.size();
  };
  hooks.step_loss = [&](std::size_t i) {
    const auto& mb = batches[i];
    std::vector<Draw> source_draws, target_draws;
    for (std::size_t idx : mb.paired) {
      source_draws.push_back({data.target_store, target_pool[idx]});
      target_draws.push_back({data.target_store, target_pool[idx]});
    }
    for (std::size_t idx : mb.source_only) source_draws.push_back({data.source_store, source_pool[idx]});
    FeatureMatchBatch batch;
    batch.n_pairs = mb.paired.size();
    batch.seq_len = m;
    batch.source = source_net->forward(stack_draws(source_draws, m, Modality::source), source_draws.size());
    batch.target = target_net->forward(stack_draws(target_draws, m, Modality::target), target_draws.size());
    batch.source_labels = draw_labels(source_draws, m);
    batch.target_labels = draw_labels(target_draws, m);
    return combined_loss(batch, weights, params);
  };
  hooks.validate = [&] { return val_accuracy(*target_net, *data.target_store, data.val_ids, Modality::target); };
  hooks.snapshot = [&] { return target_net->clone(); };
  return optimise(plan, plan.transfer_epochs, tensors_of(params), rng, hooks);
}

}  // namespace

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::scratch: return "scratch";
    case Strategy::direct: return "direct";
    case Strategy::finetune: return "finetune";
    case Strategy::finetune_kl: return "finetune_kl";
    case Strategy::feature_match: return "feature_match";
  }
  return "?";
}

Strategy parse_strategy(const std::string& name) {
  for (auto s : {Strategy::scratch, Strategy::direct, Strategy::finetune, Strategy::finetune_kl,
                 Strategy::feature_match}) {
    if (strategy_name(s) == name) return s;
  }
  throw ConfigError("unknown strategy '" + name +
                    "' (expected scratch, direct, finetune, finetune_kl or feature_match)");
}

std::string match_kind_name(MatchKind k) { return k == MatchKind::mse ? "mse" : "mmd"; }

MatchKind parse_match_kind(const std::string& name) {
  if (name == "mse") return MatchKind::mse;
  if (name == "mmd") return MatchKind::mmd;
  throw ConfigError("unknown matching loss '" + name + "' (expected mse or mmd)");
}

Tensor cross_entropy(const Tensor& posteriors, std::span<const std::uint8_t> labels) {
  if (posteriors.rank() != 2 || posteriors.cols() != kNumStages) {
    throw DimensionError("cross_entropy: expected n x 5 posteriors, got " + shape_str(posteriors.shape()));
  }
  if (labels.size() != posteriors.rows()) {
    throw ContractError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                        std::to_string(posteriors.rows()) + " rows");
  }
  const auto index = as_index(labels);
  return scale(mean(log_floored(pick(posteriors, index), preproc::kLogFloor)), -1.0);
}

Tensor mse_match(const Tensor& f_s, const Tensor& f_t) {
  if (f_s.shape() != f_t.shape()) {
    throw DimensionError("mse_match: feature shapes " + shape_str(f_s.shape()) + " and " +
                         shape_str(f_t.shape()) + " differ");
  }
  return mean(square(sub(f_s, f_t)));
}

double mmd_bandwidth(const Tensor& f_s, const Tensor& f_t) {
  const std::size_t n = f_s.rows(), m = f_t.rows(), d = f_s.cols();
  std::vector<std::span<const double>> rows;
  for (std::size_t i = 0; i < n; ++i) rows.push_back(f_s.data().subspan(i * d, d));
  for (std::size_t i = 0; i < m; ++i) rows.push_back(f_t.data().subspan(i * d, d));
  std::vector<double> dist;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = i + 1; j < rows.size(); ++j) dist.push_back(std::sqrt(squared_distance(rows[i], rows[j])));
  }
  const auto mid = dist.begin() + static_cast<std::ptrdiff_t>(dist.size() / 2);
  std::nth_element(dist.begin(), mid, dist.end());
  double med = *mid;
  if (dist.size() % 2 == 0) med = 0.5 * (med + *std::max_element(dist.begin(), mid));
  return med > 1e-12 ? med : 1.0;
}

Tensor mmd_match(const Tensor& f_s, const Tensor& f_t, double bandwidth) {
  if (f_s.rank() != 2 || f_t.rank() != 2 || f_s.cols() != f_t.cols()) {
    throw DimensionError("mmd_match: feature shapes " + shape_str(f_s.shape()) + " and " +
                         shape_str(f_t.shape()) + " are incompatible");
  }
  const std::size_t n = f_s.rows(), m = f_t.rows(), d = f_s.cols();
  if (n < 2 || m < 2) throw ContractError("mmd_match: need at least 2 samples per side");
  const double bw = bandwidth > 0.0 ? bandwidth : mmd_bandwidth(f_s, f_t);
  const double inv2s2 = 1.0 / (2.0 * bw * bw);
  const auto xs = f_s.data(), ys = f_t.data();
  auto row = [d](std::span<const double> v, std::size_t i) { return v.subspan(i * d, d); };
  auto kern = [&](std::span<const double> a, std::span<const double> b) {
    return std::exp(-squared_distance(a, b) * inv2s2);
  };
  const double cxx = 1.0 / (static_cast<double>(n) * static_cast<double>(n - 1));
  const double cyy = 1.0 / (static_cast<double>(m) * static_cast<double>(m - 1));
  const double cxy = 2.0 / (static_cast<double>(n) * static_cast<double>(m));
  double value = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) value += cxx * kern(row(xs, i), row(xs, j));
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (i != j) value += cyy * kern(row(ys, i), row(ys, j));
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) value -= cxy * kern(row(xs, i), row(ys, j));
  }
  return make_result({1, 1}, {value}, {f_s, f_t}, [=](Node& self) {
    Node& a = *self.parents[0];
    Node& b = *self.parents[1];
    const double g = self.grad[0];
    const auto x = std::span<const double>(a.value), y = std::span<const double>(b.value);
    // d k(u, v) / du = -k (u - v) / s^2 = -2 inv2s2 k (u - v)
    auto accumulate = [&](std::vector<double>& out, std::size_t i, std::span<const double> u,
                          std::span<const double> v, double coeff) {
      const double k = std::exp(-squared_distance(u, v) * inv2s2);
      for (std::size_t c = 0; c < d; ++c) out[i * d + c] += g * coeff * (-2.0 * inv2s2) * k * (u[c] - v[c]);
    };
    if (a.requires_grad) {
      auto& ga = a.ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          if (i != j) accumulate(ga, i, row(x, i), row(x, j), 2.0 * cxx);
        }
        for (std::size_t j = 0; j < m; ++j) accumulate(ga, i, row(x, i), row(y, j), -cxy);
      }
    }
    if (b.requires_grad) {
      auto& gb = b.ensure_grad();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
          if (i != j) accumulate(gb, i, row(y, i), row(y, j), 2.0 * cyy);
        }
        for (std::size_t j = 0; j < n; ++j) accumulate(gb, i, row(y, i), row(x, j), -cxy);
      }
    }
  });
}

Tensor kl_posterior_reg(const Tensor& p_current, const Tensor& p_frozen) {
  require_row_stochastic(p_current, "kl_posterior_reg");
  require_row_stochastic(p_frozen, "kl_posterior_reg");
  if (p_current.shape() != p_frozen.shape()) {
    throw DimensionError("kl_posterior_reg: shapes " + shape_str(p_current.shape()) + " and " +
                         shape_str(p_frozen.shape()) + " differ");
  }
  const Tensor frozen = p_frozen.detach();
  const Tensor terms = mul(frozen, sub(log_floored(frozen, preproc::kLogFloor),
                                       log_floored(p_current, preproc::kLogFloor)));
  return scale(sum(terms), 1.0 / static_cast<double>(p_current.rows()));
}

LossBreakdown combined_loss(const FeatureMatchBatch& batch, const LossWeights& weights,
                            const grad::ParamList& params) {
  const std::size_t m = batch.seq_len;
  if (m == 0) throw ContractError("combined_loss: sequence length is 0");
  const std::size_t src_rows = batch.source.posteriors.rows();
  if (src_rows % m != 0) throw ContractError("combined_loss: source rows not a multiple of M");
  const std::size_t b_src = src_rows / m;
  const std::size_t np = batch.n_pairs;
  if (np == 0 || np > b_src) {
    throw ContractError("combined_loss: " + std::to_string(np) + " paired samples in a batch of " +
                        std::to_string(b_src));
  }
  if (!batch.target.posteriors.defined() || batch.target.posteriors.rows() != np * m ||
      !batch.target.features.defined() || batch.target.features.rows() != np * m) {
    throw ContractError("combined_loss: every paired sample needs its target-modality half (" +
                        std::to_string(np * m) + " target rows expected)");
  }
  if (batch.source_labels.size() != src_rows || batch.target_labels.size() != np * m) {
    throw ContractError("combined_loss: label counts do not match the outputs");
  }

  const Tensor ce_s = scale(cross_entropy(batch.source.posteriors, batch.source_labels), static_cast<double>(b_src));
  const Tensor ce_t = scale(cross_entropy(batch.target.posteriors, batch.target_labels), static_cast<double>(np));
  std::vector<std::size_t> paired_rows;
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t b = 0; b < np; ++b) paired_rows.push_back(k * b_src + b);
  }
  const Tensor f_s = gather_rows(batch.source.features, paired_rows);
  const Tensor per_pair = weights.match == MatchKind::mse ? mse_match(f_s, batch.target.features)
                                                          : mmd_match(f_s, batch.target.features);
  const Tensor match = scale(per_pair, static_cast<double>(np));
  const Tensor l2 = squared_l2(params);
  const Tensor total = add(add(ce_s, ce_t), add(scale(match, weights.lambda1), scale(l2, weights.lambda2)));

  LossBreakdown out;
  out.ce_source = ce_s.item();
  out.ce_target = ce_t.item();
  out.match = match.item();
  out.l2 = l2.item();
  out.lambda1 = weights.lambda1;
  out.lambda2 = weights.lambda2;
  out.total = total.item();
  out.total_tensor = total;
  return out;
}

LossBreakdown classification_loss(const models::ModelOutput& out,
                                  std::span<const std::uint8_t> labels, std::size_t seq_len,
                                  double lambda2, const grad::ParamList& params,
                                  const Tensor& frozen_posteriors, double lambda_kl) {
  const std::size_t rows = out.posteriors.rows();
  if (seq_len == 0 || rows % seq_len != 0) throw ContractError("classification_loss: rows not a multiple of M");
  const double samples = static_cast<double>(rows / seq_len);
  const Tensor ce = scale(cross_entropy(out.posteriors, labels), samples);
  const Tensor l2 = squared_l2(params);
  Tensor total = add(ce, scale(l2, lambda2));
  LossBreakdown r;
  if (frozen_posteriors.defined()) {
    const Tensor kl = scale(kl_posterior_reg(out.posteriors, frozen_posteriors), samples);
    total = add(total, scale(kl, lambda_kl));
    r.match = kl.item();
    r.lambda1 = lambda_kl;
  }
  r.ce_target = ce.item();
  r.l2 = l2.item();
  r.lambda2 = lambda2;
  r.total = total.item();
  r.total_tensor = total;
  return r;
}

MinibatchSpec MinibatchSpec::from_sizes(std::size_t n_source, std::size_t n_target,
                                        std::size_t n_target_pairs) {
  if (n_target == 0 || n_target_pairs == 0) throw ContractError("minibatch spec: empty target pool");
  MinibatchSpec s;
  s.n_target_pairs = n_target_pairs;
  s.ratio = static_cast<double>(n_source) / static_cast<double>(n_target);
  s.n_source_only = static_cast<std::size_t>(std::llround(static_cast<double>(n_target_pairs) * s.ratio));
  return s;
}

double MinibatchSpec::nominal_total() const {
  const double pairs = static_cast<double>(n_target_pairs);
  return pairs + pairs * ratio;
}

std::vector<std::vector<std::size_t>> shuffled_batches(std::size_t n, std::size_t batch,
                                                       std::mt19937_64& rng) {
  if (batch == 0) throw ContractError("batch size must be positive");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; i += batch) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch)));
  }
  return out;
}

std::vector<Minibatch> build_minibatches(std::size_t n_source_pool, std::size_t n_target_pool,
                                         const MinibatchSpec& spec, std::mt19937_64& rng) {
  if (n_source_pool == 0 || n_target_pool == 0) throw ContractError("build_minibatches: empty pool");
  const auto target = shuffled_batches(n_target_pool, spec.n_target_pairs, rng);
  std::vector<std::size_t> source(n_source_pool);
  std::iota(source.begin(), source.end(), 0);
  std::shuffle(source.begin(), source.end(), rng);
  const std::size_t k = target.size();
  std::vector<Minibatch> out(k);
  for (std::size_t i = 0; i < k; ++i) {
    out[i].paired = target[i];
    const std::size_t lo = i * n_source_pool / k, hi = (i + 1) * n_source_pool / k;
    out[i].source_only.assign(source.begin() + static_cast<std::ptrdiff_t>(lo),
                              source.begin() + static_cast<std::ptrdiff_t>(hi));
  }
  return out;
}

void TransferPlan::validate() const {
  if (pretrain_epochs == 0 || transfer_epochs == 0) throw ConfigError("epochs must be positive");
  if (val_every == 0) throw ConfigError("val_every must be positive");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be positive");
  if (finetune_batch == 0 || n_target_pairs == 0) throw ConfigError("batch sizes must be positive");
  if (!(lambda2 >= 0.0) || !(lambda_kl >= 0.0)) throw ConfigError("loss weights must be >= 0");
}

std::vector<WindowRef> make_pool(const EpochStore& store, std::span<const std::size_t> ids, std::size_t m) {
  std::vector<WindowRef> pool;
  for (std::size_t id : ids) {
    for (std::size_t s : data::sample_sequences(store.n_epochs(id), m, 1)) pool.push_back({id, s});
  }
  return pool;
}

StrategyResult run_strategy(const TransferPlan& plan, const TrainingData& data,
                            const StagingNetwork* pretrained, const models::NetworkConfig& network) {
  plan.validate();
  if (!data.target_store) throw ConfigError("run_strategy: no target dataset");
  const bool needs_pretrained = plan.strategy != Strategy::scratch;
  if (needs_pretrained && !pretrained) {
    throw ConfigError("strategy " + strategy_name(plan.strategy) + " needs a pretrained checkpoint");
  }
  std::mt19937_64 rng(derive_seed({plan.seed, kShuffleTag}));
  switch (plan.strategy) {
    case Strategy::direct: {
      StrategyResult r;
      r.network = pretrained->clone();
      return r;
    }
    case Strategy::scratch: {
      std::mt19937_64 init(derive_seed({plan.seed, kInitTag}));
      auto net = models::make_network(network, init);
      return train_classifier(plan, *net, nullptr, *data.target_store, data.train_ids, data.val_ids,
                              Modality::target, plan.transfer_epochs, rng);
    }
    case Strategy::finetune:
    case Strategy::finetune_kl: {
      auto net = pretrained->clone();
      const StagingNetwork* frozen = plan.strategy == Strategy::finetune_kl ? pretrained : nullptr;
      return train_classifier(plan, *net, frozen, *data.target_store, data.train_ids, data.val_ids,
                              Modality::target, plan.transfer_epochs, rng);
    }
    case Strategy::feature_match:
      return train_feature_match(plan, data, *pretrained, rng);
  }
  throw ConfigError("unknown strategy");
}

StrategyResult pretrain(const TransferPlan& plan, const EpochStore& store,
                        std::span<const std::size_t> train_ids, std::span<const std::size_t> val_ids,
                        const models::NetworkConfig& network) {
  plan.validate();
  std::mt19937_64 init(derive_seed({plan.seed, kInitTag}));
  std::mt19937_64 rng(derive_seed({plan.seed, kShuffleTag}));
  auto net = models::make_network(network, init);
  return train_classifier(plan, *net, nullptr, store, train_ids, val_ids, Modality::source,
                          plan.pretrain_epochs, rng);
}

void write_log_csv(std::ostream& out, std::span<const LogRow> log) {
  out << "step,ce_source,ce_target,match,l2,total,val_accuracy\n";
  for (const auto& r : log) {
    out << r.step << ',' << eval::format_number(r.ce_source) << ',' << eval::format_number(r.ce_target)
        << ',' << eval::format_number(r.match) << ',' << eval::format_number(r.l2) << ','
        << eval::format_number(r.total) << ',';
    if (r.val_accuracy) out << eval::format_number(*r.val_accuracy);
    out << "\n";
  }
}

}  // namespace xferlab::transfer
