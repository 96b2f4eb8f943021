#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "xferlab/data/data.hpp"
#include "xferlab/gradcore/params.hpp"
#include "xferlab/gradcore/tensor.hpp"
#include "xferlab/models/models.hpp"

namespace xferlab::transfer {

using grad::Tensor;

enum class Strategy { scratch, direct, finetune, finetune_kl, feature_match };
enum class MatchKind { mse, mmd };

std::string strategy_name(Strategy s);
Strategy parse_strategy(const std::string& name);  // ConfigError on unknown names
std::string match_kind_name(MatchKind k);
MatchKind parse_match_kind(const std::string& name);

// Mean over rows of -log max(p[label], 1e-12). ContractError on labels > 4
// or a label count that differs from the row count.
Tensor cross_entropy(const Tensor& posteriors, std::span<const std::uint8_t> labels);

// Mean over all entries of (f_s - f_t)^2. DimensionError on shape mismatch.
Tensor mse_match(const Tensor& f_s, const Tensor& f_t);

// Unbiased squared MMD with a Gaussian kernel exp(-|x - y|^2 / (2 s^2)), s =
// median pairwise distance of the pooled samples (held constant for the
// gradient). ContractError when either side has fewer than 2 rows. A
// positive `bandwidth` replaces the median heuristic.
Tensor mmd_match(const Tensor& f_s, const Tensor& f_t, double bandwidth = 0.0);
// Bandwidth used by mmd_match for these samples.
double mmd_bandwidth(const Tensor& f_s, const Tensor& f_t);

// Mean over rows of KL(p_frozen || p_current) with logs floored at 1e-12.
// ContractError unless both inputs are row-stochastic (within 1e-6).
Tensor kl_posterior_reg(const Tensor& p_current, const Tensor& p_frozen);

struct LossBreakdown {
  double ce_source = 0.0;
  double ce_target = 0.0;
  double match = 0.0;
  double l2 = 0.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double total = 0.0;
  Tensor total_tensor;  // the optimized scalar
};

struct LossWeights {
  double lambda1 = 1.0;
  double lambda2 = 1e-4;
  MatchKind match = MatchKind::mse;
};

// Outputs of one feature-matching step. Rows are position-major over
// samples (row = m * B + b). In `source`, samples 0..n_pairs-1 are the
// source halves of the paired samples and the rest are source-only samples;
// `target` holds the target halves of the paired samples.
struct FeatureMatchBatch {
  models::ModelOutput source;
  models::ModelOutput target;
  std::vector<std::uint8_t> source_labels;
  std::vector<std::uint8_t> target_labels;
  std::size_t n_pairs = 0;
  std::size_t seq_len = 1;
};

// Loss terms summed over the minibatch (a sequence sample contributes its
// mean over the M positions):
//   total = ce_source + ce_target + lambda1 * match + lambda2 * l2
// with match summed over the paired samples only and l2 = sum of squared
// weights of `params`. ContractError when a paired sample lacks its target
// half or label counts disagree with the outputs.
LossBreakdown combined_loss(const FeatureMatchBatch& batch, const LossWeights& weights,
                            const grad::ParamList& params);

// Sum-over-minibatch classification loss used by scratch, finetuning and
// pretraining, optionally with the KL term (reported in `match`, weight in
// `lambda1`). `frozen` may be undefined.
LossBreakdown classification_loss(const models::ModelOutput& out,
                                  std::span<const std::uint8_t> labels, std::size_t seq_len,
                                  double lambda2, const grad::ParamList& params,
                                  const Tensor& frozen_posteriors = {}, double lambda_kl = 0.0);

// Minibatch composition for feature matching: n_target_pairs paired samples
// plus source-only samples in proportion to the dataset sizes.
struct MinibatchSpec {
  std::size_t n_target_pairs = 8;
  std::size_t n_source_only = 8;
  double ratio = 1.0;  // N_sd / N_td

  static MinibatchSpec from_sizes(std::size_t n_source, std::size_t n_target,
                                  std::size_t n_target_pairs = 8);
  std::size_t total() const { return n_target_pairs + n_source_only; }
  // 8 + 8 * N_sd / N_td, before rounding.
  double nominal_total() const;
  double lambda1() const { return nominal_total() / static_cast<double>(n_target_pairs); }
};

struct Minibatch {
  std::vector<std::size_t> paired;       // indices into the target pool
  std::vector<std::size_t> source_only;  // indices into the source pool
};

// One epoch of feature-matching minibatches. Both pools are shuffled and
// consumed exactly once: ceil(N_td / pairs) batches, the last paired part may
// be short, and the source pool is spread over the batches as evenly as
// possible. Throws ContractError on an empty pool.
std::vector<Minibatch> build_minibatches(std::size_t n_source_pool, std::size_t n_target_pool,
                                         const MinibatchSpec& spec, std::mt19937_64& rng);

// Shuffled chunks of `batch` indices covering 0..n-1 once; last chunk short.
std::vector<std::vector<std::size_t>> shuffled_batches(std::size_t n, std::size_t batch,
                                                       std::mt19937_64& rng);

struct TransferPlan {
  Strategy strategy = Strategy::feature_match;
  std::size_t pretrain_epochs = 10;
  std::size_t transfer_epochs = 20;
  std::size_t val_every = 200;
  double lr = 1e-4;
  std::size_t finetune_batch = 32;
  std::size_t n_target_pairs = 8;
  MatchKind match = MatchKind::mse;
  double lambda2 = 1e-4;
  double lambda_kl = 0.1;
  std::uint64_t seed = 0;

  void validate() const;  // ConfigError
};

// Where training reads from. The source store is only needed by feature
// matching; it is read on the source modality only.
struct TrainingData {
  const data::EpochStore* source_store = nullptr;
  std::vector<std::size_t> source_ids;
  const data::EpochStore* target_store = nullptr;
  std::vector<std::size_t> train_ids;
  std::vector<std::size_t> val_ids;
};

struct LogRow {
  std::size_t step = 0;
  double ce_source = 0.0;
  double ce_target = 0.0;
  double match = 0.0;
  double l2 = 0.0;
  double total = 0.0;
  std::optional<double> val_accuracy;
};

struct StrategyResult {
  std::unique_ptr<models::StagingNetwork> network;  // best-validation checkpoint
  std::vector<LogRow> log;                          // one row per optimizer step
  std::size_t optimizer_steps = 0;
  std::optional<std::size_t> best_step;
  double best_val_accuracy = 0.0;
};

// Shift-1 windows of length m over the listed recordings.
std::vector<data::WindowRef> make_pool(const data::EpochStore& store,
                                       std::span<const std::size_t> ids, std::size_t m);

// Trains (or, for direct, copies) a target-modality network per `plan`.
// Validation runs every val_every steps; if training ends before the first
// such step, once at the last step. Returns the earliest best checkpoint.
// ConfigError when a strategy that needs `pretrained` gets none.
StrategyResult run_strategy(const TransferPlan& plan, const TrainingData& data,
                            const models::StagingNetwork* pretrained,
                            const models::NetworkConfig& network);

// Source-modality pretraining on the source store, batch finetune_batch,
// pretrain_epochs epochs, validation on val_ids (source modality).
StrategyResult pretrain(const TransferPlan& plan, const data::EpochStore& store,
                        std::span<const std::size_t> train_ids,
                        std::span<const std::size_t> val_ids,
                        const models::NetworkConfig& network);

// step,ce_source,ce_target,match,l2,total,val_accuracy
void write_log_csv(std::ostream& out, std::span<const LogRow> log);

}  // namespace xferlab::transfer
