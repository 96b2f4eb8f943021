#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include "xferlab/data/data.hpp"
#include "xferlab/eval/eval.hpp"
#include "xferlab/models/models.hpp"
#include "xferlab/transfer/transfer.hpp"

namespace xferlab::harness {

namespace fs = std::filesystem;

// Everything a subcommand needs. Relative paths are taken relative to the
// working directory. See README.md for the JSON schema.
struct ExperimentConfig {
  data::GeneratorSpec generator;  // generate

  // inputs
  fs::path source_dataset;   // pretrain data and feature-matching source pool
  fs::path target_dataset;   // paired cross-validation dataset
  fs::path checkpoint_dir;   // where transfer looks for pretrained checkpoints; empty = output
  fs::path checkpoint;       // project
  fs::path dataset;          // project
  std::vector<fs::path> inputs;  // metrics

  fs::path output = "out";

  models::NetworkConfig network;
  std::vector<transfer::Strategy> strategies;
  std::vector<std::size_t> subset_sizes{10, 5, 2};
  std::size_t folds = 3;
  std::size_t n_val = 2;
  std::size_t n_test = 2;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::uint64_t subset_seed = 7;
  std::size_t workers = 0;  // 0 = one per hardware thread
  transfer::TransferPlan plan;

  // ConfigError on any invalid field. Path existence is checked by the
  // subcommands that read them.
  void validate() const;
};

// Desk-scale defaults (small layers, 14 recordings, 3 folds, 3 seeds).
ExperimentConfig default_config();

// Applies a JSON document on top of `base`. Unknown keys and wrong types
// are ConfigErrors naming the key.
ExperimentConfig parse_config(const std::string& json_text, const std::string& source_name,
                              ExperimentConfig base = default_config());
ExperimentConfig load_config(const fs::path& path, ExperimentConfig base = default_config());

// Writes the generated dataset to config.output. Validation happens before
// anything is written; a failure leaves no partial directory behind.
void cmd_generate(const ExperimentConfig& config);

struct PretrainOutcome {
  std::uint64_t seed = 0;
  fs::path checkpoint;
  fs::path log;
  std::size_t best_step = 0;
  double best_val_accuracy = 0.0;
};

std::string pretrain_checkpoint_name(models::Architecture a, std::uint64_t seed);

// One checkpoint and log per seed in config.output.
std::vector<PretrainOutcome> cmd_pretrain(const ExperimentConfig& config);

// Which recordings one training job read, per dataset and modality.
struct JobAccess {
  std::size_t fold = 0;
  std::size_t subset_size = 0;
  std::size_t subset_index = 0;
  std::uint64_t seed = 0;
  transfer::Strategy strategy = transfer::Strategy::direct;
  std::set<data::AccessAudit::Entry> reads;
  std::vector<std::size_t> test_ids;
};

struct TransferOutcome {
  std::vector<eval::MetricsRow> rows;
  std::vector<eval::SummaryRow> summary;
  std::vector<JobAccess> access;
};

// Cross-validated grid over folds x subsets x strategies x seeds. Direct
// transfer is evaluated once per fold and seed and reported with subset
// index 0 of every subset size. Writes
// metrics.csv, summary.csv and logs/ under config.output. Throws Error if
// any job read a test recording.
TransferOutcome cmd_transfer(const ExperimentConfig& config);

// recording,epoch,modality,stage,x,y for both modalities of config.dataset,
// written to config.output/projection.csv.
void cmd_project(const ExperimentConfig& config);

// Merges config.inputs into config.output/summary.csv.
std::vector<eval::SummaryRow> cmd_metrics(const ExperimentConfig& config);

// Entry point of the command-line tool. Returns 0 on success, 2 on a
// configuration error, 3 on a runtime error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace xferlab::harness
