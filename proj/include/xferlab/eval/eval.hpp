#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "xferlab/data/data.hpp"
#include "xferlab/models/models.hpp"
#include "xferlab/stages.hpp"

namespace xferlab::eval {

// confusion[t][p] counts epochs of true stage t predicted as p.
using Confusion = std::array<std::array<std::size_t, kNumStages>, kNumStages>;

// Throws ContractError on length mismatch or labels outside 0..4.
Confusion confusion_matrix(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth);

std::size_t total(const Confusion& c);
// Throws ContractError on an empty matrix.
double accuracy(const Confusion& c);

struct KappaResult {
  double value = 0.0;
  bool degenerate = false;  // chance agreement p_e == 1; value reported as 0
};

// (p_o - p_e) / (1 - p_e) from the marginals. Throws ContractError when empty.
KappaResult cohens_kappa(const Confusion& c);

// Support-weighted mean of per-class F1; a class with no predictions and no
// true positives scores 0. Throws ContractError when empty.
double weighted_f1(const Confusion& c);

struct MetricsReport {
  double accuracy = 0.0;
  double kappa = 0.0;
  bool kappa_degenerate = false;
  double weighted_f1 = 0.0;
  Confusion confusion{};
  std::size_t n = 0;
};

MetricsReport evaluate(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth);

struct Projection {
  std::vector<std::array<double, 2>> coords;
  std::array<double, 2> variance{};  // population variance along each component
};

// Top-2 principal components of mean-centred rows. Component signs are fixed
// so the largest-magnitude loading is positive. Throws ContractError when
// n < 2 or d < 2.
Projection project_features_2d(const std::vector<std::vector<double>>& features);

// Model input for a batch of windows, position-major: row block e = m * B + b
// holds epoch start + m of window b.
grad::Tensor stack_windows(const data::EpochStore& store, std::span<const data::WindowRef> windows,
                           std::size_t m, Modality modality);

// Labels in the same position-major order.
std::vector<std::uint8_t> window_labels(const data::EpochStore& store,
                                        std::span<const data::WindowRef> windows, std::size_t m);

struct Predictions {
  std::vector<std::uint8_t> truth;
  std::vector<std::uint8_t> pred;
};

// Per-epoch predictions over the listed recordings. Sequence models are run
// on every shift-1 window and aggregated by summed log posteriors.
Predictions predict(const models::StagingNetwork& net, const data::EpochStore& store,
                    std::span<const std::size_t> ids, Modality modality,
                    std::size_t batch = 64);

// Per-epoch feature vectors of one recording; for sequence models the
// sequence-level features of every covering window are averaged.
std::vector<std::vector<double>> extract_features(const models::StagingNetwork& net,
                                                  const data::EpochStore& store, std::size_t id,
                                                  Modality modality, std::size_t batch = 64);

struct MetricsRow {
  std::string strategy;
  std::string architecture;
  std::size_t subset_size = 0;
  std::size_t fold = 0;
  std::size_t subset_index = 0;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double kappa = 0.0;
  double weighted_f1 = 0.0;
  std::size_t n = 0;
};

struct SummaryRow {
  std::string strategy;
  std::string architecture;
  std::size_t subset_size = 0;
  std::size_t runs = 0;
  double acc_mean = 0.0, acc_se = 0.0;
  double kappa_mean = 0.0, kappa_se = 0.0;
  double wf1_mean = 0.0, wf1_se = 0.0;
};

// Mean and standard error (sample sd / sqrt(n); 0 for n = 1) per
// (strategy, architecture, subset size), pooling every run in the group.
std::vector<SummaryRow> summarize(std::span<const MetricsRow> rows);

void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows);
void write_summary_csv(std::ostream& out, std::span<const SummaryRow> rows);
// Throws FormatError on a malformed file (line number in the message).
std::vector<MetricsRow> read_metrics_csv(std::istream& in, const std::string& source_name);

// Fixed-precision decimal used by every CSV writer.
std::string format_number(double v);

}  // namespace xferlab::eval
