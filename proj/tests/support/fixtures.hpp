#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "xferlab/data/data.hpp"
#include "xferlab/gradcore/tensor.hpp"
#include "xferlab/models/models.hpp"
#include "xferlab/transfer/transfer.hpp"

namespace xferlab::testing {

inline grad::Tensor random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  std::vector<double> v(r * c);
  for (auto& x : v) x = nd(rng);
  return grad::Tensor::matrix(r, c, std::move(v));
}

// Rows drawn from a softmax of random logits.
inline grad::Tensor random_posteriors(std::size_t n, std::mt19937_64& rng, double spread = 1.5) {
  std::normal_distribution<double> nd(0.0, spread);
  std::vector<double> v(n * kNumStages);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < kNumStages; ++k) s += (v[i * kNumStages + k] = std::exp(nd(rng)));
    for (std::size_t k = 0; k < kNumStages; ++k) v[i * kNumStages + k] /= s;
  }
  return grad::Tensor::matrix(n, kNumStages, std::move(v));
}

inline std::vector<std::uint8_t> random_labels(std::size_t n, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> d(0, 4);
  std::vector<std::uint8_t> out(n);
  for (auto& x : out) x = static_cast<std::uint8_t>(d(rng));
  return out;
}

// Small layers on full-size spectrogram inputs.
inline models::NetworkConfig small_network(models::Architecture a, std::size_t seq_len = 3) {
  models::NetworkConfig c;
  c.architecture = a;
  c.arnn = {.freq_bins = preproc::kBins, .filters = 4, .hidden = 4, .attention = 4};
  c.seq = {.encoder = c.arnn, .seq_hidden = 4, .seq_len = seq_len};
  return c;
}

inline data::EpochStore synthetic_store(const std::string& name, std::size_t recordings, std::size_t epochs,
                                        std::uint64_t seed, bool identical_modalities = false) {
  data::GeneratorSpec spec;
  spec.markov = data::StageMarkov::default_chain(epochs);
  spec.n_recordings = recordings;
  spec.seed = seed;
  if (identical_modalities) spec.target = spec.source;
  return data::load_store(name, data::generate_dataset(spec));
}

inline transfer::TransferPlan quick_plan(transfer::Strategy s, std::uint64_t seed = 1) {
  transfer::TransferPlan p;
  p.strategy = s;
  p.pretrain_epochs = 2;
  p.transfer_epochs = 3;
  p.val_every = 4;
  p.lr = 1e-3;
  p.finetune_batch = 8;
  p.n_target_pairs = 4;
  p.seed = seed;
  return p;
}

}  // namespace xferlab::testing
