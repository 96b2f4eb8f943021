#pragma once

#include <cstddef>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "xferlab/gradcore/params.hpp"
#include "xferlab/gradcore/tensor.hpp"
#include "xferlab/preproc/preproc.hpp"

namespace xferlab::models {

using grad::ParamList;
using grad::Tensor;

enum class Architecture { arnn, seqsleepnet };

std::string architecture_name(Architecture a);
Architecture parse_architecture(const std::string& name);

// Layer sizes. Defaults are the full-size configuration; desk-scale
// experiments shrink them through the harness config.
struct ArnnConfig {
  std::size_t freq_bins = preproc::kBins;
  std::size_t filters = 32;
  std::size_t hidden = 64;
  std::size_t attention = 64;
};

struct SeqConfig {
  ArnnConfig encoder;
  std::size_t seq_hidden = 64;
  std::size_t seq_len = 10;
};

// z = sigmoid(x Wz + h Uz + bz), r = sigmoid(x Wr + h Ur + br),
// c = tanh(x Wc + (r * h) Uc + bc), h' = z * h + (1 - z) * c.
// Gate blocks are packed as [z | r | c] along the columns.
struct GruCell {
  Tensor wx;   // in x 3H
  Tensor uzr;  // H x 2H
  Tensor uh;   // H x H
  Tensor b;    // 1 x 3H
  std::size_t hidden = 0;

  void append_to(ParamList& out, const std::string& prefix) const;
};

GruCell make_gru(std::size_t input, std::size_t hidden, std::mt19937_64& rng);

struct AttentionParams {
  Tensor w;  // K x A
  Tensor b;  // 1 x A
  Tensor u;  // A x 1, context vector
};

struct ModelOutput {
  Tensor features;    // one row per classified epoch
  Tensor posteriors;  // one row per classified epoch, 5 columns
};

// (T*B) x F time-major frames times F x D weights.
Tensor filterbank_forward(const Tensor& spec, const Tensor& weights);

// Runs a GRU over `steps` time steps of a time-major (steps*B) x in input
// with zero initial state; returns (steps*B) x H hidden states.
Tensor gru_forward(const Tensor& seq, std::size_t steps, const GruCell& cell, bool reverse);

// Concatenation of the forward run and the reversed backward run per step:
// (steps*B) x 2H.
Tensor bigru_forward(const Tensor& seq, std::size_t steps, const GruCell& fwd, const GruCell& bwd);

struct AttentionResult {
  Tensor pooled;   // B x K
  Tensor weights;  // B x steps, rows sum to 1
};

// scores_t = u . tanh(h_t W + b), softmax over steps, weighted sum of h_t.
AttentionResult attention_pool(const Tensor& states, std::size_t steps, const AttentionParams& p);

// Stacks epochs into a time-major (frames * n) x bins input; row t*n + e is
// frame t of epochs[e].
Tensor stack_time_major(std::span<const preproc::EpochTensor* const> epochs);

// A staging network split into feature extractor + last (classification)
// layer. Subclasses implement the two architectures.
class StagingNetwork {
 public:
  virtual ~StagingNetwork() = default;

  virtual Architecture architecture() const = 0;
  // Number of epochs per sample: 1 for the ARNN, M for SeqSleepNet.
  virtual std::size_t sequence_length() const = 0;
  // `input` comes from stack_time_major over batch * sequence_length()
  // epochs, ordered position-major (row e = m * batch + b). Output rows use
  // the same ordering.
  virtual ModelOutput forward(const Tensor& input, std::size_t batch) const = 0;
  virtual std::unique_ptr<StagingNetwork> clone() const = 0;

  // Stable-named view of every trainable tensor; entries alias the network.
  virtual ParamList params() const = 0;
  // Classifier = exactly the final weight matrix and bias.
  ParamList feature_params() const;
  ParamList classifier_params() const;
};

struct ArnnParams {
  Tensor filterbank;  // F x D
  GruCell gru_fwd;
  GruCell gru_bwd;
  AttentionParams attention;
  Tensor classifier_w;  // 2H x 5
  Tensor classifier_b;  // 1 x 5
};

class Arnn : public StagingNetwork {
 public:
  Arnn(const ArnnConfig& config, std::mt19937_64& rng);
  Arnn(const ArnnConfig& config, ArnnParams params);

  Architecture architecture() const override { return Architecture::arnn; }
  std::size_t sequence_length() const override { return 1; }
  ModelOutput forward(const Tensor& input, std::size_t batch) const override;
  std::unique_ptr<StagingNetwork> clone() const override;
  ParamList params() const override;

  const ArnnConfig& config() const { return config_; }
  const ArnnParams& weights() const { return params_; }

  // Filterbank + biGRU + attention for `n` epochs: n x 2H.
  Tensor encode(const Tensor& input, std::size_t n) const;

 private:
  ArnnConfig config_;
  ArnnParams params_;
};

class SeqSleepNet : public StagingNetwork {
 public:
  SeqSleepNet(const SeqConfig& config, std::mt19937_64& rng);

  Architecture architecture() const override { return Architecture::seqsleepnet; }
  std::size_t sequence_length() const override { return config_.seq_len; }
  ModelOutput forward(const Tensor& input, std::size_t batch) const override;
  std::unique_ptr<StagingNetwork> clone() const override;
  ParamList params() const override;

  const SeqConfig& config() const { return config_; }

 private:
  SeqSleepNet(const SeqConfig& config, ArnnParams encoder, GruCell fwd, GruCell bwd,
              Tensor cw, Tensor cb);

  SeqConfig config_;
  ArnnParams encoder_;  // classifier fields unused
  GruCell seq_fwd_;
  GruCell seq_bwd_;
  Tensor classifier_w_;  // 2Hs x 5
  Tensor classifier_b_;  // 1 x 5
};

struct NetworkConfig {
  Architecture architecture = Architecture::arnn;
  ArnnConfig arnn;
  SeqConfig seq;
};

std::unique_ptr<StagingNetwork> make_network(const NetworkConfig& config, std::mt19937_64& rng);

struct SplitParams {
  ParamList feature_extractor;
  ParamList classifier;
};

SplitParams split_params(const ParamList& params);
ParamList merge_params(const SplitParams& parts);

}  // namespace xferlab::models
