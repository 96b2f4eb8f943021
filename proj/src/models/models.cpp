#include "xferlab/models/models.hpp"

#include <memory>
#include <string>

#include <Eigen/Core>

#include "xferlab/error.hpp"
#include "xferlab/gradcore/ops.hpp"

namespace xferlab::models {

using namespace grad;

namespace {

Tensor clone_param(const Tensor& t) { return t.clone(); }

GruCell clone_gru(const GruCell& c) {
  return {clone_param(c.wx), clone_param(c.uzr), clone_param(c.uh), clone_param(c.b), c.hidden};
}

ArnnParams clone_arnn(const ArnnParams& p) {
  ArnnParams out;
  out.filterbank = clone_param(p.filterbank);
  out.gru_fwd = clone_gru(p.gru_fwd);
  out.gru_bwd = clone_gru(p.gru_bwd);
  out.attention = {clone_param(p.attention.w), clone_param(p.attention.b),
                   clone_param(p.attention.u)};
  if (p.classifier_w.defined()) {
    out.classifier_w = clone_param(p.classifier_w);
    out.classifier_b = clone_param(p.classifier_b);
  }
  return out;
}

ArnnParams make_encoder(const ArnnConfig& c, std::mt19937_64& rng) {
  if (c.freq_bins == 0 || c.filters == 0 || c.hidden == 0 || c.attention == 0) {
    throw ConfigError("ARNN sizes must be positive");
  }
  ArnnParams p;
  p.filterbank = init_uniform({c.freq_bins, c.filters}, c.freq_bins, rng);
  p.gru_fwd = make_gru(c.filters, c.hidden, rng);
  p.gru_bwd = make_gru(c.filters, c.hidden, rng);
  const std::size_t k = 2 * c.hidden;
  p.attention.w = init_uniform({k, c.attention}, k, rng);
  p.attention.b = init_uniform({1, c.attention}, k, rng);
  p.attention.u = init_uniform({c.attention, 1}, c.attention, rng);
  return p;
}

void append_encoder(ParamList& out, const ArnnParams& p, const std::string& prefix) {
  out.push_back({prefix + "filterbank.W", p.filterbank});
  p.gru_fwd.append_to(out, prefix + "gru_fwd.");
  p.gru_bwd.append_to(out, prefix + "gru_bwd.");
  out.push_back({prefix + "attention.W", p.attention.w});
  out.push_back({prefix + "attention.b", p.attention.b});
  out.push_back({prefix + "attention.u", p.attention.u});
}

Tensor classify(const Tensor& features, const Tensor& w, const Tensor& b) {
  return softmax_rows(add_row(matmul(features, w), b));
}

bool is_classifier(const std::string& name) {
  return name.ends_with("classifier.W") || name.ends_with("classifier.b");
}

}  // namespace

std::string architecture_name(Architecture a) {
  return a == Architecture::arnn ? "arnn" : "seqsleepnet";
}

Architecture parse_architecture(const std::string& name) {
  if (name == "arnn") return Architecture::arnn;
  if (name == "seqsleepnet") return Architecture::seqsleepnet;
  throw ConfigError("unknown architecture '" + name + "' (expected arnn or seqsleepnet)");
}

void GruCell::append_to(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + "Wx", wx});
  out.push_back({prefix + "Uzr", uzr});
  out.push_back({prefix + "Uh", uh});
  out.push_back({prefix + "b", b});
}

GruCell make_gru(std::size_t input, std::size_t hidden, std::mt19937_64& rng) {
  GruCell c;
  c.wx = init_uniform({input, 3 * hidden}, input, rng);
  c.uzr = init_uniform({hidden, 2 * hidden}, hidden, rng);
  c.uh = init_uniform({hidden, hidden}, hidden, rng);
  c.b = init_uniform({1, 3 * hidden}, hidden, rng);
  c.hidden = hidden;
  return c;
}

Tensor filterbank_forward(const Tensor& spec, const Tensor& weights) {
  if (spec.cols() != weights.rows()) {
    throw DimensionError("filterbank: spectrogram has " + std::to_string(spec.cols()) +
                         " bins but filterbank expects " + std::to_string(weights.rows()));
  }
  return matmul(spec, weights);
}

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<Mat>;
using CMap = Eigen::Map<const Mat>;

Eigen::Index ix(std::size_t v) { return static_cast<Eigen::Index>(v); }

// Per-step activations kept for the backward pass, in processing order.
struct GruTrace {
  std::vector<Mat> z, r, c, prev;
};

}  // namespace

// The whole recurrence is one graph node: unrolling it through primitive ops
// costs ~15 nodes per step, which dominated training time.
Tensor gru_forward(const Tensor& seq, std::size_t steps, const GruCell& cell, bool reverse) {
  if (steps == 0 || seq.rows() % steps != 0) {
    throw DimensionError("gru: " + std::to_string(seq.rows()) + " rows not divisible into " +
                         std::to_string(steps) + " steps");
  }
  if (seq.cols() != cell.wx.rows()) {
    throw DimensionError("gru: input width " + std::to_string(seq.cols()) + " but cell expects " +
                         std::to_string(cell.wx.rows()));
  }
  const std::size_t batch = seq.rows() / steps;
  const std::size_t h = cell.hidden;
  const Tensor xproj = add_row(matmul(seq, cell.wx), cell.b);

  const Eigen::Index B = ix(batch), H = ix(h);
  CMap uz(cell.uzr.data().data(), H, 2 * H);
  CMap uc(cell.uh.data().data(), H, H);
  CMap xp(xproj.data().data(), ix(steps * batch), 3 * H);

  auto trace = std::make_shared<GruTrace>();
  trace->z.resize(steps);
  trace->r.resize(steps);
  trace->c.resize(steps);
  trace->prev.resize(steps);
  std::vector<double> out(steps * batch * h);
  Mat state = Mat::Zero(B, H);
  for (std::size_t i = 0; i < steps; ++i) {
    const std::size_t t = reverse ? steps - 1 - i : i;
    const auto xt = xp.middleRows(ix(t * batch), B);
    Mat zr = xt.leftCols(2 * H) + state * uz;
    zr = (1.0 + (-zr.array()).exp()).inverse().matrix();
    Mat z = zr.leftCols(H), r = zr.rightCols(H);
    Mat q = r.cwiseProduct(state);
    Mat c = (xt.rightCols(H) + q * uc).array().tanh().matrix();
    Mat next = c + z.cwiseProduct(state - c);
    Map(out.data() + t * batch * h, B, H) = next;
    trace->z[i] = std::move(z);
    trace->r[i] = std::move(r);
    trace->c[i] = std::move(c);
    trace->prev[i] = std::move(state);
    state = std::move(next);
  }

  return make_result({steps * batch, h}, std::move(out), {xproj, cell.uzr, cell.uh},
                     [trace, steps, batch, h, reverse](Node& self) {
    Node& nx = *self.parents[0];
    Node& nzr = *self.parents[1];
    Node& nh = *self.parents[2];
    const Eigen::Index B = ix(batch), H = ix(h);
    CMap uz(nzr.value.data(), H, 2 * H);
    CMap uc(nh.value.data(), H, H);
    CMap g(self.grad.data(), ix(steps * batch), H);
    Mat duz = Mat::Zero(H, 2 * H), duc = Mat::Zero(H, H);
    Mat dx(ix(steps * batch), 3 * H);
    Mat carry = Mat::Zero(B, H);
    Mat dzr(B, 2 * H);
    for (std::size_t i = steps; i-- > 0;) {
      const std::size_t t = reverse ? steps - 1 - i : i;
      const Mat& z = trace->z[i];
      const Mat& r = trace->r[i];
      const Mat& c = trace->c[i];
      const Mat& prev = trace->prev[i];
      const Mat dh = g.middleRows(ix(t * batch), B) + carry;
      const Mat dac = dh.cwiseProduct(Mat::Ones(B, H) - z).cwiseProduct(
          (1.0 - c.array().square()).matrix());
      const Mat q = r.cwiseProduct(prev);
      duc.noalias() += q.transpose() * dac;
      const Mat dq = dac * uc.transpose();
      dzr.leftCols(H) = dh.cwiseProduct(prev - c).cwiseProduct(
          z.cwiseProduct(Mat::Ones(B, H) - z));
      dzr.rightCols(H) = dq.cwiseProduct(prev).cwiseProduct(r.cwiseProduct(Mat::Ones(B, H) - r));
      duz.noalias() += prev.transpose() * dzr;
      carry = dh.cwiseProduct(z) + dq.cwiseProduct(r);
      carry.noalias() += dzr * uz.transpose();
      dx.middleRows(ix(t * batch), B) << dzr, dac;
    }
    if (nx.requires_grad) Map(nx.ensure_grad().data(), ix(steps * batch), 3 * H) += dx;
    if (nzr.requires_grad) Map(nzr.ensure_grad().data(), H, 2 * H) += duz;
    if (nh.requires_grad) Map(nh.ensure_grad().data(), H, H) += duc;
  });
}

Tensor bigru_forward(const Tensor& seq, std::size_t steps, const GruCell& fwd, const GruCell& bwd) {
  const Tensor f = gru_forward(seq, steps, fwd, false);
  const Tensor b = gru_forward(seq, steps, bwd, true);
  return concat_cols(std::vector<Tensor>{f, b});
}

AttentionResult attention_pool(const Tensor& states, std::size_t steps, const AttentionParams& p) {
  if (steps == 0 || states.rows() % steps != 0) {
    throw DimensionError("attention: " + std::to_string(states.rows()) +
                         " rows not divisible into " + std::to_string(steps) + " steps");
  }
  const std::size_t batch = states.rows() / steps;
  const Tensor scores = matmul(grad::tanh(add_row(matmul(states, p.w), p.b)), p.u);  // (T*B) x 1
  const Tensor weights = softmax_rows(transpose(reshape(scores, {steps, batch})));  // B x T
  Tensor pooled;
  for (std::size_t t = 0; t < steps; ++t) {
    const Tensor term = mul_col(col_slice(weights, t, 1), row_slice(states, t * batch, batch));
    pooled = pooled.defined() ? add(pooled, term) : term;
  }
  return {pooled, weights};
}

Tensor stack_time_major(std::span<const preproc::EpochTensor* const> epochs) {
  if (epochs.empty()) throw DimensionError("stack_time_major: no epochs");
  const std::size_t frames = epochs[0]->frames;
  const std::size_t bins = epochs[0]->bins;
  const std::size_t n = epochs.size();
  std::vector<double> values(frames * n * bins);
  for (std::size_t e = 0; e < n; ++e) {
    const auto* ep = epochs[e];
    if (ep->frames != frames || ep->bins != bins || ep->values.size() != frames * bins) {
      throw DimensionError("stack_time_major: epoch " + std::to_string(e) + " has shape (" +
                           std::to_string(ep->frames) + "," + std::to_string(ep->bins) + ")");
    }
    for (std::size_t t = 0; t < frames; ++t) {
      std::copy_n(ep->values.begin() + static_cast<std::ptrdiff_t>(t * bins), bins,
                  values.begin() + static_cast<std::ptrdiff_t>((t * n + e) * bins));
    }
  }
  return Tensor::matrix(frames * n, bins, std::move(values));
}

ParamList StagingNetwork::feature_params() const { return split_params(params()).feature_extractor; }
ParamList StagingNetwork::classifier_params() const { return split_params(params()).classifier; }

Arnn::Arnn(const ArnnConfig& config, std::mt19937_64& rng) : config_(config) {
  params_ = make_encoder(config, rng);
  const std::size_t k = 2 * config.hidden;
  params_.classifier_w = init_uniform({k, kNumStages}, k, rng);
  params_.classifier_b = init_uniform({1, kNumStages}, k, rng);
}

Arnn::Arnn(const ArnnConfig& config, ArnnParams params)
    : config_(config), params_(std::move(params)) {}

Tensor Arnn::encode(const Tensor& input, std::size_t n) const {
  if (n == 0 || input.rows() % n != 0) {
    throw DimensionError("arnn: input rows " + std::to_string(input.rows()) +
                         " not a multiple of batch " + std::to_string(n));
  }
  const std::size_t steps = input.rows() / n;
  const Tensor filtered = filterbank_forward(input, params_.filterbank);
  const Tensor states = bigru_forward(filtered, steps, params_.gru_fwd, params_.gru_bwd);
  return attention_pool(states, steps, params_.attention).pooled;
}

ModelOutput Arnn::forward(const Tensor& input, std::size_t batch) const {
  Tensor features = encode(input, batch);
  Tensor posteriors = classify(features, params_.classifier_w, params_.classifier_b);
  return {features, posteriors};
}

std::unique_ptr<StagingNetwork> Arnn::clone() const {
  return std::make_unique<Arnn>(config_, clone_arnn(params_));
}

ParamList Arnn::params() const {
  ParamList out;
  append_encoder(out, params_, "arnn.");
  out.push_back({"arnn.classifier.W", params_.classifier_w});
  out.push_back({"arnn.classifier.b", params_.classifier_b});
  return out;
}

SeqSleepNet::SeqSleepNet(const SeqConfig& config, std::mt19937_64& rng) : config_(config) {
  if (config.seq_len == 0) throw ConfigError("SeqSleepNet sequence length must be at least 1");
  if (config.seq_hidden == 0) throw ConfigError("SeqSleepNet hidden size must be positive");
  encoder_ = make_encoder(config.encoder, rng);
  const std::size_t k = 2 * config.encoder.hidden;
  seq_fwd_ = make_gru(k, config.seq_hidden, rng);
  seq_bwd_ = make_gru(k, config.seq_hidden, rng);
  const std::size_t ks = 2 * config.seq_hidden;
  classifier_w_ = init_uniform({ks, kNumStages}, ks, rng);
  classifier_b_ = init_uniform({1, kNumStages}, ks, rng);
}

SeqSleepNet::SeqSleepNet(const SeqConfig& config, ArnnParams encoder, GruCell fwd, GruCell bwd,
                         Tensor cw, Tensor cb)
    : config_(config),
      encoder_(std::move(encoder)),
      seq_fwd_(std::move(fwd)),
      seq_bwd_(std::move(bwd)),
      classifier_w_(std::move(cw)),
      classifier_b_(std::move(cb)) {}

ModelOutput SeqSleepNet::forward(const Tensor& input, std::size_t batch) const {
  const std::size_t m = config_.seq_len;
  const std::size_t n = batch * m;
  if (batch == 0 || input.rows() % n != 0) {
    throw DimensionError("seqsleepnet: input rows " + std::to_string(input.rows()) +
                         " do not hold " + std::to_string(batch) + " sequences of length " +
                         std::to_string(m));
  }
  const Arnn encoder(config_.encoder, encoder_);
  const Tensor epoch_features = encoder.encode(input, n);  // (M*B) x 2H, position-major
  const Tensor seq_features = bigru_forward(epoch_features, m, seq_fwd_, seq_bwd_);
  Tensor posteriors = classify(seq_features, classifier_w_, classifier_b_);
  return {seq_features, posteriors};
}

std::unique_ptr<StagingNetwork> SeqSleepNet::clone() const {
  return std::unique_ptr<StagingNetwork>(
      new SeqSleepNet(config_, clone_arnn(encoder_), clone_gru(seq_fwd_), clone_gru(seq_bwd_),
                      clone_param(classifier_w_), clone_param(classifier_b_)));
}

ParamList SeqSleepNet::params() const {
  ParamList out;
  append_encoder(out, encoder_, "seq.encoder.");
  seq_fwd_.append_to(out, "seq.gru_fwd.");
  seq_bwd_.append_to(out, "seq.gru_bwd.");
  out.push_back({"seq.classifier.W", classifier_w_});
  out.push_back({"seq.classifier.b", classifier_b_});
  return out;
}

std::unique_ptr<StagingNetwork> make_network(const NetworkConfig& config, std::mt19937_64& rng) {
  if (config.architecture == Architecture::arnn) return std::make_unique<Arnn>(config.arnn, rng);
  return std::make_unique<SeqSleepNet>(config.seq, rng);
}

SplitParams split_params(const ParamList& params) {
  SplitParams out;
  for (const auto& p : params) {
    (is_classifier(p.name) ? out.classifier : out.feature_extractor).push_back(p);
  }
  return out;
}

ParamList merge_params(const SplitParams& parts) {
  ParamList out = parts.feature_extractor;
  out.insert(out.end(), parts.classifier.begin(), parts.classifier.end());
  return out;
}

}  // namespace xferlab::models
