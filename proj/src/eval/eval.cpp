#include "xferlab/eval/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

#include <Eigen/Eigenvalues>

#include "xferlab/error.hpp"
#include "xferlab/gradcore/ops.hpp"

namespace xferlab::eval {

namespace {

void require_nonempty(const Confusion& c, const char* what) {
  if (total(c) == 0) throw ContractError(std::string(what) + ": empty confusion matrix");
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double se_of(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

const char* kMetricsHeader =
    "strategy,architecture,subset_size,fold,subset_index,seed,accuracy,kappa,weighted_f1,n";

}  // namespace

Confusion confusion_matrix(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth) {
  if (pred.size() != truth.size()) {
    throw ContractError("confusion_matrix: " + std::to_string(pred.size()) + " predictions but " +
                        std::to_string(truth.size()) + " labels");
  }
  Confusion c{};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] >= kNumStages || truth[i] >= kNumStages) {
      throw ContractError("confusion_matrix: label out of range at index " + std::to_string(i));
    }
    ++c[truth[i]][pred[i]];
  }
  return c;
}

std::size_t total(const Confusion& c) {
  std::size_t n = 0;
  for (const auto& row : c) {
    for (auto v : row) n += v;
  }
  return n;
}

double accuracy(const Confusion& c) {
  require_nonempty(c, "accuracy");
  std::size_t diag = 0;
  for (std::size_t k = 0; k < kNumStages; ++k) diag += c[k][k];
  return static_cast<double>(diag) / static_cast<double>(total(c));
}

KappaResult cohens_kappa(const Confusion& c) {
  require_nonempty(c, "cohens_kappa");
  const double n = static_cast<double>(total(c));
  double po = 0.0, pe = 0.0;
  for (std::size_t k = 0; k < kNumStages; ++k) {
    double row = 0.0, col = 0.0;
    for (std::size_t j = 0; j < kNumStages; ++j) {
      row += static_cast<double>(c[k][j]);
      col += static_cast<double>(c[j][k]);
    }
    po += static_cast<double>(c[k][k]);
    pe += (row / n) * (col / n);
  }
  po /= n;
  if (pe >= 1.0) return {0.0, true};
  return {(po - pe) / (1.0 - pe), false};
}

double weighted_f1(const Confusion& c) {
  require_nonempty(c, "weighted_f1");
  const double n = static_cast<double>(total(c));
  double out = 0.0;
  for (std::size_t k = 0; k < kNumStages; ++k) {
    double support = 0.0, predicted = 0.0;
    for (std::size_t j = 0; j < kNumStages; ++j) {
      support += static_cast<double>(c[k][j]);
      predicted += static_cast<double>(c[j][k]);
    }
    const double tp = static_cast<double>(c[k][k]);
    const double denom = support + predicted;  // 2TP + FP + FN
    const double f1 = denom > 0.0 ? 2.0 * tp / denom : 0.0;
    out += support / n * f1;
  }
  return out;
}

MetricsReport evaluate(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth) {
  MetricsReport r;
  r.confusion = confusion_matrix(pred, truth);
  r.n = total(r.confusion);
  r.accuracy = accuracy(r.confusion);
  const auto k = cohens_kappa(r.confusion);
  r.kappa = k.value;
  r.kappa_degenerate = k.degenerate;
  r.weighted_f1 = weighted_f1(r.confusion);
  return r;
}

Projection project_features_2d(const std::vector<std::vector<double>>& features) {
  const std::size_t n = features.size();
  if (n < 2) throw ContractError("project_features_2d: need at least 2 samples");
  const std::size_t d = features[0].size();
  if (d < 2) throw ContractError("project_features_2d: need at least 2 feature dimensions");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i) {
    if (features[i].size() != d) throw DimensionError("project_features_2d: ragged feature rows");
    for (std::size_t j = 0; j < d; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = features[i][j];
  }
  x.rowwise() -= x.colwise().mean();
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  // Eigenvalues come back ascending.
  Eigen::MatrixXd basis(static_cast<Eigen::Index>(d), 2);
  Projection p;
  for (int c = 0; c < 2; ++c) {
    Eigen::VectorXd v = solver.eigenvectors().col(static_cast<Eigen::Index>(d) - 1 - c);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    basis.col(c) = v;
    p.variance[static_cast<std::size_t>(c)] =
        std::max(0.0, solver.eigenvalues()(static_cast<Eigen::Index>(d) - 1 - c));
  }
  const Eigen::MatrixXd proj = x * basis;
  p.coords.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    p.coords[i] = {proj(static_cast<Eigen::Index>(i), 0), proj(static_cast<Eigen::Index>(i), 1)};
  }
  return p;
}

grad::Tensor stack_windows(const data::EpochStore& store, std::span<const data::WindowRef> windows,
                           std::size_t m, Modality modality) {
  const std::size_t b = windows.size();
  std::vector<const preproc::EpochTensor*> epochs(b * m);
  for (std::size_t w = 0; w < b; ++w) {
    for (std::size_t k = 0; k < m; ++k) {
      epochs[k * b + w] = &store.epoch(windows[w].recording, modality, windows[w].start + k);
    }
  }
  return models::stack_time_major(epochs);
}

std::vector<std::uint8_t> window_labels(const data::EpochStore& store,
                                        std::span<const data::WindowRef> windows, std::size_t m) {
  const std::size_t b = windows.size();
  std::vector<std::uint8_t> out(b * m);
  for (std::size_t w = 0; w < b; ++w) {
    for (std::size_t k = 0; k < m; ++k) out[k * b + w] = store.label(windows[w].recording, windows[w].start + k);
  }
  return out;
}

namespace {

// Runs the network over all shift-1 windows of one recording and calls
// `visit(window, position, posterior_row, feature_row)` per output row.
template <typename Visit>
void run_windows(const models::StagingNetwork& net, const data::EpochStore& store, std::size_t id,
                 Modality modality, std::size_t batch, Visit visit) {
  grad::NoGradGuard no_grad;
  const std::size_t m = net.sequence_length();
  const auto starts = data::sample_sequences(store.n_epochs(id), m, 1);
  batch = std::max<std::size_t>(1, batch / m);
  for (std::size_t first = 0; first < starts.size(); first += batch) {
    const std::size_t count = std::min(batch, starts.size() - first);
    std::vector<data::WindowRef> windows(count);
    for (std::size_t i = 0; i < count; ++i) windows[i] = {id, starts[first + i]};
    const auto out = net.forward(stack_windows(store, windows, m, modality), count);
    const std::size_t k = out.features.cols();
    for (std::size_t pos = 0; pos < m; ++pos) {
      for (std::size_t w = 0; w < count; ++w) {
        const std::size_t row = pos * count + w;
        visit(first + w, pos, out.posteriors.data().subspan(row * kNumStages, kNumStages),
              out.features.data().subspan(row * k, k));
      }
    }
  }
}

}  // namespace

Predictions predict(const models::StagingNetwork& net, const data::EpochStore& store,
                    std::span<const std::size_t> ids, Modality modality, std::size_t batch) {
  Predictions p;
  const std::size_t m = net.sequence_length();
  for (std::size_t id : ids) {
    const std::size_t n = store.n_epochs(id);
    const auto starts = data::sample_sequences(n, m, 1);
    std::vector<std::vector<data::StageVector>> posts(starts.size(), std::vector<data::StageVector>(m));
    run_windows(net, store, id, modality, batch,
                [&](std::size_t w, std::size_t pos, std::span<const double> post, std::span<const double>) {
                  std::copy(post.begin(), post.end(), posts[w][pos].begin());
                });
    const auto agg = data::aggregate_ensemble(n, starts, posts);
    for (std::size_t e = 0; e < n; ++e) p.truth.push_back(store.label(id, e));
    p.pred.insert(p.pred.end(), agg.labels.begin(), agg.labels.end());
  }
  return p;
}

std::vector<std::vector<double>> extract_features(const models::StagingNetwork& net,
                                                  const data::EpochStore& store, std::size_t id,
                                                  Modality modality, std::size_t batch) {
  const std::size_t n = store.n_epochs(id);
  const auto starts = data::sample_sequences(n, net.sequence_length(), 1);
  std::vector<std::vector<double>> sum(n);
  std::vector<std::size_t> count(n, 0);
  run_windows(net, store, id, modality, batch,
              [&](std::size_t w, std::size_t pos, std::span<const double>, std::span<const double> f) {
                auto& acc = sum[starts[w] + pos];
                if (acc.empty()) acc.assign(f.size(), 0.0);
                for (std::size_t j = 0; j < f.size(); ++j) acc[j] += f[j];
                ++count[starts[w] + pos];
              });
  for (std::size_t e = 0; e < n; ++e) {
    for (auto& v : sum[e]) v /= static_cast<double>(count[e]);
  }
  return sum;
}

std::vector<SummaryRow> summarize(std::span<const MetricsRow> rows) {
  using Key = std::tuple<std::string, std::string, std::size_t>;
  std::map<Key, std::array<std::vector<double>, 3>> groups;
  std::vector<Key> order;
  for (const auto& r : rows) {
    const Key key{r.strategy, r.architecture, r.subset_size};
    if (!groups.contains(key)) order.push_back(key);
    auto& g = groups[key];
    g[0].push_back(r.accuracy);
    g[1].push_back(r.kappa);
    g[2].push_back(r.weighted_f1);
  }
  std::vector<SummaryRow> out;
  for (const auto& key : order) {
    const auto& g = groups[key];
    SummaryRow s;
    std::tie(s.strategy, s.architecture, s.subset_size) = key;
    s.runs = g[0].size();
    s.acc_mean = mean_of(g[0]);
    s.acc_se = se_of(g[0], s.acc_mean);
    s.kappa_mean = mean_of(g[1]);
    s.kappa_se = se_of(g[1], s.kappa_mean);
    s.wf1_mean = mean_of(g[2]);
    s.wf1_se = se_of(g[2], s.wf1_mean);
    out.push_back(std::move(s));
  }
  return out;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  std::string s(buf);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows) {
  out << kMetricsHeader << "\n";
  for (const auto& r : rows) {
    out << r.strategy << ',' << r.architecture << ',' << r.subset_size << ',' << r.fold << ','
        << r.subset_index << ',' << r.seed << ',' << format_number(r.accuracy) << ','
        << format_number(r.kappa) << ',' << format_number(r.weighted_f1) << ',' << r.n << "\n";
  }
}

void write_summary_csv(std::ostream& out, std::span<const SummaryRow> rows) {
  out << "strategy,architecture,subset_size,runs,accuracy_mean,accuracy_se,kappa_mean,kappa_se,"
         "weighted_f1_mean,weighted_f1_se\n";
  for (const auto& r : rows) {
    out << r.strategy << ',' << r.architecture << ',' << r.subset_size << ',' << r.runs << ','
        << format_number(r.acc_mean) << ',' << format_number(r.acc_se) << ','
        << format_number(r.kappa_mean) << ',' << format_number(r.kappa_se) << ','
        << format_number(r.wf1_mean) << ',' << format_number(r.wf1_se) << "\n";
  }
}

std::vector<MetricsRow> read_metrics_csv(std::istream& in, const std::string& source_name) {
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw FormatError(source_name + ": line 1: expected header '" + kMetricsHeader + "'");
  }
  std::vector<MetricsRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 10) {
      throw FormatError(source_name + ": line " + std::to_string(lineno) + ": expected 10 fields, got " +
                        std::to_string(cells.size()));
    }
    try {
      MetricsRow r;
      r.strategy = cells[0];
      r.architecture = cells[1];
      r.subset_size = std::stoul(cells[2]);
      r.fold = std::stoul(cells[3]);
      r.subset_index = std::stoul(cells[4]);
      r.seed = std::stoull(cells[5]);
      r.accuracy = std::stod(cells[6]);
      r.kappa = std::stod(cells[7]);
      r.weighted_f1 = std::stod(cells[8]);
      r.n = std::stoul(cells[9]);
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw FormatError(source_name + ": line " + std::to_string(lineno) + ": malformed number");
    }
  }
  return rows;
}

}  // namespace xferlab::eval
