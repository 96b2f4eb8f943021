// Acceptance run: prints one PASS/FAIL line per criterion and exits nonzero
// if any fails. argv[1] is the working directory for the benchmark grid; the
// same lines go to acceptance_report.txt there, since ctest hides the output
// of passing tests.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "xferlab/data/data.hpp"
#include "xferlab/eval/eval.hpp"
#include "xferlab/gradcore/ops.hpp"
#include "xferlab/harness/harness.hpp"
#include "xferlab/models/models.hpp"
#include "xferlab/preproc/preproc.hpp"
#include "xferlab/transfer/transfer.hpp"

using namespace xferlab;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int failures = 0;
std::ofstream report_file;

// stdout plus the report file
void emit(const std::string& line) {
  std::fputs(line.c_str(), stdout);
  std::fflush(stdout);
  report_file << line << std::flush;
}

void report(int id, const std::string& title, const std::function<Verdict()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!v.pass) ++failures;
  emit((v.pass ? "PASS " : "FAIL ") + fmt("%2d ", id) + title + ": " + v.detail + fmt(" [%.1fs]\n", secs));
}

std::vector<grad::Tensor> tensors(const grad::ParamList& p) {
  std::vector<grad::Tensor> out;
  for (const auto& n : p) out.push_back(n.tensor);
  return out;
}

// ---- 1 -------------------------------------------------------------------

Verdict gradient_correctness() {
  std::mt19937_64 rng(41);
  models::NetworkConfig cfg;
  cfg.arnn = {.freq_bins = 9, .filters = 4, .hidden = 3, .attention = 3};
  cfg.seq = {.encoder = cfg.arnn, .seq_hidden = 3, .seq_len = 3};
  const std::size_t frames = 5;
  // h = 1e-3 leaves O(h^2) truncation near 3e-4 on small, high-curvature
  // bias gradients; 1e-4 shrinks it 100x while roundoff stays below 1e-7
  const double step = 1e-4;
  double worst = 0.0;
  std::size_t checked = 0;
  std::string parts;
  for (auto arch : {models::Architecture::arnn, models::Architecture::seqsleepnet}) {
    cfg.architecture = arch;
    const auto net = models::make_network(cfg, rng);
    const std::size_t m = net->sequence_length();

    // network alone
    const std::size_t batch = 2;
    const auto x = testing::random_matrix(frames * batch * m, 9, rng);
    std::vector<std::size_t> labels(batch * m);
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = (3 * i + 1) % kNumStages;
    auto r = testing::gradient_check(tensors(net->params()), [&] {
      const auto out = net->forward(x, batch);
      return grad::add(grad::scale(grad::sum(grad::log(grad::pick(out.posteriors, labels))), -1.0),
                       grad::mean(grad::square(out.features)));
    }, step);
    worst = std::max(worst, r.max_rel_error);
    checked += r.checked;
    parts += fmt("%s net %.2e; ", models::architecture_name(arch).c_str(), r.max_rel_error);

    // combined loss through a source and a target copy
    const auto target_net = net->clone();
    const std::size_t b_src = 3, n_pairs = 2;
    const auto xs = testing::random_matrix(frames * b_src * m, 9, rng);
    const auto xt = testing::random_matrix(frames * n_pairs * m, 9, rng);
    transfer::FeatureMatchBatch fm;
    fm.seq_len = m;
    fm.n_pairs = n_pairs;
    fm.source_labels = testing::random_labels(b_src * m, rng);
    fm.target_labels = testing::random_labels(n_pairs * m, rng);
    auto params = net->params();
    for (auto p : target_net->params()) params.push_back({"target." + p.name, p.tensor});
    const transfer::LossWeights w{.lambda1 = 2.5, .lambda2 = 1e-2, .match = transfer::MatchKind::mse};
    r = testing::gradient_check(tensors(params), [&] {
      fm.source = net->forward(xs, b_src);
      fm.target = target_net->forward(xt, n_pairs);
      return transfer::combined_loss(fm, w, params).total_tensor;
    }, step);
    worst = std::max(worst, r.max_rel_error);
    checked += r.checked;
    parts += fmt("%s combined %.2e; ", models::architecture_name(arch).c_str(), r.max_rel_error);
  }
  return {worst < 1e-4, parts + fmt("%zu entries, max rel error %.2e", checked, worst)};
}

// ---- 2 -------------------------------------------------------------------

Verdict loss_composition() {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<std::size_t> pairs(1, 8), extra(0, 16), seq(1, 4), width(1, 6);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t np = pairs(rng), bs = np + extra(rng), m = seq(rng), d = width(rng);
    transfer::FeatureMatchBatch b;
    b.seq_len = m;
    b.n_pairs = np;
    b.source = {testing::random_matrix(bs * m, d, rng), testing::random_posteriors(bs * m, rng)};
    b.target = {testing::random_matrix(np * m, d, rng), testing::random_posteriors(np * m, rng)};
    b.source_labels = testing::random_labels(bs * m, rng);
    b.target_labels = testing::random_labels(np * m, rng);
    grad::ParamList params{{"a", testing::random_matrix(4, 3, rng)}, {"b", testing::random_matrix(1, 7, rng)}};
    const double lambda1 = (8.0 + 8.0 * static_cast<double>(bs - np) / static_cast<double>(np)) / 8.0;
    const auto loss = transfer::combined_loss(b, {.lambda1 = lambda1, .lambda2 = 1e-4}, params);

    double ce_s = 0.0, ce_t = 0.0, match = 0.0, l2 = 0.0;
    for (std::size_t r = 0; r < bs * m; ++r) ce_s -= std::log(b.source.posteriors.at(r, b.source_labels[r]));
    for (std::size_t r = 0; r < np * m; ++r) ce_t -= std::log(b.target.posteriors.at(r, b.target_labels[r]));
    for (std::size_t pos = 0; pos < m; ++pos) {
      for (std::size_t i = 0; i < np; ++i) {
        for (std::size_t c = 0; c < d; ++c) {
          match += std::pow(b.source.features.at(pos * bs + i, c) - b.target.features.at(pos * np + i, c), 2);
        }
      }
    }
    for (const auto& p : params) {
      for (double v : p.tensor.data()) l2 += v * v;
    }
    const double md = static_cast<double>(m);
    const double expected = ce_s / md + ce_t / md + lambda1 * match / (md * static_cast<double>(d)) + 1e-4 * l2;
    worst = std::max(worst, std::abs(loss.total - expected));
  }
  bool rule = true;
  std::string ratios;
  for (double r : {1.0, 2.0, 3.0, 5.0, 10.0}) {
    const auto spec = transfer::MinibatchSpec::from_sizes(static_cast<std::size_t>(64 * r), 64);
    const double n_mb = static_cast<double>(spec.total());
    rule = rule && spec.lambda1() == n_mb / 8.0 && spec.total() == static_cast<std::size_t>(8 + 8 * r);
    ratios += fmt(" r=%g:%g", r, spec.lambda1());
  }
  return {worst < 1e-6 && rule, fmt("50 batches, max |total - sum| %.2e; lambda1", worst) + ratios};
}

// ---- 3 -------------------------------------------------------------------

double kappa_oracle(const eval::Confusion& c) {
  std::vector<int> pred, truth;
  for (int t = 0; t < 5; ++t) {
    for (int p = 0; p < 5; ++p) {
      for (std::size_t k = 0; k < c[t][p]; ++k) {
        truth.push_back(t);
        pred.push_back(p);
      }
    }
  }
  const double n = static_cast<double>(truth.size());
  double agree = 0.0, pe = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) agree += pred[i] == truth[i];
  for (int k = 0; k < 5; ++k) {
    pe += static_cast<double>(std::count(truth.begin(), truth.end(), k)) *
          static_cast<double>(std::count(pred.begin(), pred.end(), k)) / (n * n);
  }
  return pe == 1.0 ? 0.0 : (agree / n - pe) / (1.0 - pe);
}

double wf1_oracle(const eval::Confusion& c) {
  double n = 0.0, acc = 0.0;
  for (int k = 0; k < 5; ++k) {
    double tp = static_cast<double>(c[k][k]), fp = 0.0, fn = 0.0;
    for (int j = 0; j < 5; ++j) {
      if (j == k) continue;
      fp += static_cast<double>(c[j][k]);
      fn += static_cast<double>(c[k][j]);
    }
    const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double r = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    acc += (tp + fn) * (p + r > 0 ? 2 * p * r / (p + r) : 0.0);
    n += tp + fn;
  }
  return acc / n;
}

Verdict metric_oracles() {
  std::mt19937_64 rng(43);
  std::uniform_int_distribution<std::size_t> d(0, 30);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    eval::Confusion c{};
    for (auto& row : c) {
      for (auto& x : row) x = d(rng);
    }
    c[0][0] += 1;
    worst = std::max({worst, std::abs(eval::cohens_kappa(c).value - kappa_oracle(c)),
                      std::abs(eval::weighted_f1(c) - wf1_oracle(c))});
  }
  eval::Confusion diag{}, constant{};
  for (int k = 0; k < 5; ++k) {
    diag[k][k] = 4 + static_cast<std::size_t>(k);
    constant[k][1] = 9;
  }
  const double kd = eval::cohens_kappa(diag).value, kc = eval::cohens_kappa(constant).value;
  return {worst < 1e-10 && kd == 1.0 && std::abs(kc) < 1e-15,
          fmt("max oracle error %.2e over 100 matrices; kappa(diagonal)=%g kappa(constant)=%g", worst, kd, kc)};
}

// ---- 4 -------------------------------------------------------------------

Verdict minibatch_protocol() {
  std::mt19937_64 rng(44);
  // pool sizes of the default grid (60 epochs per recording) and a few awkward ones
  const std::vector<std::pair<std::size_t, std::size_t>> pools{
      {600, 120}, {600, 300}, {600, 600}, {598, 116}, {37, 11}, {5, 20}, {120, 40}};
  for (auto [ns, nt] : pools) {
    const auto spec = transfer::MinibatchSpec::from_sizes(ns, nt);
    const auto batches = transfer::build_minibatches(ns, nt, spec, rng);
    std::vector<std::size_t> paired, source;
    for (const auto& b : batches) {
      paired.insert(paired.end(), b.paired.begin(), b.paired.end());
      source.insert(source.end(), b.source_only.begin(), b.source_only.end());
    }
    std::sort(paired.begin(), paired.end());
    std::sort(source.begin(), source.end());
    std::vector<std::size_t> all_t(nt), all_s(ns);
    std::iota(all_t.begin(), all_t.end(), 0);
    std::iota(all_s.begin(), all_s.end(), 0);
    if (paired != all_t || source != all_s) {
      return {false, fmt("pools (%zu, %zu) not consumed exactly once", ns, nt)};
    }
  }
  return {true, fmt("%zu pool pairs, every sample of both pools consumed exactly once per epoch", pools.size())};
}

// ---- 5 -------------------------------------------------------------------

Verdict ensemble_aggregation() {
  std::mt19937_64 rng(45);
  std::uniform_real_distribution<double> u(0.005, 1.0);
  std::uniform_int_distribution<std::size_t> len(1, 15), mdist(1, 6);
  std::size_t mismatches = 0, coverage_errors = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t m = mdist(rng), n = m + len(rng) - 1;
    const auto starts = data::sample_sequences(n, m);
    std::vector<std::vector<data::StageVector>> post(starts.size(), std::vector<data::StageVector>(m));
    for (auto& w : post) {
      for (auto& p : w) {
        double s = 0.0;
        for (auto& x : p) s += (x = u(rng));
        for (auto& x : p) x /= s;
      }
    }
    const auto r = data::aggregate_ensemble(n, starts, post);
    std::vector<data::StageVector> product(n, data::StageVector{1, 1, 1, 1, 1});
    std::vector<std::size_t> count(n, 0);
    for (std::size_t w = 0; w < starts.size(); ++w) {
      for (std::size_t k = 0; k < m; ++k) {
        ++count[starts[w] + k];
        for (std::size_t c = 0; c < kNumStages; ++c) product[starts[w] + k][c] *= post[w][k][c];
      }
    }
    for (std::size_t e = 0; e < n; ++e) {
      const auto best = static_cast<std::size_t>(std::max_element(product[e].begin(), product[e].end()) -
                                                 product[e].begin());
      mismatches += r.labels[e] != best;
      const bool interior = e + 1 >= m && e + m <= n;
      if (interior && count[e] != m) ++coverage_errors;
      if (count[e] == 0 || count[e] > m) ++coverage_errors;
    }
  }
  return {mismatches == 0 && coverage_errors == 0,
          fmt("1000 ensembles: %zu argmax mismatches, %zu coverage errors", mismatches, coverage_errors)};
}

// ---- 6 to 8 --------------------------------------------------------------

struct Grid {
  std::vector<eval::MetricsRow> rows;
  std::vector<eval::SummaryRow> summary;
  double cpu_seconds = 0.0;
  double wall_seconds = 0.0;
  std::string error;
};

Grid run_default_grid(const fs::path& work) {
  Grid g;
  const auto wall0 = std::chrono::steady_clock::now();
  const std::clock_t cpu0 = std::clock();
  try {
    fs::remove_all(work);
    auto base = harness::default_config();
    base.source_dataset = work / "source";
    base.target_dataset = work / "target";

    auto gen = base;
    gen.generator.n_recordings = 10;
    gen.generator.seed = 101;
    gen.output = base.source_dataset;
    harness::cmd_generate(gen);
    gen.generator.n_recordings = 14;
    gen.generator.seed = 202;
    gen.output = base.target_dataset;
    harness::cmd_generate(gen);

    for (auto arch : {models::Architecture::arnn, models::Architecture::seqsleepnet}) {
      auto c = base;
      c.network.architecture = arch;
      c.output = work / "pretrain";
      harness::cmd_pretrain(c);
      c.checkpoint_dir = c.output;
      c.output = work / ("transfer_" + models::architecture_name(arch));
      auto outcome = harness::cmd_transfer(c);
      g.rows.insert(g.rows.end(), outcome.rows.begin(), outcome.rows.end());
      g.summary.insert(g.summary.end(), outcome.summary.begin(), outcome.summary.end());
      emit(fmt("# %s grid done after %.0fs\n", models::architecture_name(arch).c_str(),
               std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count()));
    }
    std::ofstream out(work / "summary_all.csv");
    eval::write_summary_csv(out, g.summary);
  } catch (const std::exception& e) {
    g.error = e.what();
  }
  g.cpu_seconds = static_cast<double>(std::clock() - cpu0) / CLOCKS_PER_SEC;
  g.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  for (const auto& s : g.summary) {
    emit(fmt("# %-11s %-13s size %2zu runs %2zu acc %.4f se %.4f kappa %.4f wf1 %.4f\n", s.architecture.c_str(),
             s.strategy.c_str(), s.subset_size, s.runs, s.acc_mean, s.acc_se, s.kappa_mean, s.wf1_mean));
  }
  return g;
}

const eval::SummaryRow* find_summary(const Grid& g, const std::string& arch, const std::string& strategy,
                                     std::size_t size) {
  for (const auto& s : g.summary) {
    if (s.architecture == arch && s.strategy == strategy && s.subset_size == size) return &s;
  }
  return nullptr;
}

const std::vector<std::string> kArchs{"arnn", "seqsleepnet"};
const std::vector<std::string> kTrained{"scratch", "finetune", "finetune_kl", "feature_match"};
const std::vector<std::size_t> kSizes{2, 5, 10};

Verdict direct_is_worst(const Grid& g) {
  if (!g.error.empty()) return {false, "grid failed: " + g.error};
  bool ok = g.cpu_seconds <= 1800.0;
  double min_gap = 1.0;
  std::string where;
  for (const auto& arch : kArchs) {
    for (auto size : kSizes) {
      const auto* d = find_summary(g, arch, "direct", size);
      if (!d) return {false, "missing direct row for " + arch};
      for (const auto& s : kTrained) {
        const auto* t = find_summary(g, arch, s, size);
        if (!t) return {false, "missing " + s + " row for " + arch};
        const double gap = t->acc_mean - d->acc_mean;
        if (gap < min_gap) {
          min_gap = gap;
          where = fmt("%s %s size %zu", arch.c_str(), s.c_str(), size);
        }
        ok = ok && gap > 0.0;
      }
    }
  }
  return {ok, fmt("smallest margin over direct %.4f (", min_gap) + where +
                  fmt("); grid CPU %.0fs, wall %.0fs, limit 1800s", g.cpu_seconds, g.wall_seconds)};
}

Verdict feature_match_beats_finetune(const Grid& g) {
  if (!g.error.empty()) return {false, "grid failed: " + g.error};
  bool ok = true;
  std::string detail;
  for (const auto& arch : kArchs) {
    // pair runs by (fold, subset, seed)
    std::map<std::tuple<std::size_t, std::size_t, std::uint64_t>, std::pair<double, double>> paired;
    std::map<std::tuple<std::size_t, std::size_t, std::uint64_t>, int> seen;
    for (const auto& r : g.rows) {
      if (r.architecture != arch || r.subset_size != 2) continue;
      const auto key = std::make_tuple(r.fold, r.subset_index, r.seed);
      if (r.strategy == "feature_match") {
        paired[key].first = r.accuracy;
        seen[key] |= 1;
      } else if (r.strategy == "finetune") {
        paired[key].second = r.accuracy;
        seen[key] |= 2;
      }
    }
    double fm = 0.0, ft = 0.0, rel = 0.0;
    std::size_t n = 0;
    for (const auto& [key, acc] : paired) {
      if (seen[key] != 3) return {false, "unpaired runs for " + arch};
      fm += acc.first;
      ft += acc.second;
      rel += (acc.first - acc.second) / acc.second;
      ++n;
    }
    if (n == 0) return {false, "no size-2 runs for " + arch};
    fm /= static_cast<double>(n);
    ft /= static_cast<double>(n);
    rel /= static_cast<double>(n);
    ok = ok && fm >= ft && rel > 0.0;
    detail += fmt("%s: feature_match %.4f vs finetune %.4f, mean relative improvement %+.2f%% over %zu runs; ",
                  arch.c_str(), fm, ft, 100.0 * rel, n);
  }
  return {ok, detail};
}

Verdict monotone_in_data(const Grid& g) {
  if (!g.error.empty()) return {false, "grid failed: " + g.error};
  bool ok = true;
  double worst = -1.0;
  std::string where = "none";
  for (const auto& arch : kArchs) {
    for (const auto& s : {"direct", "scratch", "finetune", "finetune_kl", "feature_match"}) {
      for (std::size_t i = 0; i + 1 < kSizes.size(); ++i) {
        const auto* lo = find_summary(g, arch, s, kSizes[i]);
        const auto* hi = find_summary(g, arch, s, kSizes[i + 1]);
        if (!lo || !hi) return {false, fmt("missing rows for %s %s", arch.c_str(), s)};
        // drop measured in standard errors of the difference
        const double se = std::hypot(lo->acc_se, hi->acc_se);
        const double drop = lo->acc_mean - hi->acc_mean;
        const double z = se > 0 ? drop / se : (drop > 0 ? 1e9 : 0.0);
        if (z > worst) {
          worst = z;
          where = fmt("%s %s %zu->%zu (%.4f -> %.4f)", arch.c_str(), s, kSizes[i], kSizes[i + 1], lo->acc_mean,
                      hi->acc_mean);
        }
        ok = ok && drop <= se;
      }
    }
  }
  return {ok, fmt("largest drop %.2f standard errors at ", worst) + where};
}

// ---- 9 -------------------------------------------------------------------

Verdict preprocessing() {
  std::vector<double> x(preproc::kEpochSamples);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(2 * std::numbers::pi * 10.0 * static_cast<double>(i) / 100.0);
  const auto s = preproc::log_spectrogram(x);
  const bool shape = s.size() == 29 * 129 && preproc::kFrames == 29 && preproc::kBins == 129;
  bool peak = true;
  for (std::size_t f = 0; f < preproc::kFrames; ++f) {
    const auto row = s.begin() + static_cast<std::ptrdiff_t>(f * preproc::kBins);
    peak = peak && std::max_element(row, row + preproc::kBins) - row == 26;
  }

  // one synthetic recording through the full pipeline
  data::GeneratorSpec spec;
  spec.markov = data::StageMarkov::default_chain(30);
  spec.n_recordings = 1;
  spec.seed = 46;
  const auto ds = data::generate_dataset(spec);
  const auto store = data::load_store("check", ds);
  double worst_mean = 0.0, worst_std = 0.0;
  for (auto modality : {Modality::source, Modality::target}) {
    const std::size_t n_ep = store.n_epochs(0);
    for (std::size_t b = 0; b < preproc::kBins; ++b) {
      double m = 0.0, sq = 0.0;
      for (std::size_t e = 0; e < n_ep; ++e) {
        const auto& t = store.epoch(0, modality, e);
        for (std::size_t f = 0; f < preproc::kFrames; ++f) m += t.at(f, b);
      }
      const double n = static_cast<double>(n_ep * preproc::kFrames);
      m /= n;
      for (std::size_t e = 0; e < n_ep; ++e) {
        const auto& t = store.epoch(0, modality, e);
        for (std::size_t f = 0; f < preproc::kFrames; ++f) sq += (t.at(f, b) - m) * (t.at(f, b) - m);
      }
      worst_mean = std::max(worst_mean, std::abs(m));
      worst_std = std::max(worst_std, std::abs(std::sqrt(sq / n) - 1.0));
    }
  }
  return {shape && peak && worst_mean < 1e-5 && worst_std < 1e-4,
          fmt("shape (%zu,%zu); 10 Hz argmax bin 26 in every frame: %s; normalized max |mean| %.2e, max |std-1| %.2e",
              preproc::kFrames, preproc::kBins, peak ? "yes" : "no", worst_mean, worst_std)};
}

// ---- 10 ------------------------------------------------------------------

std::map<std::string, std::string> csv_files(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && e.path().extension() == ".csv") {
      std::ifstream in(e.path(), std::ios::binary);
      out[fs::relative(e.path(), root).string()] = {std::istreambuf_iterator<char>(in), {}};
    }
  }
  return out;
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "xferlab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = harness::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) throw std::runtime_error("command " + args[1] + " failed: " + err.str());
  return code;
}

Verdict reproducibility(const fs::path& work) {
  std::vector<std::map<std::string, std::string>> runs;
  for (int run = 0; run < 2; ++run) {
    const fs::path root = work / ("repro" + std::to_string(run));
    fs::remove_all(root);
    fs::create_directories(root);
    const auto config = root / "config.json";
    std::ofstream(config) << R"({"source_dataset": ")" << (root / "src").string() << R"(", "target_dataset": ")"
                          << (root / "tgt").string() << R"(", "folds": 1, "seeds": [4], "subset_sizes": [10, 2],
      "generator": {"epochs_per_recording": 6},
      "network": {"filters": 3, "hidden": 3, "attention": 3, "seq_hidden": 3, "seq_len": 2},
      "plan": {"pretrain_epochs": 2, "transfer_epochs": 2, "val_every": 2, "batch": 8, "target_pairs": 4}})";
    const auto c = config.string();
    cli({"generate", "--config", c, "--recordings", "6", "--seed", "8", "--out", (root / "src").string()});
    cli({"generate", "--config", c, "--recordings", "14", "--seed", "9", "--out", (root / "tgt").string()});
    for (const std::string arch : {"arnn", "seqsleepnet"}) {
      cli({"pretrain", "--config", c, "--architecture", arch, "--out", (root / "pre").string()});
      cli({"transfer", "--config", c, "--architecture", arch, "--checkpoint-dir", (root / "pre").string(), "--out",
           (root / ("tr_" + arch)).string()});
      cli({"project", "--config", c, "--architecture", arch, "--checkpoint",
           (root / "pre" / ("pretrain_" + arch + "_seed4.ckpt")).string(), "--dataset", (root / "tgt").string(),
           "--out", (root / ("proj_" + arch)).string()});
    }
    cli({"metrics", "--input", (root / "tr_arnn" / "metrics.csv").string(), "--input",
         (root / "tr_seqsleepnet" / "metrics.csv").string(), "--out", (root / "merged").string()});
    runs.push_back(csv_files(root));
  }
  std::size_t differing = 0;
  for (const auto& [name, bytes] : runs[0]) {
    const auto it = runs[1].find(name);
    differing += it == runs[1].end() || it->second != bytes;
  }
  differing += runs[0].size() != runs[1].size();
  return {differing == 0 && runs[0].size() > 10,
          fmt("%zu CSV files from generate/pretrain/transfer/project/metrics compared, %zu differ", runs[0].size(),
              differing)};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "xferlab_acceptance";
  fs::create_directories(work);
  report_file.open(work / "acceptance_report.txt", std::ios::trunc);

  report(1, "gradient correctness", gradient_correctness);
  report(2, "loss composition", loss_composition);
  report(3, "metric oracles", metric_oracles);
  report(4, "minibatch protocol", minibatch_protocol);
  report(5, "ensemble aggregation", ensemble_aggregation);

  emit("# running the default benchmark grid in " + work.string() + "\n");
  const Grid grid = run_default_grid(work / "grid");
  report(6, "direct transfer is worst", [&] { return direct_is_worst(grid); });
  report(7, "feature matching vs finetuning at 2 recordings", [&] { return feature_match_beats_finetune(grid); });
  report(8, "accuracy non-decreasing in subset size", [&] { return monotone_in_data(grid); });

  report(9, "preprocessing", preprocessing);
  report(10, "reproducibility", [&] { return reproducibility(work); });

  emit(fmt("%d of 10 criteria failed\n", failures));
  return failures == 0 ? 0 : 1;
}
