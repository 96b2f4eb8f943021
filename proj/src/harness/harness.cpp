#include "xferlab/harness/harness.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "xferlab/error.hpp"
#include "xferlab/gradcore/params.hpp"
#include "xferlab/rng.hpp"

namespace xferlab::harness {

using nlohmann::json;
using transfer::Strategy;

namespace {

constexpr std::uint64_t kPretrainTag = 0x70726574ULL;
constexpr std::uint64_t kTransferTag = 0x7866657aULL;

const std::vector<Strategy> kAllStrategies = {Strategy::direct, Strategy::scratch, Strategy::finetune,
                                              Strategy::finetune_kl, Strategy::feature_match};

// ---- JSON helpers ----------------------------------------------------------

template <class T>
T get_as(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type (" + std::string(j.type_name()) + ")");
  }
}

std::size_t get_count(const json& j, const std::string& key) {
  if (!j.is_number_integer() || j.get<long long>() < 0) {
    throw ConfigError("config key '" + key + "' must be a non-negative integer");
  }
  return j.get<std::size_t>();
}

double get_number(const json& j, const std::string& key) {
  if (!j.is_number()) throw ConfigError("config key '" + key + "' must be a number");
  return j.get<double>();
}

void require_object(const json& j, const std::string& key) {
  if (!j.is_object()) throw ConfigError("config key '" + key + "' must be an object");
}

void unknown_key(const std::string& key) { throw ConfigError("unknown config key '" + key + "'"); }

void apply_network(const json& j, models::NetworkConfig& n) {
  require_object(j, "network");
  for (const auto& [k, v] : j.items()) {
    const std::string key = "network." + k;
    if (k == "filters") n.arnn.filters = get_count(v, key);
    else if (k == "hidden") n.arnn.hidden = get_count(v, key);
    else if (k == "attention") n.arnn.attention = get_count(v, key);
    else if (k == "seq_hidden") n.seq.seq_hidden = get_count(v, key);
    else if (k == "seq_len") n.seq.seq_len = get_count(v, key);
    else unknown_key(key);
  }
  n.seq.encoder = n.arnn;
}

void apply_plan(const json& j, transfer::TransferPlan& p) {
  require_object(j, "plan");
  for (const auto& [k, v] : j.items()) {
    const std::string key = "plan." + k;
    if (k == "pretrain_epochs") p.pretrain_epochs = get_count(v, key);
    else if (k == "transfer_epochs") p.transfer_epochs = get_count(v, key);
    else if (k == "val_every") p.val_every = get_count(v, key);
    else if (k == "lr") p.lr = get_number(v, key);
    else if (k == "batch") p.finetune_batch = get_count(v, key);
    else if (k == "target_pairs") p.n_target_pairs = get_count(v, key);
    else if (k == "match") p.match = transfer::parse_match_kind(get_as<std::string>(v, key));
    else if (k == "lambda2") p.lambda2 = get_number(v, key);
    else if (k == "lambda_kl") p.lambda_kl = get_number(v, key);
    else unknown_key(key);
  }
}

void apply_generator(const json& j, data::GeneratorSpec& g) {
  require_object(j, "generator");
  for (const auto& [k, v] : j.items()) {
    const std::string key = "generator." + k;
    if (k == "recordings") g.n_recordings = get_count(v, key);
    else if (k == "epochs_per_recording") g.markov.epochs_per_recording = get_count(v, key);
    else if (k == "seed") g.seed = get_as<std::uint64_t>(v, key);
    else if (k == "subject_variability") g.subject_variability = get_number(v, key);
    else if (k == "source_sigma") g.source.sigma = get_number(v, key);
    else if (k == "target_sigma") g.target.sigma = get_number(v, key);
    else unknown_key(key);
  }
}

std::vector<Strategy> parse_strategy_list(const std::vector<std::string>& names) {
  std::vector<Strategy> out;
  for (const auto& n : names) out.push_back(transfer::parse_strategy(n));
  return out;
}

// ---- files -----------------------------------------------------------------

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw Error("write failed: " + path.string());
}

void require_dir(const fs::path& p, const std::string& what) {
  if (p.empty()) throw ConfigError(what + " is not set");
  if (!fs::is_directory(p)) throw ConfigError(what + " '" + p.string() + "' does not exist");
}

void require_file(const fs::path& p, const std::string& what) {
  if (p.empty()) throw ConfigError(what + " is not set");
  if (!fs::is_regular_file(p)) throw ConfigError(what + " '" + p.string() + "' does not exist");
}

// ---- worker pool -----------------------------------------------------------

// Runs job(i) for i in [0, n). On failure, stops handing out work and
// rethrows the failure with the lowest index.
void run_pool(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& job) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, std::max<std::size_t>(n, 1));
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (std::size_t i; !failed && (i = next++) < n;) {
      try {
        job(i);
      } catch (...) {
        errors[i] = std::current_exception();
        failed = true;
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> threads;
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Re-raises the current exception with `context` prepended, keeping config
// errors distinguishable.
[[noreturn]] void rethrow_with(const std::string& context) {
  try {
    throw;
  } catch (const ConfigError& e) {
    throw ConfigError(context + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(context + ": " + e.what());
  }
}

std::unique_ptr<models::StagingNetwork> load_network(const models::NetworkConfig& config, const fs::path& path) {
  std::mt19937_64 rng(0);
  auto net = models::make_network(config, rng);
  auto params = net->params();
  grad::assign_params(params, grad::load_checkpoint(path));
  return net;
}

data::EpochStore open_store(const std::string& name, const fs::path& root) {
  return data::load_store(name, data::load_dataset(root));
}

std::string job_context(const JobAccess& j) {
  std::ostringstream s;
  s << "fold " << j.fold << ", subset " << j.subset_size << "/" << j.subset_index << ", strategy "
    << transfer::strategy_name(j.strategy) << ", seed " << j.seed;
  return s.str();
}

std::size_t strategy_rank(Strategy s) {
  return static_cast<std::size_t>(std::find(kAllStrategies.begin(), kAllStrategies.end(), s) - kAllStrategies.begin());
}

}  // namespace

// ---- config ----------------------------------------------------------------

void ExperimentConfig::validate() const {
  try {
    generator.markov.validate();
    generator.source.validate();
    generator.target.validate();
  } catch (const ContractError& e) {
    throw ConfigError(std::string("generator: ") + e.what());
  }
  if (generator.n_recordings == 0) throw ConfigError("generator.recordings must be positive");
  if (generator.markov.epochs_per_recording == 0) throw ConfigError("generator.epochs_per_recording must be positive");
  if (!(generator.subject_variability >= 0.0 && generator.subject_variability < 1.0)) {
    throw ConfigError("generator.subject_variability must be in [0, 1)");
  }
  const auto& a = network.arnn;
  if (a.filters == 0 || a.hidden == 0 || a.attention == 0 || network.seq.seq_hidden == 0 ||
      network.seq.seq_len == 0) {
    throw ConfigError("network sizes must be positive");
  }
  if (strategies.empty()) throw ConfigError("strategies is empty");
  if (subset_sizes.empty()) throw ConfigError("subset_sizes is empty");
  for (std::size_t s : subset_sizes) {
    if (s != 10 && s != 5 && s != 2) throw ConfigError("subset size " + std::to_string(s) + " is not one of 10, 5, 2");
  }
  if (folds == 0) throw ConfigError("folds must be positive");
  if (n_test == 0 || n_val == 0) throw ConfigError("n_val and n_test must be positive");
  if (seeds.empty()) throw ConfigError("seeds is empty");
  plan.validate();
}

ExperimentConfig default_config() {
  ExperimentConfig c;
  c.generator.markov = data::StageMarkov::default_chain(60);
  c.generator.n_recordings = 14;
  c.network.arnn = {.freq_bins = preproc::kBins, .filters = 8, .hidden = 8, .attention = 8};
  c.network.seq = {.encoder = c.network.arnn, .seq_hidden = 8, .seq_len = 3};
  c.strategies = kAllStrategies;
  c.plan.pretrain_epochs = 10;
  c.plan.transfer_epochs = 20;
  c.plan.val_every = 10;
  c.plan.lr = 1e-3;
  c.plan.finetune_batch = 8;  // same 8 target samples per update as feature matching
  return c;
}

ExperimentConfig parse_config(const std::string& json_text, const std::string& source_name, ExperimentConfig c) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source_name + ": invalid JSON at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  require_object(j, "<root>");
  for (const auto& [k, v] : j.items()) {
    if (k == "architecture") c.network.architecture = models::parse_architecture(get_as<std::string>(v, k));
    else if (k == "strategies") c.strategies = parse_strategy_list(get_as<std::vector<std::string>>(v, k));
    else if (k == "subset_sizes") c.subset_sizes = get_as<std::vector<std::size_t>>(v, k);
    else if (k == "folds") c.folds = get_count(v, k);
    else if (k == "n_val") c.n_val = get_count(v, k);
    else if (k == "n_test") c.n_test = get_count(v, k);
    else if (k == "seeds") c.seeds = get_as<std::vector<std::uint64_t>>(v, k);
    else if (k == "subset_seed") c.subset_seed = get_as<std::uint64_t>(v, k);
    else if (k == "workers") c.workers = get_count(v, k);
    else if (k == "source_dataset") c.source_dataset = get_as<std::string>(v, k);
    else if (k == "target_dataset") c.target_dataset = get_as<std::string>(v, k);
    else if (k == "checkpoint_dir") c.checkpoint_dir = get_as<std::string>(v, k);
    else if (k == "checkpoint") c.checkpoint = get_as<std::string>(v, k);
    else if (k == "dataset") c.dataset = get_as<std::string>(v, k);
    else if (k == "inputs") {
      c.inputs.clear();
      for (const auto& p : get_as<std::vector<std::string>>(v, k)) c.inputs.emplace_back(p);
    }
    else if (k == "output") c.output = get_as<std::string>(v, k);
    else if (k == "network") apply_network(v, c.network);
    else if (k == "plan") apply_plan(v, c.plan);
    else if (k == "generator") apply_generator(v, c.generator);
    else unknown_key(k);
  }
  return c;
}

ExperimentConfig load_config(const fs::path& path, ExperimentConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.string(), std::move(base));
}

// ---- generate --------------------------------------------------------------

void cmd_generate(const ExperimentConfig& config) {
  config.validate();
  const fs::path out = config.output;
  if (fs::exists(out)) {
    if (!fs::is_directory(out)) throw ConfigError("output '" + out.string() + "' exists and is not a directory");
    for (const auto& entry : fs::directory_iterator(out)) {
      if (!entry.is_directory() || !entry.path().filename().string().starts_with("rec_")) {
        throw ConfigError("refusing to overwrite '" + out.string() + "': it holds something other than a dataset");
      }
    }
  }
  const auto ds = data::generate_dataset(config.generator);
  fs::path staging = out;
  staging += ".partial";
  fs::remove_all(staging);
  try {
    if (staging.has_parent_path()) fs::create_directories(staging.parent_path());
    data::save_dataset(ds, staging);
    fs::remove_all(out);
    fs::rename(staging, out);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(staging, ec);
    throw;
  }
}

// ---- pretrain --------------------------------------------------------------

std::string pretrain_checkpoint_name(models::Architecture a, std::uint64_t seed) {
  return "pretrain_" + models::architecture_name(a) + "_seed" + std::to_string(seed) + ".ckpt";
}

std::vector<PretrainOutcome> cmd_pretrain(const ExperimentConfig& config) {
  config.validate();
  require_dir(config.source_dataset, "source_dataset");
  const auto store = open_store("source", config.source_dataset);
  const auto ids = store.ids();
  if (ids.size() <= config.n_val) {
    throw ConfigError("source dataset has " + std::to_string(ids.size()) + " recordings; need more than n_val = " +
                      std::to_string(config.n_val));
  }
  const std::vector<std::size_t> train(ids.begin(), ids.end() - static_cast<std::ptrdiff_t>(config.n_val));
  const std::vector<std::size_t> val(ids.end() - static_cast<std::ptrdiff_t>(config.n_val), ids.end());
  fs::create_directories(config.output);

  std::vector<PretrainOutcome> outcomes(config.seeds.size());
  run_pool(config.seeds.size(), config.workers, [&](std::size_t i) {
    const std::uint64_t seed = config.seeds[i];
    try {
      auto plan = config.plan;
      plan.seed = derive_seed({seed, kPretrainTag});
      const auto result = transfer::pretrain(plan, store, train, val, config.network);
      const std::string name = pretrain_checkpoint_name(config.network.architecture, seed);
      PretrainOutcome& o = outcomes[i];
      o.seed = seed;
      o.checkpoint = config.output / name;
      o.log = config.output / (name.substr(0, name.size() - 5) + "_log.csv");
      o.best_step = result.best_step.value_or(0);
      o.best_val_accuracy = result.best_val_accuracy;
      grad::save_checkpoint(o.checkpoint, result.network->params());
      auto log = open_output(o.log);
      transfer::write_log_csv(log, result.log);
      finish(log, o.log);
    } catch (...) {
      rethrow_with("pretrain seed " + std::to_string(seed));
    }
  });
  return outcomes;
}

// ---- transfer --------------------------------------------------------------

TransferOutcome cmd_transfer(const ExperimentConfig& config) {
  config.validate();
  require_dir(config.target_dataset, "target_dataset");
  const bool needs_source =
      std::find(config.strategies.begin(), config.strategies.end(), Strategy::feature_match) != config.strategies.end();
  const bool needs_pretrained = std::any_of(config.strategies.begin(), config.strategies.end(),
                                            [](Strategy s) { return s != Strategy::scratch; });
  if (needs_source) require_dir(config.source_dataset, "source_dataset");
  const fs::path ckpt_dir = config.checkpoint_dir.empty() ? config.output : config.checkpoint_dir;
  std::map<std::uint64_t, fs::path> ckpt_paths;
  if (needs_pretrained) {
    for (auto seed : config.seeds) {
      const fs::path p = ckpt_dir / pretrain_checkpoint_name(config.network.architecture, seed);
      require_file(p, "pretrained checkpoint");
      ckpt_paths[seed] = p;
    }
  }

  const auto target = open_store("target", config.target_dataset);
  std::optional<data::EpochStore> source;
  std::vector<std::size_t> source_ids;
  if (needs_source) {
    source.emplace(open_store("source", config.source_dataset));
    source_ids = source->ids();
  }
  const auto folds = [&] {
    try {
      return data::make_folds(target.ids(), config.folds, config.n_val, config.n_test);
    } catch (const ContractError& e) {
      throw ConfigError(e.what());
    }
  }();
  for (const auto& f : folds) {
    if (f.train.size() != 10) {
      throw ConfigError("each fold needs a 10-recording training pool; target dataset has " +
                        std::to_string(target.ids().size()) + " recordings with n_val = " + std::to_string(config.n_val) +
                        " and n_test = " + std::to_string(config.n_test));
    }
  }
  std::map<std::uint64_t, std::unique_ptr<models::StagingNetwork>> pretrained;
  for (const auto& [seed, path] : ckpt_paths) {
    try {
      pretrained[seed] = load_network(config.network, path);
    } catch (const std::exception& e) {
      throw ConfigError("checkpoint '" + path.string() + "' does not match the " +
                        models::architecture_name(config.network.architecture) + " network: " + e.what());
    }
  }

  struct Job {
    JobAccess key;
    std::vector<data::Subset> subsets;  // direct covers several
    const data::Fold* fold;
  };
  std::vector<Job> jobs;
  for (auto seed : config.seeds) {
    for (const auto& fold : folds) {
      std::vector<data::Subset> selected;
      for (auto& s : data::split_subsets(fold.train, config.subset_seed)) {
        if (std::find(config.subset_sizes.begin(), config.subset_sizes.end(), s.size) != config.subset_sizes.end()) {
          selected.push_back(std::move(s));
        }
      }
      for (Strategy st : config.strategies) {
        if (st == Strategy::direct) {
          // No training: one evaluation, reported once per subset size.
          std::vector<data::Subset> firsts;
          for (const auto& s : selected) {
            if (s.index == 0) firsts.push_back(s);
          }
          jobs.push_back({{fold.index, 0, 0, seed, st, {}, fold.test}, firsts, &fold});
          continue;
        }
        for (const auto& s : selected) jobs.push_back({{fold.index, s.size, s.index, seed, st, {}, fold.test}, {s}, &fold});
      }
    }
  }

  const std::string arch = models::architecture_name(config.network.architecture);
  const fs::path log_dir = config.output / "logs";
  fs::create_directories(log_dir);
  std::vector<std::vector<eval::MetricsRow>> job_rows(jobs.size());
  run_pool(jobs.size(), config.workers, [&](std::size_t i) {
    Job& job = jobs[i];
    try {
      data::AccessAudit audit;
      const auto tstore = target.audited(&audit);
      std::optional<data::EpochStore> sstore;
      if (source) sstore.emplace(source->audited(&audit));
      transfer::TrainingData td;
      td.target_store = &tstore;
      td.source_store = sstore ? &*sstore : nullptr;
      td.source_ids = source_ids;
      td.train_ids = job.subsets.empty() ? std::vector<std::size_t>{} : job.subsets.front().ids;
      td.val_ids = job.fold->val;

      auto plan = config.plan;
      plan.strategy = job.key.strategy;
      plan.seed = derive_seed({kTransferTag, job.key.seed, job.key.fold, job.key.subset_size, job.key.subset_index,
                               strategy_rank(job.key.strategy)});
      const auto* pre = pretrained.contains(job.key.seed) ? pretrained.at(job.key.seed).get() : nullptr;
      const auto result = transfer::run_strategy(plan, td, pre, config.network);

      job.key.reads = audit.entries();
      for (const auto& [dataset, rec, modality] : job.key.reads) {
        if (dataset == "target" && std::count(job.fold->test.begin(), job.fold->test.end(), rec)) {
          throw Error("training read test recording " + std::to_string(rec));
        }
      }

      const auto pred = eval::predict(*result.network, target, job.fold->test, Modality::target);
      const auto m = eval::evaluate(pred.pred, pred.truth);
      for (const auto& s : job.subsets) {
        job_rows[i].push_back({transfer::strategy_name(job.key.strategy), arch, s.size, job.key.fold, s.index,
                               job.key.seed, m.accuracy, m.kappa, m.weighted_f1, m.n});
      }
      if (job.key.strategy != Strategy::direct) {
        const fs::path log_path = log_dir / (arch + "_" + transfer::strategy_name(job.key.strategy) + "_fold" +
                                             std::to_string(job.key.fold) + "_size" + std::to_string(job.key.subset_size) +
                                             "_sub" + std::to_string(job.key.subset_index) + "_seed" +
                                             std::to_string(job.key.seed) + ".csv");
        auto log = open_output(log_path);
        transfer::write_log_csv(log, result.log);
        finish(log, log_path);
      }
    } catch (...) {
      rethrow_with(job_context(job.key));
    }
  });

  TransferOutcome outcome;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    outcome.rows.insert(outcome.rows.end(), job_rows[i].begin(), job_rows[i].end());
    outcome.access.push_back(std::move(jobs[i].key));
  }
  std::stable_sort(outcome.rows.begin(), outcome.rows.end(), [](const auto& a, const auto& b) {
    const auto key = [](const eval::MetricsRow& r) {
      return std::tuple(strategy_rank(transfer::parse_strategy(r.strategy)), std::size_t{10} - r.subset_size, r.fold,
                        r.subset_index, r.seed);
    };
    return key(a) < key(b);
  });
  outcome.summary = eval::summarize(outcome.rows);

  const fs::path metrics_path = config.output / "metrics.csv";
  auto metrics = open_output(metrics_path);
  eval::write_metrics_csv(metrics, outcome.rows);
  finish(metrics, metrics_path);
  const fs::path summary_path = config.output / "summary.csv";
  auto summary = open_output(summary_path);
  eval::write_summary_csv(summary, outcome.summary);
  finish(summary, summary_path);
  return outcome;
}

// ---- project ---------------------------------------------------------------

void cmd_project(const ExperimentConfig& config) {
  config.validate();
  require_file(config.checkpoint, "checkpoint");
  require_dir(config.dataset, "dataset");
  std::unique_ptr<models::StagingNetwork> net;
  try {
    net = load_network(config.network, config.checkpoint);
  } catch (const std::exception& e) {
    throw ConfigError("checkpoint '" + config.checkpoint.string() + "' does not match the " +
                      models::architecture_name(config.network.architecture) + " network: " + e.what());
  }
  const auto store = open_store("dataset", config.dataset);
  struct Meta {
    std::size_t rec, epoch;
    Modality modality;
    std::uint8_t stage;
  };
  std::vector<Meta> meta;
  std::vector<std::vector<double>> features;
  for (Modality modality : {Modality::source, Modality::target}) {
    for (std::size_t id : store.ids()) {
      auto f = eval::extract_features(*net, store, id, modality);
      for (std::size_t e = 0; e < f.size(); ++e) {
        meta.push_back({id, e, modality, store.label(id, e)});
        features.push_back(std::move(f[e]));
      }
    }
  }
  const auto proj = eval::project_features_2d(features);
  fs::create_directories(config.output);
  const fs::path path = config.output / "projection.csv";
  auto out = open_output(path);
  out << "recording,epoch,modality,stage,x,y\n";
  for (std::size_t i = 0; i < meta.size(); ++i) {
    out << meta[i].rec << ',' << meta[i].epoch << ',' << modality_name(meta[i].modality) << ','
        << static_cast<int>(meta[i].stage) << ',' << eval::format_number(proj.coords[i][0]) << ','
        << eval::format_number(proj.coords[i][1]) << '\n';
  }
  finish(out, path);
}

// ---- metrics ---------------------------------------------------------------

std::vector<eval::SummaryRow> cmd_metrics(const ExperimentConfig& config) {
  if (config.inputs.empty()) throw ConfigError("metrics needs at least one input CSV");
  std::vector<eval::MetricsRow> rows;
  for (const auto& p : config.inputs) {
    require_file(p, "metrics input");
    std::ifstream in(p, std::ios::binary);
    auto part = eval::read_metrics_csv(in, p.string());
    rows.insert(rows.end(), part.begin(), part.end());
  }
  const auto summary = eval::summarize(rows);
  fs::create_directories(config.output);
  const fs::path path = config.output / "summary.csv";
  auto out = open_output(path);
  eval::write_summary_csv(out, summary);
  finish(out, path);
  return summary;
}

// ---- CLI -------------------------------------------------------------------

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Transfer-learning experiments for paired-modality sleep staging"};
  app.require_subcommand(1);

  struct Flags {
    std::string config, out, source, target, checkpoint_dir, checkpoint, dataset, architecture, strategies;
    std::uint64_t seed = 0;
    std::size_t workers = 0, recordings = 0, epochs = 0;
    double sigma = 0.0;
    std::vector<std::string> inputs;
  } f;
  std::map<std::string, CLI::Option*> given;

  auto common = [&](CLI::App* sub) {
    given[sub->get_name() + ".config"] = sub->add_option("--config", f.config, "JSON config file");
    given[sub->get_name() + ".seed"] = sub->add_option("--seed", f.seed, "seed (generator seed, or the single run seed)");
    given[sub->get_name() + ".out"] = sub->add_option("--out", f.out, "output directory");
    given[sub->get_name() + ".workers"] = sub->add_option("--workers", f.workers, "parallel jobs (0 = all cores)");
  };
  auto arch = [&](CLI::App* sub) {
    given[sub->get_name() + ".architecture"] = sub->add_option("--architecture", f.architecture, "arnn or seqsleepnet");
  };

  auto* gen = app.add_subcommand("generate", "write a synthetic paired dataset");
  common(gen);
  given["generate.recordings"] = gen->add_option("--recordings", f.recordings, "number of recordings");
  given["generate.epochs"] = gen->add_option("--epochs-per-recording", f.epochs, "30 s epochs per recording");
  given["generate.sigma"] = gen->add_option("--sigma", f.sigma, "private noise level of both modalities");

  auto* pre = app.add_subcommand("pretrain", "train source-modality networks, one per seed");
  common(pre);
  arch(pre);
  given["pretrain.source"] = pre->add_option("--source", f.source, "source dataset directory");

  auto* tr = app.add_subcommand("transfer", "cross-validated comparison of transfer strategies");
  common(tr);
  arch(tr);
  given["transfer.source"] = tr->add_option("--source", f.source, "source dataset directory");
  given["transfer.target"] = tr->add_option("--target", f.target, "target dataset directory");
  given["transfer.checkpoint_dir"] = tr->add_option("--checkpoint-dir", f.checkpoint_dir, "pretrained checkpoints");
  given["transfer.strategies"] = tr->add_option("--strategies", f.strategies, "comma-separated strategy list");

  auto* proj = app.add_subcommand("project", "2-D PCA projection of network features");
  common(proj);
  arch(proj);
  given["project.checkpoint"] = proj->add_option("--checkpoint", f.checkpoint, "network checkpoint");
  given["project.dataset"] = proj->add_option("--dataset", f.dataset, "paired dataset directory");

  auto* met = app.add_subcommand("metrics", "summarise one or more metrics CSVs");
  common(met);
  given["metrics.inputs"] = met->add_option("--input", f.inputs, "metrics CSV (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  auto has = [&](const std::string& key) {
    auto it = given.find(name + "." + key);
    return it != given.end() && it->second->count() > 0;
  };

  try {
    ExperimentConfig config = has("config") ? load_config(f.config) : default_config();
    if (has("out")) config.output = f.out;
    if (has("workers")) config.workers = f.workers;
    if (has("seed")) {
      if (name == "generate") config.generator.seed = f.seed;
      else config.seeds = {f.seed};
    }
    if (has("architecture")) config.network.architecture = models::parse_architecture(f.architecture);
    if (has("recordings")) config.generator.n_recordings = f.recordings;
    if (has("epochs")) config.generator.markov.epochs_per_recording = f.epochs;
    if (has("sigma")) config.generator.source.sigma = config.generator.target.sigma = f.sigma;
    if (has("source")) config.source_dataset = f.source;
    if (has("target")) config.target_dataset = f.target;
    if (has("checkpoint_dir")) config.checkpoint_dir = f.checkpoint_dir;
    if (has("checkpoint")) config.checkpoint = f.checkpoint;
    if (has("dataset")) config.dataset = f.dataset;
    if (has("inputs")) config.inputs.assign(f.inputs.begin(), f.inputs.end());
    if (has("strategies")) {
      std::vector<std::string> names;
      std::stringstream ss(f.strategies);
      for (std::string item; std::getline(ss, item, ',');) names.push_back(item);
      config.strategies = parse_strategy_list(names);
    }

    if (name == "generate") {
      cmd_generate(config);
      out << "wrote " << config.generator.n_recordings << " recordings to " << config.output.string() << "\n";
    } else if (name == "pretrain") {
      for (const auto& o : cmd_pretrain(config)) {
        out << "seed " << o.seed << ": best validation accuracy " << eval::format_number(o.best_val_accuracy)
            << " at step " << o.best_step << " -> " << o.checkpoint.string() << "\n";
      }
    } else if (name == "transfer") {
      const auto outcome = cmd_transfer(config);
      eval::write_summary_csv(out, outcome.summary);
    } else if (name == "project") {
      cmd_project(config);
      out << "wrote " << (config.output / "projection.csv").string() << "\n";
    } else {
      eval::write_summary_csv(out, cmd_metrics(config));
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace xferlab::harness
