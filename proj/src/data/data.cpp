#include "xferlab/data/data.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "xferlab/error.hpp"
#include "xferlab/rng.hpp"

namespace xferlab::data {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr std::size_t kComponents = 3;  // sinusoids per band
constexpr std::size_t kMaxSlots = 6;    // bands per stage
constexpr std::uint64_t kLatentTag = 0x6c6174656e74ULL;
constexpr std::uint64_t kSubjectTag = 0x7375626aULL;
constexpr std::uint64_t kNoiseTag = 0x6e6f697365ULL;
constexpr std::uint64_t kStageTag = 0x7374616765ULL;

bool is_distribution(std::span<const double> p) {
  double s = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) return false;
    s += v;
  }
  return std::abs(s - 1.0) <= 1e-9;
}

struct EpochLatents {
  std::array<std::array<double, kComponents>, kMaxSlots> phase{};
  std::array<std::array<double, kComponents>, kMaxSlots> jitter{};
  std::array<double, kMaxSlots> modulation{};
  std::vector<double> background_white;
};

EpochLatents draw_latents(std::uint64_t dataset_seed, std::size_t recording, std::size_t epoch,
                          std::size_t samples) {
  std::mt19937_64 rng(derive_seed({dataset_seed, recording, epoch, kLatentTag}));
  std::uniform_real_distribution<double> uni(0.0, kTwoPi);
  std::normal_distribution<double> nd(0.0, 1.0);
  EpochLatents l;
  for (std::size_t j = 0; j < kMaxSlots; ++j) {
    for (std::size_t c = 0; c < kComponents; ++c) {
      l.phase[j][c] = uni(rng);
      l.jitter[j][c] = 0.04 * nd(rng);
    }
    l.modulation[j] = std::exp(0.25 * nd(rng));
  }
  l.background_white.resize(samples);
  for (auto& v : l.background_white) v = nd(rng);
  return l;
}

// First-order high-shelf: flat below the corner, +6 dB/octave above it.
void apply_tilt(std::vector<double>& x, double corner_hz, double fs) {
  if (corner_hz <= 0.0 || x.empty()) return;
  const double k = fs / (kTwoPi * corner_hz);
  double prev = x.front();
  for (auto& v : x) {
    const double cur = v;
    v = cur + k * (cur - prev);
    prev = cur;
  }
}

// Constant-peak band-pass biquad (RBJ), Q = 2.
struct Resonator {
  double b0, b2, a1, a2, z1 = 0.0, z2 = 0.0;
  Resonator(double f0, double fs) {
    const double w0 = kTwoPi * f0 / fs;
    const double alpha = std::sin(w0) / (2.0 * 2.0);
    const double a0 = 1.0 + alpha;
    b0 = alpha / a0;
    b2 = -alpha / a0;
    a1 = -2.0 * std::cos(w0) / a0;
    a2 = (1.0 - alpha) / a0;
  }
  double step(double in) {
    const double out = b0 * in + z1;
    z1 = -a1 * out + z2;
    z2 = b2 * in - a2 * out;
    return out;
  }
};

void write_f32(const fs::path& file, std::span<const double> values) {
  std::vector<char> bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(values[i]));
    for (int b = 0; b < 4; ++b) bytes[i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + file.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::vector<char> read_bytes(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw FormatError(file.string() + ": cannot open");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<double> read_f32(const fs::path& file, std::size_t expected) {
  const auto bytes = read_bytes(file);
  if (bytes.size() % 4 != 0) {
    throw FormatError(file.string() + ": truncated sample at offset " +
                      std::to_string(bytes.size() - bytes.size() % 4));
  }
  if (bytes.size() != expected * 4) {
    throw FormatError(file.string() + ": expected " + std::to_string(expected * 4) +
                      " bytes, data ends at offset " + std::to_string(bytes.size()));
  }
  std::vector<double> out(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) {
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i * 4 + b])) << (8 * b);
    }
    out[i] = std::bit_cast<float>(bits);
  }
  return out;
}

std::optional<std::size_t> parse_rec_dir(const std::string& name) {
  if (!name.starts_with("rec_")) return std::nullopt;
  std::size_t k = 0;
  const char* first = name.data() + 4;
  const char* last = name.data() + name.size();
  auto [ptr, ec] = std::from_chars(first, last, k);
  if (ec != std::errc() || ptr != last || first == last) return std::nullopt;
  return k;
}

}  // namespace

// ---- StageMarkov ----------------------------------------------------------

void StageMarkov::validate() const {
  for (std::size_t i = 0; i < kNumStages; ++i) {
    if (!is_distribution(transition[i])) {
      throw ContractError("stage chain: transition row " + std::to_string(i) +
                          " is not a probability distribution");
    }
  }
  if (!is_distribution(initial)) throw ContractError("stage chain: initial is not a distribution");
  if (epochs_per_recording == 0) throw ContractError("stage chain: epochs_per_recording is 0");
}

StageVector StageMarkov::stationary(std::size_t max_iter, double tol) const {
  StageVector p;
  p.fill(1.0 / kNumStages);
  for (std::size_t it = 0; it < max_iter; ++it) {
    StageVector next{};
    for (std::size_t i = 0; i < kNumStages; ++i) {
      for (std::size_t j = 0; j < kNumStages; ++j) next[j] += p[i] * transition[i][j];
    }
    double diff = 0.0;
    for (std::size_t j = 0; j < kNumStages; ++j) diff = std::max(diff, std::abs(next[j] - p[j]));
    p = next;
    if (diff < tol) break;
  }
  return p;
}

std::vector<std::uint8_t> StageMarkov::sample(std::size_t n, std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  auto draw = [&](const StageVector& p) {
    const double u = uni(rng);
    double acc = 0.0;
    for (std::size_t k = 0; k < kNumStages; ++k) {
      acc += p[k];
      if (u < acc) return static_cast<std::uint8_t>(k);
    }
    return static_cast<std::uint8_t>(kNumStages - 1);
  };
  std::vector<std::uint8_t> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(draw(i == 0 ? initial : transition[out.back()]));
  return out;
}

StageMarkov StageMarkov::default_chain(std::size_t epochs_per_recording) {
  StageMarkov m;
  //                 W     N1    N2    N3    REM
  m.transition = {{{0.80, 0.10, 0.04, 0.01, 0.05},
                   {0.08, 0.70, 0.14, 0.02, 0.06},
                   {0.03, 0.05, 0.76, 0.11, 0.05},
                   {0.02, 0.02, 0.12, 0.84, 0.00},
                   {0.05, 0.06, 0.05, 0.00, 0.84}}};
  m.initial = {0.2, 0.2, 0.2, 0.2, 0.2};
  m.epochs_per_recording = epochs_per_recording;
  return m;
}

// ---- ModalityEmitter ------------------------------------------------------

void ModalityEmitter::validate() const {
  auto bad = [](double v) { return !std::isfinite(v) || v < 0.0; };
  if (bad(sigma)) throw ContractError("emitter: sigma must be finite and >= 0");
  if (bad(gain) || bad(background) || bad(band_noise) || bad(tilt_corner_hz) ||
      bad(band_noise_hz)) {
    throw ContractError("emitter: levels must be finite and >= 0");
  }
  for (std::size_t s = 0; s < kNumStages; ++s) {
    if (profile[s].size() > kMaxSlots) {
      throw ContractError("emitter: at most " + std::to_string(kMaxSlots) + " bands per stage");
    }
    for (const auto& b : profile[s]) {
      if (bad(b.amplitude) || !(b.centre_hz > 0.0) || !std::isfinite(b.centre_hz)) {
        throw ContractError("emitter: band of stage " + std::string(kStageNames[s]) +
                            " has an invalid centre or amplitude");
      }
    }
  }
}

ModalityEmitter ModalityEmitter::default_source() {
  ModalityEmitter e;
  e.profile[0] = {{10.0, 1.0}, {20.0, 0.4}};           // W: alpha, beta
  e.profile[1] = {{6.0, 0.7}, {10.0, 0.3}};            // N1: theta, fading alpha
  e.profile[2] = {{13.0, 0.7}, {4.0, 0.5}};            // N2: spindles, theta
  e.profile[3] = {{1.5, 1.6}, {3.0, 0.6}};             // N3: delta
  e.profile[4] = {{6.0, 0.5}, {2.5, 0.5}, {18.0, 0.3}};  // REM: theta, sawtooth, beta
  e.gain = 1.0;
  e.background = 0.3;
  e.sigma = 0.3;
  e.seed = 11;
  return e;
}

ModalityEmitter ModalityEmitter::default_target() {
  ModalityEmitter e;
  e.profile[0] = {{2.0, 1.0}, {24.0, 0.6}};            // W: eye movements, muscle
  e.profile[1] = {{1.0, 0.7}, {6.0, 0.4}};             // N1: slow eye movements
  e.profile[2] = {{13.0, 0.4}, {4.0, 0.6}};            // N2
  e.profile[3] = {{1.5, 1.2}, {8.0, 0.3}};             // N3
  e.profile[4] = {{3.0, 1.0}, {24.0, 0.2}};            // REM: rapid eye movements
  e.gain = 0.5;
  e.tilt_corner_hz = 8.0;
  e.band_noise = 0.3;
  e.band_noise_hz = 30.0;
  e.background = 0.3;
  e.sigma = 0.3;
  e.seed = 23;
  return e;
}

// ---- generation -----------------------------------------------------------

RawChannel emit_channel(const ModalityEmitter& emitter, std::span<const std::uint8_t> stages,
                        std::uint64_t dataset_seed, std::size_t recording, double fs,
                        double subject_variability, Modality modality) {
  emitter.validate();
  const auto per_epoch = static_cast<std::size_t>(std::llround(preproc::kEpochSeconds * fs));
  RawChannel out{.samples = std::vector<double>(stages.size() * per_epoch, 0.0), .fs = fs,
                 .modality = modality};

  // Subject-level factors, shared by all emitters of this recording.
  std::mt19937_64 subject_rng(derive_seed({dataset_seed, recording, kSubjectTag}));
  std::normal_distribution<double> nd(0.0, 1.0);
  const double freq_scale = std::exp(0.5 * subject_variability * nd(subject_rng));
  std::array<double, kMaxSlots> slot_gain{};
  for (auto& g : slot_gain) g = std::exp(subject_variability * nd(subject_rng));

  // Pink-ish background: white noise through three leaky integrators.
  const std::array<double, 3> poles{0.99, 0.9, 0.5};
  const std::array<double, 3> weights{0.1, 0.3, 0.6};
  std::array<double, 3> state{};

  for (std::size_t e = 0; e < stages.size(); ++e) {
    const auto latents = draw_latents(dataset_seed, recording, e, per_epoch);
    const auto& bands = emitter.profile[stages[e]];
    double* x = out.samples.data() + e * per_epoch;
    for (std::size_t j = 0; j < bands.size(); ++j) {
      const double amp = bands[j].amplitude * slot_gain[j] * latents.modulation[j] /
                         std::sqrt(static_cast<double>(kComponents));
      for (std::size_t c = 0; c < kComponents; ++c) {
        const double f = bands[j].centre_hz * freq_scale * (1.0 + latents.jitter[j][c]);
        const double w = kTwoPi * f / fs;
        for (std::size_t n = 0; n < per_epoch; ++n) {
          x[n] += amp * std::sin(w * static_cast<double>(n) + latents.phase[j][c]);
        }
      }
    }
    for (std::size_t n = 0; n < per_epoch; ++n) {
      double pink = 0.0;
      for (std::size_t k = 0; k < 3; ++k) {
        state[k] = poles[k] * state[k] + latents.background_white[n];
        pink += weights[k] * state[k] * std::sqrt(1.0 - poles[k] * poles[k]);
      }
      x[n] += emitter.background * pink;
    }
  }

  apply_tilt(out.samples, emitter.tilt_corner_hz, fs);
  for (auto& v : out.samples) v *= emitter.gain;

  if (emitter.sigma > 0.0 || emitter.band_noise > 0.0) {
    Resonator res(std::min(emitter.band_noise_hz, 0.45 * fs), fs);
    for (std::size_t e = 0; e < stages.size(); ++e) {
      std::mt19937_64 rng(derive_seed({dataset_seed, recording, e, emitter.seed, kNoiseTag}));
      double* x = out.samples.data() + e * per_epoch;
      for (std::size_t n = 0; n < per_epoch; ++n) {
        const double white = nd(rng);
        const double band = res.step(nd(rng));
        x[n] += emitter.sigma * white + emitter.band_noise * 4.0 * band;
      }
    }
  }
  return out;
}

std::size_t PairedDataset::total_epochs() const {
  std::size_t n = 0;
  for (const auto& r : recordings) n += r.labels.size();
  return n;
}

PairedDataset generate_dataset(const GeneratorSpec& spec) {
  spec.markov.validate();
  spec.source.validate();
  spec.target.validate();
  if (!(spec.fs >= preproc::kTargetRate)) {
    throw ContractError("generator: fs must be at least 100 Hz");
  }
  if (!(spec.subject_variability >= 0.0)) {
    throw ContractError("generator: subject_variability must be >= 0");
  }
  PairedDataset ds;
  for (std::size_t k = 0; k < spec.n_recordings; ++k) {
    std::mt19937_64 rng(derive_seed({spec.seed, k, kStageTag}));
    PairedRecording rec;
    rec.id = k;
    rec.generator_seed = spec.seed;
    rec.labels = spec.markov.sample(spec.markov.epochs_per_recording, rng);
    rec.source = emit_channel(spec.source, rec.labels, spec.seed, k, spec.fs,
                              spec.subject_variability, Modality::source);
    rec.target = emit_channel(spec.target, rec.labels, spec.seed, k, spec.fs,
                              spec.subject_variability, Modality::target);
    ds.recordings.push_back(std::move(rec));
  }
  return ds;
}

// ---- disk format ----------------------------------------------------------

void save_dataset(const PairedDataset& ds, const fs::path& root) {
  fs::create_directories(root);
  for (const auto& rec : ds.recordings) {
    const fs::path dir = root / ("rec_" + std::to_string(rec.id));
    fs::create_directories(dir);
    json meta;
    meta["recording"] = rec.id;
    meta["n_epochs"] = rec.labels.size();
    meta["channels"] = {"source", "target"};
    meta["fs"] = {{"source", rec.source.fs}, {"target", rec.target.fs}};
    meta["generator_seed"] = rec.generator_seed;
    std::ofstream(dir / "meta.json", std::ios::trunc) << meta.dump(2) << "\n";
    write_f32(dir / "source.f32", rec.source.samples);
    write_f32(dir / "target.f32", rec.target.samples);
    std::ofstream labels(dir / "labels.u8", std::ios::binary | std::ios::trunc);
    labels.write(reinterpret_cast<const char*>(rec.labels.data()),
                 static_cast<std::streamsize>(rec.labels.size()));
  }
}

PairedDataset load_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) throw FormatError(root.string() + ": not a dataset directory");
  std::vector<std::pair<std::size_t, fs::path>> dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    if (auto k = parse_rec_dir(entry.path().filename().string())) dirs.emplace_back(*k, entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw FormatError(root.string() + ": no rec_<k> directories");

  PairedDataset ds;
  for (const auto& [k, dir] : dirs) {
    const fs::path meta_path = dir / "meta.json";
    json meta;
    try {
      const auto bytes = read_bytes(meta_path);
      meta = json::parse(bytes.begin(), bytes.end());
    } catch (const json::parse_error& e) {
      throw FormatError(meta_path.string() + ": malformed JSON at offset " +
                        std::to_string(e.byte));
    }
    PairedRecording rec;
    rec.id = k;
    std::size_t n_epochs = 0;
    try {
      n_epochs = meta.at("n_epochs").get<std::size_t>();
      rec.source.fs = meta.at("fs").at("source").get<double>();
      rec.target.fs = meta.at("fs").at("target").get<double>();
      rec.generator_seed = meta.value("generator_seed", std::uint64_t{0});
    } catch (const json::exception& e) {
      throw FormatError(meta_path.string() + ": " + e.what());
    }
    if (!(rec.source.fs > 0.0) || !(rec.target.fs > 0.0)) {
      throw FormatError(meta_path.string() + ": sampling rates must be positive");
    }
    rec.source.modality = Modality::source;
    rec.target.modality = Modality::target;

    const fs::path label_path = dir / "labels.u8";
    const auto label_bytes = read_bytes(label_path);
    if (label_bytes.size() != n_epochs) {
      throw FormatError(label_path.string() + ": " + std::to_string(label_bytes.size()) +
                        " labels but meta.json declares n_epochs = " + std::to_string(n_epochs) +
                        " (mismatch at offset " +
                        std::to_string(std::min(label_bytes.size(), n_epochs)) + ")");
    }
    rec.labels.resize(n_epochs);
    for (std::size_t i = 0; i < n_epochs; ++i) {
      rec.labels[i] = static_cast<std::uint8_t>(label_bytes[i]);
      if (rec.labels[i] >= kNumStages) {
        throw FormatError(label_path.string() + ": stage value " + std::to_string(rec.labels[i]) +
                          " at offset " + std::to_string(i));
      }
    }
    auto samples_for = [&](double fs) {
      return n_epochs * static_cast<std::size_t>(std::llround(preproc::kEpochSeconds * fs));
    };
    rec.source.samples = read_f32(dir / "source.f32", samples_for(rec.source.fs));
    rec.target.samples = read_f32(dir / "target.f32", samples_for(rec.target.fs));
    ds.recordings.push_back(std::move(rec));
  }
  return ds;
}

// ---- sequences and ensembles ----------------------------------------------

std::vector<std::size_t> sample_sequences(std::size_t n_epochs, std::size_t m, std::size_t shift) {
  if (m == 0 || shift == 0) throw ContractError("sample_sequences: M and shift must be positive");
  if (n_epochs < m) {
    throw ContractError("sample_sequences: " + std::to_string(n_epochs) +
                        " epochs is fewer than the sequence length " + std::to_string(m));
  }
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + m <= n_epochs; s += shift) starts.push_back(s);
  return starts;
}

EnsembleResult aggregate_ensemble(std::size_t n_epochs, std::span<const std::size_t> starts,
                                  std::span<const std::vector<StageVector>> window_posteriors) {
  if (starts.size() != window_posteriors.size()) {
    throw ContractError("aggregate_ensemble: starts and window posteriors differ in count");
  }
  EnsembleResult r;
  r.log_posterior.assign(n_epochs, StageVector{});
  std::vector<std::size_t> count(n_epochs, 0);
  for (std::size_t w = 0; w < starts.size(); ++w) {
    for (std::size_t k = 0; k < window_posteriors[w].size(); ++k) {
      const std::size_t e = starts[w] + k;
      if (e >= n_epochs) throw ContractError("aggregate_ensemble: window runs past the recording");
      for (std::size_t c = 0; c < kNumStages; ++c) {
        r.log_posterior[e][c] += std::log(std::max(window_posteriors[w][k][c], preproc::kLogFloor));
      }
      ++count[e];
    }
  }
  r.labels.resize(n_epochs);
  for (std::size_t e = 0; e < n_epochs; ++e) {
    if (count[e] == 0) {
      throw ContractError("aggregate_ensemble: epoch " + std::to_string(e) + " has no prediction");
    }
    const auto& lp = r.log_posterior[e];
    r.labels[e] = static_cast<std::uint8_t>(std::max_element(lp.begin(), lp.end()) - lp.begin());
  }
  return r;
}

// ---- protocol splits ------------------------------------------------------

std::vector<Subset> split_subsets(std::span<const std::size_t> train_ids, std::uint64_t seed) {
  if (train_ids.size() != 10) {
    throw ContractError("split_subsets: expected 10 training recordings, got " +
                        std::to_string(train_ids.size()));
  }
  std::vector<std::size_t> ids(train_ids.begin(), train_ids.end());
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  std::vector<Subset> out;
  for (std::size_t size : {10, 5, 2}) {
    for (std::size_t i = 0; i < 10 / size; ++i) {
      Subset s{.size = size, .index = i, .ids = {ids.begin() + static_cast<std::ptrdiff_t>(i * size),
                                                 ids.begin() + static_cast<std::ptrdiff_t>((i + 1) * size)}};
      std::sort(s.ids.begin(), s.ids.end());
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<Fold> make_folds(std::span<const std::size_t> ids, std::size_t n_folds,
                             std::size_t n_val, std::size_t n_test) {
  const std::size_t n = ids.size();
  if (n_folds == 0 || n_folds * n_test > n || n_test + n_val >= n) {
    throw ContractError("make_folds: cannot make " + std::to_string(n_folds) + " folds with " +
                        std::to_string(n_test) + " test and " + std::to_string(n_val) +
                        " validation recordings out of " + std::to_string(n));
  }
  std::vector<Fold> folds;
  for (std::size_t f = 0; f < n_folds; ++f) {
    Fold fold;
    fold.index = f;
    std::vector<bool> used(n, false);
    for (std::size_t i = 0; i < n_test; ++i) {
      const std::size_t p = (f * n_test + i) % n;
      fold.test.push_back(ids[p]);
      used[p] = true;
    }
    for (std::size_t i = 0; i < n_val; ++i) {
      const std::size_t p = (f * n_test + n_test + i) % n;
      fold.val.push_back(ids[p]);
      used[p] = true;
    }
    for (std::size_t p = 0; p < n; ++p) {
      if (!used[p]) fold.train.push_back(ids[p]);
    }
    folds.push_back(std::move(fold));
  }
  return folds;
}

// ---- audit and store ------------------------------------------------------

void AccessAudit::record(const std::string& dataset, std::size_t recording, Modality m) {
  std::lock_guard lock(mutex_);
  entries_.emplace(dataset, recording, m);
}

std::set<AccessAudit::Entry> AccessAudit::entries() const {
  std::lock_guard lock(mutex_);
  return entries_;
}

std::set<std::size_t> AccessAudit::recordings(const std::string& dataset) const {
  std::lock_guard lock(mutex_);
  std::set<std::size_t> out;
  for (const auto& [name, rec, m] : entries_) {
    if (name == dataset) out.insert(rec);
  }
  return out;
}

void AccessAudit::clear() {
  std::lock_guard lock(mutex_);
  entries_.clear();
}

PreparedRecording prepare_recording(const PairedRecording& rec) {
  PreparedRecording out;
  out.id = rec.id;
  out.labels = rec.labels;
  out.source = preproc::preprocess_channel(rec.source, rec.labels);
  out.target = preproc::preprocess_channel(rec.target, rec.labels);
  return out;
}

EpochStore::EpochStore(std::string name, std::vector<PreparedRecording> recordings)
    : name_(std::move(name)) {
  for (std::size_t i = 0; i < recordings.size(); ++i) {
    if (!index_.emplace(recordings[i].id, i).second) {
      throw ContractError("epoch store: duplicate recording id " + std::to_string(recordings[i].id));
    }
  }
  recordings_ = std::make_shared<const std::vector<PreparedRecording>>(std::move(recordings));
}

std::vector<std::size_t> EpochStore::ids() const {
  std::vector<std::size_t> out;
  for (const auto& [id, i] : index_) out.push_back(id);
  return out;
}

const PreparedRecording& EpochStore::rec(std::size_t id) const {
  auto it = index_.find(id);
  if (it == index_.end()) {
    throw ContractError("dataset '" + name_ + "' has no recording " + std::to_string(id));
  }
  return (*recordings_)[it->second];
}

std::size_t EpochStore::n_epochs(std::size_t id) const { return rec(id).labels.size(); }

namespace {
void check_epoch(const std::string& name, std::size_t id, std::size_t epoch, std::size_t n) {
  if (epoch >= n) {
    throw ContractError("dataset '" + name + "' recording " + std::to_string(id) + " has " +
                        std::to_string(n) + " epochs; epoch " + std::to_string(epoch) + " requested");
  }
}
}  // namespace

std::uint8_t EpochStore::label(std::size_t id, std::size_t epoch) const {
  const auto& r = rec(id);
  check_epoch(name_, id, epoch, r.labels.size());
  return r.labels[epoch];
}

const EpochTensor& EpochStore::epoch(std::size_t id, Modality m, std::size_t epoch) const {
  const auto& r = rec(id);
  const auto& epochs = m == Modality::source ? r.source : r.target;
  check_epoch(name_, id, epoch, epochs.size());
  if (audit_) audit_->record(name_, id, m);
  return epochs[epoch];
}

EpochStore EpochStore::audited(AccessAudit* audit) const {
  EpochStore copy = *this;
  copy.audit_ = audit;
  return copy;
}

EpochStore load_store(const std::string& name, const PairedDataset& ds) {
  std::vector<PreparedRecording> prepared;
  prepared.reserve(ds.recordings.size());
  for (const auto& r : ds.recordings) prepared.push_back(prepare_recording(r));
  return EpochStore(name, std::move(prepared));
}

}  // namespace xferlab::data
