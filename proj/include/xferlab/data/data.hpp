#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "xferlab/preproc/preproc.hpp"
#include "xferlab/stages.hpp"

namespace xferlab::data {

using preproc::EpochTensor;
using preproc::RawChannel;
using StageVector = std::array<double, kNumStages>;

// Hypnogram model: first-order Markov chain over the five stages.
struct StageMarkov {
  std::array<StageVector, kNumStages> transition{};
  StageVector initial{};
  std::size_t epochs_per_recording = 40;

  // Throws ContractError unless rows and `initial` are distributions
  // (entries >= 0, sums within 1e-9 of 1) and epochs_per_recording > 0.
  void validate() const;
  // Power iteration from the uniform vector.
  StageVector stationary(std::size_t max_iter = 100000, double tol = 1e-14) const;
  std::vector<std::uint8_t> sample(std::size_t n, std::mt19937_64& rng) const;

  // Sticky chain with a mildly non-uniform stationary distribution.
  static StageMarkov default_chain(std::size_t epochs_per_recording = 40);
};

// One oscillatory component of a stage profile.
struct Band {
  double centre_hz = 10.0;
  double amplitude = 1.0;
};

// Turns a stage sequence into one channel. Per-epoch randomness comes from
// two streams: latents shared by every emitter of the same recording (phase,
// frequency jitter, amplitude modulation, background), and private noise
// seeded by (dataset seed, recording, epoch, emitter seed). Two emitters with
// equal fields therefore produce identical signals.
struct ModalityEmitter {
  std::array<std::vector<Band>, kNumStages> profile;
  double gain = 1.0;
  double tilt_corner_hz = 0.0;  // 6 dB/octave boost above this corner; 0 = off
  double band_noise = 0.0;      // private noise around band_noise_hz
  double band_noise_hz = 25.0;
  double background = 0.3;      // shared pink background level
  double sigma = 0.3;           // private white noise standard deviation
  std::uint64_t seed = 0;

  // Throws ContractError on negative levels or non-finite values.
  void validate() const;

  static ModalityEmitter default_source();
  // Different stage signatures plus gain, tilt and private noise; gain and
  // tilt alone vanish under per-bin normalisation, so the stage-to-band map
  // differs as well.
  static ModalityEmitter default_target();
};

struct PairedRecording {
  std::size_t id = 0;
  RawChannel source;
  RawChannel target;
  std::vector<std::uint8_t> labels;
  std::uint64_t generator_seed = 0;
};

struct PairedDataset {
  std::vector<PairedRecording> recordings;
  std::size_t total_epochs() const;
};

struct GeneratorSpec {
  StageMarkov markov = StageMarkov::default_chain();
  ModalityEmitter source = ModalityEmitter::default_source();
  ModalityEmitter target = ModalityEmitter::default_target();
  std::size_t n_recordings = 14;
  std::uint64_t seed = 1;
  double fs = preproc::kTargetRate;
  // Spread of per-recording (subject) variation in band frequency and level.
  double subject_variability = 0.15;
};

// Throws ContractError on an invalid chain or emitter, before generating.
PairedDataset generate_dataset(const GeneratorSpec& spec);

// Emits one channel for a stage sequence; exposed for tests.
RawChannel emit_channel(const ModalityEmitter& emitter, std::span<const std::uint8_t> stages,
                        std::uint64_t dataset_seed, std::size_t recording, double fs,
                        double subject_variability, Modality modality);

// <root>/rec_<k>/{meta.json, source.f32, target.f32, labels.u8}
void save_dataset(const PairedDataset& ds, const std::filesystem::path& root);
// Throws FormatError naming the file and byte offset on malformed content.
PairedDataset load_dataset(const std::filesystem::path& root);

// Start indices of the M-epoch windows with the given shift.
std::vector<std::size_t> sample_sequences(std::size_t n_epochs, std::size_t m,
                                          std::size_t shift = 1);

// One training or evaluation sample: M consecutive epochs of a recording.
struct WindowRef {
  std::size_t recording = 0;
  std::size_t start = 0;
  friend bool operator==(const WindowRef&, const WindowRef&) = default;
  friend auto operator<=>(const WindowRef&, const WindowRef&) = default;
};

struct EnsembleResult {
  std::vector<std::uint8_t> labels;
  std::vector<StageVector> log_posterior;  // summed log posteriors per epoch
};

// window_posteriors[w][k] is the posterior of epoch starts[w] + k. Logs are
// floored at 1e-12. Ties go to the lowest stage index.
EnsembleResult aggregate_ensemble(std::size_t n_epochs, std::span<const std::size_t> starts,
                                  std::span<const std::vector<StageVector>> window_posteriors);

struct Subset {
  std::size_t size = 0;
  std::size_t index = 0;
  std::vector<std::size_t> ids;
};

// 1 x 10, 2 x 5, 5 x 2 from exactly ten training recordings; seeded.
std::vector<Subset> split_subsets(std::span<const std::size_t> train_ids, std::uint64_t seed);

struct Fold {
  std::size_t index = 0;
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

// Fold f takes test = ids[2f, 2f+n_test), val = the next n_val (cyclically),
// train = the rest. Test sets of different folds are disjoint.
std::vector<Fold> make_folds(std::span<const std::size_t> ids, std::size_t n_folds,
                             std::size_t n_val = 2, std::size_t n_test = 2);

// Records which (dataset, recording, modality) triples were read.
class AccessAudit {
 public:
  using Entry = std::tuple<std::string, std::size_t, Modality>;
  void record(const std::string& dataset, std::size_t recording, Modality m);
  std::set<Entry> entries() const;
  std::set<std::size_t> recordings(const std::string& dataset) const;
  void clear();

 private:
  mutable std::mutex mutex_;
  std::set<Entry> entries_;
};

struct PreparedRecording {
  std::size_t id = 0;
  std::vector<EpochTensor> source;
  std::vector<EpochTensor> target;
  std::vector<std::uint8_t> labels;
};

PreparedRecording prepare_recording(const PairedRecording& rec);

// Preprocessed epochs of one dataset, addressed by recording id. Reads can
// be routed through an AccessAudit.
class EpochStore {
 public:
  EpochStore(std::string name, std::vector<PreparedRecording> recordings);

  const std::string& name() const { return name_; }
  bool contains(std::size_t id) const { return index_.contains(id); }
  std::vector<std::size_t> ids() const;
  std::size_t n_epochs(std::size_t id) const;
  std::uint8_t label(std::size_t id, std::size_t epoch) const;
  const EpochTensor& epoch(std::size_t id, Modality m, std::size_t epoch) const;

  // Returns a view sharing the epochs but reporting reads to `audit`.
  EpochStore audited(AccessAudit* audit) const;

 private:
  const PreparedRecording& rec(std::size_t id) const;

  std::string name_;
  std::shared_ptr<const std::vector<PreparedRecording>> recordings_;
  std::map<std::size_t, std::size_t> index_;
  AccessAudit* audit_ = nullptr;
};

// Preprocesses every recording of `ds`.
EpochStore load_store(const std::string& name, const PairedDataset& ds);

}  // namespace xferlab::data
