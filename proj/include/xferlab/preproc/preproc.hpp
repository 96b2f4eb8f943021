#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "xferlab/stages.hpp"

namespace xferlab::preproc {

struct RawChannel {
  std::vector<double> samples;
  double fs = 100.0;
  Modality modality = Modality::source;
};

inline constexpr double kTargetRate = 100.0;
inline constexpr double kEpochSeconds = 30.0;
inline constexpr std::size_t kEpochSamples = 3000;
inline constexpr std::size_t kWindow = 200;  // 2 s Hamming
inline constexpr std::size_t kHop = 100;     // 50% overlap
inline constexpr std::size_t kFft = 256;
inline constexpr std::size_t kFrames = 29;
inline constexpr std::size_t kBins = kFft / 2 + 1;  // 129
inline constexpr double kLogFloor = 1e-12;

// Normalized log-spectrogram of one 30 s epoch, frames x bins row-major.
struct EpochTensor {
  std::size_t frames = kFrames;
  std::size_t bins = kBins;
  std::vector<double> values;
  std::size_t epoch_index = 0;
  std::uint8_t label = 0;

  double at(std::size_t frame, std::size_t bin) const { return values[frame * bins + bin]; }
};

// Zero-phase band-pass: order-4 Butterworth high-pass at lo cascaded with an
// order-4 Butterworth low-pass at hi, each as second-order sections, applied
// forward and backward with odd-extension padding and steady-state initial
// conditions. Requires 0 < lo < hi < fs/2.
RawChannel bandpass(const RawChannel& x, double lo = 0.3, double hi = 40.0);

// Blackman-windowed sinc resampler (cutoff 0.45 fs_out, ten output periods
// half-width), weights renormalized per output sample so DC is exact.
// Output length round(n * fs_out / fs_in). Throws UnsupportedError when
// fs_out > fs_in.
RawChannel resample(const RawChannel& x, double fs_out = kTargetRate);

// |STFT| of one epoch: 29 frames x 129 bins, Hamming window of 200 samples,
// hop 100, 256-point FFT. Input must hold exactly 3000 samples.
std::vector<double> amplitude_spectrogram(std::span<const double> epoch);

// log(|STFT| + 1e-12), 29 x 129.
std::vector<double> log_spectrogram(std::span<const double> epoch);

// Per frequency-bin standardization over all frames of all epochs of one
// recording. Bins with std < 1e-8 become 0. Throws ContractError when empty.
std::vector<EpochTensor> normalize_recording(std::vector<EpochTensor> epochs);

// Full chain for one channel: band-pass, resample to 100 Hz, cut
// floor(duration / 30 s) epochs, log-spectrogram, normalize. The label count
// must equal the epoch count.
std::vector<EpochTensor> preprocess_channel(const RawChannel& x,
                                            std::span<const std::uint8_t> labels);

}  // namespace xferlab::preproc
