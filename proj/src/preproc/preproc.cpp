#include "xferlab/preproc/preproc.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

#include "xferlab/error.hpp"

namespace xferlab::preproc {

namespace {

constexpr double kPi = std::numbers::pi;

struct Biquad {
  double b0, b1, b2, a1, a2;
};

// RBJ sections; with Butterworth pole Qs the cascade equals the bilinear
// transform of the analog Butterworth prototype.
Biquad design_section(double f0, double fs, double q, bool highpass) {
  const double w0 = 2.0 * kPi * f0 / fs;
  const double c = std::cos(w0);
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  Biquad s{};
  if (highpass) {
    s.b0 = (1.0 + c) / 2.0;
    s.b1 = -(1.0 + c);
    s.b2 = (1.0 + c) / 2.0;
  } else {
    s.b0 = (1.0 - c) / 2.0;
    s.b1 = 1.0 - c;
    s.b2 = (1.0 - c) / 2.0;
  }
  s.b0 /= a0;
  s.b1 /= a0;
  s.b2 /= a0;
  s.a1 = -2.0 * c / a0;
  s.a2 = (1.0 - alpha) / a0;
  return s;
}

std::vector<Biquad> design_bandpass(double lo, double hi, double fs) {
  // Order-4 Butterworth pole pairs: Q = 1 / (2 sin((2k-1) pi / 8)), k = 1, 2.
  const double q1 = 1.0 / (2.0 * std::sin(kPi / 8.0));
  const double q2 = 1.0 / (2.0 * std::sin(3.0 * kPi / 8.0));
  return {design_section(lo, fs, q1, true), design_section(lo, fs, q2, true),
          design_section(hi, fs, q1, false), design_section(hi, fs, q2, false)};
}

// Direct form II transposed, started in the steady state for a constant
// input equal to the first sample.
void run_cascade(const std::vector<Biquad>& sections, std::vector<double>& x) {
  if (x.empty()) return;
  double u = x.front();
  for (const auto& s : sections) {
    const double gain = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    const double y0 = gain * u;
    double z2 = s.b2 * u - s.a2 * y0;
    double z1 = s.b1 * u - s.a1 * y0 + z2;
    for (auto& v : x) {
      const double in = v;
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
    u = y0;
  }
}

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  return std::sin(kPi * x) / (kPi * x);
}

struct FftPlan {
  fftw_plan plan = nullptr;
  FftPlan() {
    auto* in = static_cast<double*>(fftw_malloc(sizeof(double) * kFft));
    auto* out = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * kBins));
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(kFft), in, out, FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(in);
    fftw_free(out);
  }
  ~FftPlan() { fftw_destroy_plan(plan); }
};

const FftPlan& fft_plan() {
  // Planning is not thread-safe in FFTW; executing a finished plan is.
  static std::mutex mutex;
  std::lock_guard lock(mutex);
  static const FftPlan plan;
  return plan;
}

const std::vector<double>& hamming_window() {
  static const std::vector<double> w = [] {
    std::vector<double> v(kWindow);
    for (std::size_t n = 0; n < kWindow; ++n) {
      v[n] = 0.54 - 0.46 * std::cos(2.0 * kPi * static_cast<double>(n) /
                                    static_cast<double>(kWindow - 1));
    }
    return v;
  }();
  return w;
}

}  // namespace

RawChannel bandpass(const RawChannel& x, double lo, double hi) {
  if (!(x.fs > 0.0)) throw ParameterError("bandpass: sampling rate must be positive");
  if (!(lo > 0.0 && lo < hi)) {
    throw ParameterError("bandpass: need 0 < lo < hi, got lo=" + std::to_string(lo) +
                         " hi=" + std::to_string(hi));
  }
  if (hi >= x.fs / 2.0) {
    throw ParameterError("bandpass: hi=" + std::to_string(hi) + " Hz is not below Nyquist " +
                         std::to_string(x.fs / 2.0) + " Hz");
  }
  RawChannel out{.samples = {}, .fs = x.fs, .modality = x.modality};
  const std::size_t n = x.samples.size();
  if (n < 2) {
    out.samples = x.samples;
    return out;
  }
  const auto sections = design_bandpass(lo, hi, x.fs);
  const std::size_t pad = std::min<std::size_t>(n - 1, static_cast<std::size_t>(2.0 * x.fs));

  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  const double first = x.samples.front();
  const double last = x.samples.back();
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * first - x.samples[i]);
  ext.insert(ext.end(), x.samples.begin(), x.samples.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * last - x.samples[n - 1 - i]);

  run_cascade(sections, ext);
  std::reverse(ext.begin(), ext.end());
  run_cascade(sections, ext);
  std::reverse(ext.begin(), ext.end());

  out.samples.assign(ext.begin() + static_cast<std::ptrdiff_t>(pad),
                     ext.begin() + static_cast<std::ptrdiff_t>(pad + n));
  return out;
}

RawChannel resample(const RawChannel& x, double fs_out) {
  if (!(x.fs > 0.0) || !(fs_out > 0.0)) throw ParameterError("resample: rates must be positive");
  if (fs_out > x.fs) {
    throw UnsupportedError("resample: upsampling from " + std::to_string(x.fs) + " Hz to " +
                           std::to_string(fs_out) + " Hz is not supported");
  }
  RawChannel out{.samples = {}, .fs = fs_out, .modality = x.modality};
  if (fs_out == x.fs) {
    out.samples = x.samples;
    return out;
  }
  const std::size_t n = x.samples.size();
  const double ratio = x.fs / fs_out;  // input samples per output sample
  const auto m = static_cast<std::size_t>(std::llround(static_cast<double>(n) / ratio));
  const double cutoff = 0.45 / ratio;  // cycles per input sample
  const double half_width = 10.0 * ratio;
  out.samples.resize(m);
  for (std::size_t k = 0; k < m; ++k) {
    const double center = static_cast<double>(k) * ratio;
    const auto lo = static_cast<long long>(std::ceil(center - half_width));
    const auto hi = static_cast<long long>(std::floor(center + half_width));
    double acc = 0.0, weight = 0.0;
    for (long long i = std::max(0LL, lo); i <= std::min<long long>(hi, static_cast<long long>(n) - 1);
         ++i) {
      const double d = static_cast<double>(i) - center;
      const double win = 0.42 + 0.5 * std::cos(kPi * d / half_width) +
                         0.08 * std::cos(2.0 * kPi * d / half_width);
      const double h = 2.0 * cutoff * sinc(2.0 * cutoff * d) * win;
      acc += h * x.samples[static_cast<std::size_t>(i)];
      weight += h;
    }
    out.samples[k] = weight != 0.0 ? acc / weight : 0.0;
  }
  return out;
}

std::vector<double> amplitude_spectrogram(std::span<const double> epoch) {
  if (epoch.size() != kEpochSamples) {
    throw DimensionError("log_spectrogram: expected " + std::to_string(kEpochSamples) +
                         " samples (30 s at 100 Hz), got " + std::to_string(epoch.size()));
  }
  const auto& plan = fft_plan();
  const auto& window = hamming_window();
  std::vector<double> frame(kFft);
  std::vector<fftw_complex> spectrum(kBins);
  std::vector<double> out(kFrames * kBins);
  for (std::size_t f = 0; f < kFrames; ++f) {
    std::fill(frame.begin(), frame.end(), 0.0);
    for (std::size_t n = 0; n < kWindow; ++n) frame[n] = epoch[f * kHop + n] * window[n];
    fftw_execute_dft_r2c(plan.plan, frame.data(), spectrum.data());
    for (std::size_t k = 0; k < kBins; ++k) {
      out[f * kBins + k] = std::hypot(spectrum[k][0], spectrum[k][1]);
    }
  }
  return out;
}

std::vector<double> log_spectrogram(std::span<const double> epoch) {
  auto out = amplitude_spectrogram(epoch);
  for (auto& v : out) v = std::log(v + kLogFloor);
  return out;
}

std::vector<EpochTensor> normalize_recording(std::vector<EpochTensor> epochs) {
  if (epochs.empty()) throw ContractError("normalize_recording: recording has no epochs");
  const std::size_t bins = epochs.front().bins;
  std::vector<double> mean(bins, 0.0), var(bins, 0.0);
  std::size_t count = 0;
  for (const auto& e : epochs) {
    if (e.bins != bins || e.values.size() != e.frames * e.bins) {
      throw DimensionError("normalize_recording: inconsistent epoch shapes");
    }
    for (std::size_t t = 0; t < e.frames; ++t) {
      for (std::size_t b = 0; b < bins; ++b) mean[b] += e.values[t * bins + b];
    }
    count += e.frames;
  }
  for (auto& m : mean) m /= static_cast<double>(count);
  for (const auto& e : epochs) {
    for (std::size_t t = 0; t < e.frames; ++t) {
      for (std::size_t b = 0; b < bins; ++b) {
        const double d = e.values[t * bins + b] - mean[b];
        var[b] += d * d;
      }
    }
  }
  std::vector<double> inv_std(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    const double sd = std::sqrt(var[b] / static_cast<double>(count));
    inv_std[b] = sd < 1e-8 ? 0.0 : 1.0 / sd;
  }
  for (auto& e : epochs) {
    for (std::size_t t = 0; t < e.frames; ++t) {
      for (std::size_t b = 0; b < bins; ++b) {
        auto& v = e.values[t * bins + b];
        v = (v - mean[b]) * inv_std[b];
      }
    }
  }
  return epochs;
}

std::vector<EpochTensor> preprocess_channel(const RawChannel& x,
                                            std::span<const std::uint8_t> labels) {
  const auto filtered = bandpass(x);
  const auto at100 = resample(filtered, kTargetRate);
  const std::size_t n_epochs = at100.samples.size() / kEpochSamples;
  if (n_epochs != labels.size()) {
    throw ContractError("preprocess_channel: " + std::to_string(n_epochs) + " epochs but " +
                        std::to_string(labels.size()) + " labels");
  }
  std::vector<EpochTensor> epochs(n_epochs);
  for (std::size_t i = 0; i < n_epochs; ++i) {
    std::span<const double> slice(at100.samples.data() + i * kEpochSamples, kEpochSamples);
    epochs[i].values = log_spectrogram(slice);
    epochs[i].epoch_index = i;
    epochs[i].label = labels[i];
  }
  return normalize_recording(std::move(epochs));
}

}  // namespace xferlab::preproc
