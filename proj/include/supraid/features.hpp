#pragma once

// DSP front end: pre-emphasis, 30 ms / 5 ms Hamming framing at 16 kHz,
// 16 static + 16 delta MFCCs, and frame-level pitch/energy tracks.
//
// Unstated knobs are fixed here for reproducibility: 26 mel filters over
// 0-8000 Hz on a 512-point transform, c0 excluded, delta window +-2,
// per-utterance z-scoring, autocorrelation pitch in 50-500 Hz with a 0.3
// voicing threshold. Extraction metadata records them all.

#include <array>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "supraid/common.hpp"

namespace supraid {

constexpr int kSampleRateHz = 16000;
constexpr int kFrameLen = 480;  // 30 ms
constexpr int kFrameHop = 80;   // 5 ms
constexpr int kFftSize = 512;
constexpr int kNumMels = 26;
constexpr int kNumCeps = 16;
constexpr int kFeatureDim = 2 * kNumCeps;
constexpr double kPreEmphasis = 0.95;
constexpr double kEnergyFloor = 1e-10;
constexpr double kPitchMinHz = 50.0;
constexpr double kPitchMaxHz = 500.0;
constexpr double kVoicingThreshold = 0.3;

struct AudioClip {
  std::vector<double> samples;  // in [-1, 1]
  int sample_rate_hz = kSampleRateHz;
};

struct ProsodicTrack {
  std::vector<double> f0_hz;       // 0 = unvoiced
  std::vector<double> log_energy;  // ln(sum of squares + floor)
};

// Acoustic frames plus the aligned prosodic track; the unit every
// downstream stage consumes, whether it came from audio or a synthesizer.
struct Utterance {
  Matrix frames;  // T x 32
  ProsodicTrack prosody;
};

inline void check_clip(const AudioClip& clip) {
  if (clip.samples.empty()) throw data_error("empty audio clip");
  if (clip.sample_rate_hz != kSampleRateHz)
    throw data_error("sample rate must be 16000 Hz, got " +
                     std::to_string(clip.sample_rate_hz));
}

inline std::size_t frame_count(std::size_t n_samples) {
  if (n_samples < kFrameLen) return 0;
  return 1 + (n_samples - kFrameLen) / kFrameHop;
}

// H(z) = 1 - 0.95 z^-1 with y[0] = x[0].
inline AudioClip preemphasize(const AudioClip& clip) {
  check_clip(clip);
  AudioClip out = clip;
  for (std::size_t n = out.samples.size(); n-- > 1;)
    out.samples[n] -= kPreEmphasis * out.samples[n - 1];
  return out;
}

inline const std::array<double, kFrameLen>& hamming_window() {
  static const std::array<double, kFrameLen> win = [] {
    std::array<double, kFrameLen> w{};
    for (int n = 0; n < kFrameLen; ++n)
      w[n] = 0.54 - 0.46 * std::cos(2.0 * M_PI * n / (kFrameLen - 1));
    return w;
  }();
  return win;
}

// 480-sample frames every 80 samples, Hamming windowed.
inline Matrix frame_and_window(const AudioClip& clip) {
  check_clip(clip);
  std::size_t T = frame_count(clip.samples.size());
  if (T == 0)
    throw sequence_too_short("clip shorter than one 30 ms window");
  const auto& win = hamming_window();
  Matrix frames(T, kFrameLen);
  for (std::size_t t = 0; t < T; ++t) {
    const double* src = clip.samples.data() + t * kFrameHop;
    double* dst = frames.row(t);
    for (int n = 0; n < kFrameLen; ++n) dst[n] = src[n] * win[n];
  }
  return frames;
}

namespace detail {

// Iterative radix-2 FFT, fixed 512-point, real input zero-padded.
inline void fft512(std::vector<std::complex<double>>& a) {
  const int n = kFftSize;
  for (int i = 1, j = 0; i < n; ++i) {
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (int len = 2; len <= n; len <<= 1) {
    double ang = -2.0 * M_PI / len;
    std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (int i = 0; i < n; i += len) {
      std::complex<double> w(1.0);
      for (int k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

struct MelFilterbank {
  // Triangular weights per filter over FFT bins 0..256, plus the Hz span
  // of each filter for diagnostics.
  std::vector<std::vector<double>> weights;
  std::vector<std::pair<double, double>> span_hz;

  MelFilterbank() {
    auto to_mel = [](double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); };
    auto to_hz = [](double mel) {
      return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
    };
    const double mel_lo = to_mel(0.0);
    const double mel_hi = to_mel(kSampleRateHz / 2.0);
    std::vector<double> edges(kNumMels + 2);
    for (int i = 0; i < kNumMels + 2; ++i)
      edges[i] = to_hz(mel_lo + (mel_hi - mel_lo) * i / (kNumMels + 1));

    const int n_bins = kFftSize / 2 + 1;
    const double hz_per_bin = static_cast<double>(kSampleRateHz) / kFftSize;
    weights.assign(kNumMels, std::vector<double>(n_bins, 0.0));
    span_hz.resize(kNumMels);
    for (int m = 0; m < kNumMels; ++m) {
      double left = edges[m], center = edges[m + 1], right = edges[m + 2];
      span_hz[m] = {left, right};
      for (int b = 0; b < n_bins; ++b) {
        double f = b * hz_per_bin;
        if (f <= left || f >= right) continue;
        weights[m][b] = f <= center ? (f - left) / (center - left)
                                    : (right - f) / (right - center);
      }
    }
  }
};

inline const MelFilterbank& mel_filterbank() {
  static const MelFilterbank fb;
  return fb;
}

}  // namespace detail

// Log mel filterbank energies of one windowed frame.
inline std::array<double, kNumMels> log_mel_energies(const double* frame) {
  std::vector<std::complex<double>> buf(kFftSize, 0.0);
  for (int n = 0; n < kFrameLen; ++n) buf[n] = frame[n];
  detail::fft512(buf);
  const int n_bins = kFftSize / 2 + 1;
  std::vector<double> power(n_bins);
  for (int b = 0; b < n_bins; ++b) power[b] = std::norm(buf[b]);

  const auto& fb = detail::mel_filterbank();
  std::array<double, kNumMels> out{};
  for (int m = 0; m < kNumMels; ++m) {
    double e = 0.0;
    for (int b = 0; b < n_bins; ++b) e += fb.weights[m][b] * power[b];
    out[m] = std::log(std::max(e, kEnergyFloor));
  }
  return out;
}

// 16 static cepstra: DCT-II of the log mel energies, c0 excluded.
inline std::array<double, kNumCeps> mfcc(const double* windowed_frame) {
  auto loge = log_mel_energies(windowed_frame);
  std::array<double, kNumCeps> ceps{};
  const double scale = std::sqrt(2.0 / kNumMels);
  for (int n = 1; n <= kNumCeps; ++n) {
    double acc = 0.0;
    for (int m = 0; m < kNumMels; ++m)
      acc += loge[m] * std::cos(n * (m + 0.5) * M_PI / kNumMels);
    ceps[n - 1] = scale * acc;
  }
  return ceps;
}

// Two-frame regression deltas with clamped edges; exact for linear ramps.
inline Matrix delta(const Matrix& statics) {
  const int T = static_cast<int>(statics.rows);
  const int K = static_cast<int>(statics.cols);
  Matrix d(T, K);
  auto clamp = [T](int t) { return std::min(std::max(t, 0), T - 1); };
  for (int t = 0; t < T; ++t)
    for (int k = 0; k < K; ++k) {
      double acc = 0.0;
      for (int w = 1; w <= 2; ++w)
        acc += w * (statics.at(clamp(t + w), k) - statics.at(clamp(t - w), k));
      d.at(t, k) = acc / 10.0;
    }
  return d;
}

// Full acoustic pipeline: pre-emphasis, framing, static + delta cepstra,
// per-utterance z-scoring of all 32 dimensions.
inline Matrix acoustic_features(const AudioClip& clip) {
  Matrix frames = frame_and_window(preemphasize(clip));
  const std::size_t T = frames.rows;
  Matrix statics(T, kNumCeps);
  for (std::size_t t = 0; t < T; ++t) {
    auto c = mfcc(frames.row(t));
    std::copy(c.begin(), c.end(), statics.row(t));
  }
  Matrix deltas = delta(statics);

  Matrix out(T, kFeatureDim);
  for (std::size_t t = 0; t < T; ++t) {
    std::copy(statics.row(t), statics.row(t) + kNumCeps, out.row(t));
    std::copy(deltas.row(t), deltas.row(t) + kNumCeps, out.row(t) + kNumCeps);
  }
  for (int k = 0; k < kFeatureDim; ++k) {
    double mean = 0.0;
    for (std::size_t t = 0; t < T; ++t) mean += out.at(t, k);
    mean /= static_cast<double>(T);
    double var = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      out.at(t, k) -= mean;
      var += out.at(t, k) * out.at(t, k);
    }
    var /= static_cast<double>(T);
    if (var > 0.0) {
      double inv = 1.0 / std::sqrt(var);
      for (std::size_t t = 0; t < T; ++t) out.at(t, k) *= inv;
    }
  }
  return out;
}

// Per-frame log energy and autocorrelation pitch on the same frame grid as
// the acoustic features. Works on the raw (un-emphasized) signal.
inline ProsodicTrack prosodic_track(const AudioClip& clip) {
  check_clip(clip);
  std::size_t T = frame_count(clip.samples.size());
  if (T == 0)
    throw sequence_too_short("clip shorter than one 30 ms window");

  const int lag_min = static_cast<int>(kSampleRateHz / kPitchMaxHz);  // 32
  const int lag_max = static_cast<int>(kSampleRateHz / kPitchMinHz);  // 320

  ProsodicTrack track;
  track.f0_hz.resize(T);
  track.log_energy.resize(T);
  std::vector<double> nac(lag_max + 1, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    const double* x = clip.samples.data() + t * kFrameHop;
    double energy = 0.0;
    for (int n = 0; n < kFrameLen; ++n) energy += x[n] * x[n];
    track.log_energy[t] = std::log(energy + kEnergyFloor);

    double best = 0.0;
    for (int lag = lag_min; lag <= lag_max; ++lag) {
      double num = 0.0, e0 = 0.0, e1 = 0.0;
      const int L = kFrameLen - lag;
      for (int n = 0; n < L; ++n) {
        num += x[n] * x[n + lag];
        e0 += x[n] * x[n];
        e1 += x[n + lag] * x[n + lag];
      }
      double den = std::sqrt(e0 * e1);
      nac[lag] = den > 0.0 ? num / den : 0.0;
      best = std::max(best, nac[lag]);
    }
    double f0 = 0.0;
    if (best >= kVoicingThreshold) {
      // Earliest local maximum near the global peak; taking the first such
      // lag sidesteps octave-down picks at multiples of the period.
      for (int lag = lag_min; lag <= lag_max; ++lag) {
        if (nac[lag] < 0.97 * best) continue;
        bool left_ok = lag == lag_min || nac[lag] >= nac[lag - 1];
        bool right_ok = lag == lag_max || nac[lag] >= nac[lag + 1];
        if (left_ok && right_ok) {
          f0 = static_cast<double>(kSampleRateHz) / lag;
          break;
        }
      }
      if (f0 == 0.0) {
        for (int lag = lag_min; lag <= lag_max; ++lag)
          if (nac[lag] == best) {
            f0 = static_cast<double>(kSampleRateHz) / lag;
            break;
          }
      }
    }
    track.f0_hz[t] = f0;
  }
  return track;
}

inline Utterance utterance_from_clip(const AudioClip& clip) {
  Utterance u;
  u.frames = acoustic_features(clip);
  u.prosody = prosodic_track(clip);
  return u;
}

}  // namespace supraid
