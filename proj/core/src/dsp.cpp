#include "svlab/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <tuple>

#include "svlab/errors.hpp"
#include "svlab/rng.hpp"

namespace svlab::dsp {

namespace {

constexpr double kLogFloor = 1e-6;

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// Precomputed trig tables for the windowed DFT and the mel filterbank of one
// feature geometry. Built once per config and shared.
struct Plan {
  FeatureConfig cfg;
  std::vector<double> window;    // periodic Hann, length frame
  std::vector<double> cos_t;     // bins x frame
  std::vector<double> sin_t;     // bins x frame
  std::vector<double> mel_w;     // n_mels x bins

  explicit Plan(const FeatureConfig& c) : cfg(c) {
    const int L = c.frame;
    const int bins = c.bins();
    window.resize(L);
    for (int n = 0; n < L; ++n) {
      window[n] = 0.5 * (1.0 - std::cos(2.0 * M_PI * n / L));
    }
    cos_t.resize(static_cast<std::size_t>(bins) * L);
    sin_t.resize(static_cast<std::size_t>(bins) * L);
    for (int k = 0; k < bins; ++k) {
      for (int n = 0; n < L; ++n) {
        const double th = 2.0 * M_PI * k * n / c.nfft;
        cos_t[static_cast<std::size_t>(k) * L + n] = std::cos(th);
        sin_t[static_cast<std::size_t>(k) * L + n] = std::sin(th);
      }
    }

    // HTK-style triangular filters on mel-spaced edges, peak 1.
    mel_w.assign(static_cast<std::size_t>(c.n_mels) * bins, 0.0);
    const double mel_lo = hz_to_mel(c.fmin);
    const double mel_hi = hz_to_mel(c.fmax);
    std::vector<double> edges(c.n_mels + 2);
    for (int m = 0; m < c.n_mels + 2; ++m) {
      edges[m] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * m / (c.n_mels + 1));
    }
    for (int m = 0; m < c.n_mels; ++m) {
      const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
      for (int k = 0; k < bins; ++k) {
        const double f = static_cast<double>(k) * kSampleRate / c.nfft;
        double w = 0.0;
        if (f > lo && f < mid) {
          w = (f - lo) / (mid - lo);
        } else if (f >= mid && f < hi) {
          w = (hi - f) / (hi - mid);
        }
        mel_w[static_cast<std::size_t>(m) * bins + k] = w;
      }
    }
  }
};

const Plan& plan_for(const FeatureConfig& cfg) {
  using Key = std::tuple<int, int, int, int, double, double>;
  static std::mutex mu;
  static std::map<Key, std::unique_ptr<Plan>> cache;
  const Key key{cfg.frame, cfg.hop, cfg.nfft, cfg.n_mels, cfg.fmin, cfg.fmax};
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(key);
  if (it == cache.end()) {
    it = cache.emplace(key, std::make_unique<Plan>(cfg)).first;
  }
  return *it->second;
}

int frame_count(std::size_t n, const FeatureConfig& cfg) {
  if (n < static_cast<std::size_t>(cfg.frame)) return 0;
  return 1 + static_cast<int>((n - cfg.frame) / cfg.hop);
}

// Log-mel matrix (frames x n_mels) plus per-band mean/std; shared by the
// forward and backward feature paths.
struct LogMel {
  int frames = 0;
  std::vector<double> values;  // frames x n_mels
  std::vector<double> mean;    // n_mels
  std::vector<double> stdev;   // n_mels
};

LogMel log_mel(const PowerSpectrogram& power, const Plan& plan) {
  const int n_mels = plan.cfg.n_mels;
  const int bins = plan.cfg.bins();
  LogMel lm;
  lm.frames = power.frames;
  lm.values.resize(static_cast<std::size_t>(power.frames) * n_mels);
  for (int f = 0; f < power.frames; ++f) {
    const double* p = &power.data[static_cast<std::size_t>(f) * bins];
    for (int m = 0; m < n_mels; ++m) {
      const double* w = &plan.mel_w[static_cast<std::size_t>(m) * bins];
      double e = 0.0;
      for (int k = 0; k < bins; ++k) e += w[k] * p[k];
      lm.values[static_cast<std::size_t>(f) * n_mels + m] = std::log(e + kLogFloor);
    }
  }
  lm.mean.assign(n_mels, 0.0);
  lm.stdev.assign(n_mels, 0.0);
  for (int f = 0; f < power.frames; ++f) {
    for (int m = 0; m < n_mels; ++m) {
      lm.mean[m] += lm.values[static_cast<std::size_t>(f) * n_mels + m];
    }
  }
  for (int m = 0; m < n_mels; ++m) lm.mean[m] /= power.frames;
  for (int f = 0; f < power.frames; ++f) {
    for (int m = 0; m < n_mels; ++m) {
      const double d = lm.values[static_cast<std::size_t>(f) * n_mels + m] - lm.mean[m];
      lm.stdev[m] += d * d;
    }
  }
  for (int m = 0; m < n_mels; ++m) lm.stdev[m] = std::sqrt(lm.stdev[m] / power.frames);
  return lm;
}

}  // namespace

PowerSpectrogram stft_power(const Waveform& wave, const FeatureConfig& cfg) {
  const int frames = frame_count(wave.size(), cfg);
  if (frames == 0) {
    throw std::invalid_argument("stft_power: wave shorter than one frame");
  }
  const Plan& plan = plan_for(cfg);
  const int bins = cfg.bins();
  const int L = cfg.frame;

  PowerSpectrogram out;
  out.frames = frames;
  out.bins = bins;
  out.data.resize(static_cast<std::size_t>(frames) * bins);

  std::vector<double> xw(L);
  for (int f = 0; f < frames; ++f) {
    const double* x = wave.samples.data() + static_cast<std::size_t>(f) * cfg.hop;
    for (int n = 0; n < L; ++n) xw[n] = plan.window[n] * x[n];
    for (int k = 0; k < bins; ++k) {
      const double* ct = &plan.cos_t[static_cast<std::size_t>(k) * L];
      const double* st = &plan.sin_t[static_cast<std::size_t>(k) * L];
      double re = 0.0, im = 0.0;
      for (int n = 0; n < L; ++n) {
        re += xw[n] * ct[n];
        im -= xw[n] * st[n];
      }
      out.at(f, k) = re * re + im * im;
    }
  }
  return out;
}

FeatureVector mel_features(const PowerSpectrogram& power, const FeatureConfig& cfg) {
  if (power.bins != cfg.bins()) {
    throw std::invalid_argument("mel_features: spectrogram bins do not match config");
  }
  const Plan& plan = plan_for(cfg);
  const LogMel lm = log_mel(power, plan);
  FeatureVector out;
  out.values.reserve(cfg.feature_dim());
  out.values.insert(out.values.end(), lm.mean.begin(), lm.mean.end());
  out.values.insert(out.values.end(), lm.stdev.begin(), lm.stdev.end());
  return out;
}

FeatureVector compute_features(const Waveform& wave, const FeatureConfig& cfg) {
  return mel_features(stft_power(wave, cfg), cfg);
}

std::vector<double> feature_grad(const Waveform& wave, const std::vector<double>& upstream,
                                 const FeatureConfig& cfg) {
  if (static_cast<int>(upstream.size()) != cfg.feature_dim()) {
    throw std::invalid_argument("feature_grad: upstream dimension mismatch");
  }
  const int frames = frame_count(wave.size(), cfg);
  if (frames == 0) {
    throw std::invalid_argument("feature_grad: wave shorter than one frame");
  }
  const Plan& plan = plan_for(cfg);
  const int bins = cfg.bins();
  const int L = cfg.frame;
  const int n_mels = cfg.n_mels;

  const PowerSpectrogram power = stft_power(wave, cfg);
  const LogMel lm = log_mel(power, plan);

  // dL/d(log-mel value) from the mean and std pooling.
  std::vector<double> d_logmel(static_cast<std::size_t>(frames) * n_mels);
  for (int f = 0; f < frames; ++f) {
    for (int m = 0; m < n_mels; ++m) {
      double g = upstream[m] / frames;
      if (lm.stdev[m] > 1e-12) {
        const double centered = lm.values[static_cast<std::size_t>(f) * n_mels + m] - lm.mean[m];
        g += upstream[n_mels + m] * centered / (frames * lm.stdev[m]);
      }
      d_logmel[static_cast<std::size_t>(f) * n_mels + m] = g;
    }
  }

  std::vector<double> grad(wave.size(), 0.0);
  std::vector<double> d_power(bins);
  std::vector<double> xw(L), dxw(L);
  for (int f = 0; f < frames; ++f) {
    // Through log and the mel matrix.
    for (int k = 0; k < bins; ++k) d_power[k] = 0.0;
    for (int m = 0; m < n_mels; ++m) {
      const double* w = &plan.mel_w[static_cast<std::size_t>(m) * bins];
      const double* p = &power.data[static_cast<std::size_t>(f) * bins];
      double e = 0.0;
      for (int k = 0; k < bins; ++k) e += w[k] * p[k];
      const double de = d_logmel[static_cast<std::size_t>(f) * n_mels + m] / (e + kLogFloor);
      for (int k = 0; k < bins; ++k) d_power[k] += de * w[k];
    }
    // Through the magnitude-squared DFT: recompute Re/Im and push the adjoint
    // back onto the windowed frame.
    const double* x = wave.samples.data() + static_cast<std::size_t>(f) * cfg.hop;
    for (int n = 0; n < L; ++n) {
      xw[n] = plan.window[n] * x[n];
      dxw[n] = 0.0;
    }
    for (int k = 0; k < bins; ++k) {
      const double* ct = &plan.cos_t[static_cast<std::size_t>(k) * L];
      const double* st = &plan.sin_t[static_cast<std::size_t>(k) * L];
      double re = 0.0, im = 0.0;
      for (int n = 0; n < L; ++n) {
        re += xw[n] * ct[n];
        im -= xw[n] * st[n];
      }
      const double gre = 2.0 * d_power[k] * re;
      const double gim = 2.0 * d_power[k] * im;
      for (int n = 0; n < L; ++n) {
        dxw[n] += gre * ct[n] - gim * st[n];
      }
    }
    double* g = grad.data() + static_cast<std::size_t>(f) * cfg.hop;
    for (int n = 0; n < L; ++n) g[n] += plan.window[n] * dxw[n];
  }
  return grad;
}

Waveform add_noise_snr(const Waveform& wave, double snr_db, std::uint64_t seed) {
  if (std::isinf(snr_db) && snr_db > 0) {
    return wave;  // noise disabled
  }
  double p_sig = 0.0;
  for (double x : wave.samples) p_sig += x * x;
  p_sig /= std::max<std::size_t>(1, wave.size());
  if (p_sig <= 0.0) {
    throw std::invalid_argument("add_noise_snr: zero-power waveform");
  }

  Rng rng(mix_seed(seed, 0x17));
  std::vector<double> noise(wave.size());
  double p_noise_raw = 0.0;
  for (auto& v : noise) {
    v = rng.gaussian();
    p_noise_raw += v * v;
  }
  p_noise_raw /= wave.size();
  const double target = p_sig / std::pow(10.0, snr_db / 10.0);
  const double scale = std::sqrt(target / p_noise_raw);

  Waveform out = wave;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.samples[i] += scale * noise[i];
  }
  return out;
}

namespace {

struct Biquad {
  double b0, b1, b2, a1, a2;

  void apply(std::vector<double>& x) const {
    double z1 = 0.0, z2 = 0.0;  // transposed direct form II
    for (auto& v : x) {
      const double y = b0 * v + z1;
      z1 = b1 * v - a1 * y + z2;
      z2 = b2 * v - a2 * y;
      v = y;
    }
  }

  std::complex<double> response(double omega) const {
    const std::complex<double> z1 = std::polar(1.0, -omega);
    const std::complex<double> z2 = z1 * z1;
    return (b0 + b1 * z1 + b2 * z2) / (1.0 + a1 * z1 + a2 * z2);
  }
};

// Order-2 Butterworth lowpass prototype -> bandpass transform -> bilinear.
// Yields two biquads with zeros at z = +1 and z = -1 each.
std::array<Biquad, 2> design_bandpass(double f_low, double f_high, double fs) {
  const double k = 2.0 * fs;
  const double wl = k * std::tan(M_PI * f_low / fs);   // prewarped rad/s
  const double wh = k * std::tan(M_PI * f_high / fs);
  const double bw = wh - wl;
  const double w0sq = wl * wh;

  // Upper-half-plane prototype pole; its bandpass quadratic has roots q1, q2,
  // whose conjugates come from the mirrored prototype pole.
  const std::complex<double> p(-M_SQRT1_2, M_SQRT1_2);
  const std::complex<double> pb = p * bw;
  const std::complex<double> disc = std::sqrt(pb * pb - 4.0 * w0sq);
  const std::array<std::complex<double>, 2> analog = {(pb + disc) / 2.0, (pb - disc) / 2.0};

  std::array<Biquad, 2> sections{};
  for (int i = 0; i < 2; ++i) {
    const std::complex<double> zp = (k + analog[i]) / (k - analog[i]);
    Biquad s{};
    s.b0 = 1.0;
    s.b1 = 0.0;
    s.b2 = -1.0;  // zeros at +1 and -1
    s.a1 = -2.0 * zp.real();
    s.a2 = std::norm(zp);
    sections[i] = s;
  }

  // Normalize to unity gain at the (warped) center frequency.
  const double w0_analog = std::sqrt(w0sq);
  const double f_center_digital = fs / M_PI * std::atan(w0_analog / k);
  const double omega = 2.0 * M_PI * f_center_digital / fs;
  const double mag = std::abs(sections[0].response(omega) * sections[1].response(omega));
  const double g = 1.0 / mag;
  sections[0].b0 *= g;
  sections[0].b2 *= g;
  return sections;
}

}  // namespace

Waveform bandpass(const Waveform& wave, double f_low, double f_high) {
  const double nyquist = wave.sample_rate / 2.0;
  if (!(f_low > 0.0 && f_low < f_high && f_high < nyquist)) {
    throw std::invalid_argument("bandpass: need 0 < f_low < f_high < Nyquist");
  }
  const auto sections = design_bandpass(f_low, f_high, wave.sample_rate);
  Waveform out = wave;
  sections[0].apply(out.samples);
  sections[1].apply(out.samples);
  return out;
}

Waveform quantize(const Waveform& wave, int bits) {
  if (bits < 1 || bits > 16) {
    throw std::invalid_argument("quantize: bits must be in [1, 16]");
  }
  const double levels = static_cast<double>((1 << bits) - 1);
  Waveform out = wave;
  for (auto& x : out.samples) {
    const double clamped = std::clamp(x, -1.0, 1.0);
    double level = std::round((clamped + 1.0) / 2.0 * levels);
    level = std::clamp(level, 0.0, levels);
    x = level / levels * 2.0 - 1.0;
  }
  return out;
}

Waveform channel_simulate(const Waveform& wave, const ChannelParams& params,
                          ChannelStages* stages) {
  Waveform noisy = add_noise_snr(wave, params.snr_db, params.seed);
  Waveform filtered = bandpass(noisy, params.f_low, params.f_high);
  Waveform out = quantize(filtered, params.bits);
  if (stages != nullptr) {
    stages->noisy = std::move(noisy);
    stages->filtered = std::move(filtered);
    stages->quantized = out;
  }
  return out;
}

Waveform tone_trigger(double freq_hz, double duration_s) {
  if (!(freq_hz > 0.0 && freq_hz < kSampleRate / 2.0)) {
    throw std::invalid_argument("tone_trigger: frequency out of range");
  }
  const int n = static_cast<int>(std::lround(duration_s * kSampleRate));
  Waveform out;
  out.samples.resize(n);
  for (int i = 0; i < n; ++i) {
    out.samples[i] = 0.9 * std::sin(2.0 * M_PI * freq_hz * i / kSampleRate);
  }
  return out;
}

}  // namespace svlab::dsp
