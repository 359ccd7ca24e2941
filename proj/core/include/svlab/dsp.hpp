#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "svlab/waveform.hpp"

namespace svlab::dsp {

// Pooled log-mel statistics of one utterance: per-band mean followed by
// per-band standard deviation over frames (dimension 2 * n_mels).
struct FeatureVector {
  std::vector<double> values;
};

struct FeatureConfig {
  int frame = 400;
  int hop = 160;
  int nfft = 512;
  int n_mels = 40;
  double fmin = 0.0;
  double fmax = 8000.0;

  int feature_dim() const { return 2 * n_mels; }
  int bins() const { return nfft / 2 + 1; }
};

// Transmission-channel model: additive noise to a target SNR, telephony-band
// bandpass, and coarse requantization — applied in that order.
struct ChannelParams {
  double snr_db = 6.0;  // +infinity disables the noise stage
  double f_low = 300.0;
  double f_high = 3400.0;
  int bits = 6;
  std::uint64_t seed = 0;
};

struct PowerSpectrogram {
  int frames = 0;
  int bins = 0;
  std::vector<double> data;  // row-major frames x bins

  double& at(int f, int b) { return data[static_cast<std::size_t>(f) * bins + b]; }
  double at(int f, int b) const { return data[static_cast<std::size_t>(f) * bins + b]; }
};

// Hann-windowed magnitude-squared DFT, one-sided bins 0..nfft/2.
// Frames are full only; requires wave length >= cfg.frame.
PowerSpectrogram stft_power(const Waveform& wave, const FeatureConfig& cfg = {});

// Triangular mel filterbank -> log(x + 1e-6) -> per-band mean and std over
// frames. Std is the population standard deviation.
FeatureVector mel_features(const PowerSpectrogram& power, const FeatureConfig& cfg = {});

FeatureVector compute_features(const Waveform& wave, const FeatureConfig& cfg = {});

// Exact reverse-mode gradient of compute_features: given dL/dfeatures,
// returns dL/dsamples. Where a band's std is exactly zero the std path
// contributes a zero subgradient.
std::vector<double> feature_grad(const Waveform& wave, const std::vector<double>& upstream,
                                 const FeatureConfig& cfg = {});

// Adds seeded Gaussian noise scaled so the realized SNR equals snr_db
// exactly (noise power measured on the drawn realization).
Waveform add_noise_snr(const Waveform& wave, double snr_db, std::uint64_t seed);

// 4th-order Butterworth bandpass (two biquads via bilinear transform with
// prewarped edges), single causal pass; unity gain at the band center.
Waveform bandpass(const Waveform& wave, double f_low, double f_high);

// Uniform mid-rise requantization over [-1, 1]:
//   level = clamp(round((x+1)/2 * (2^bits - 1)), 0, 2^bits - 1)
//   y     = level / (2^bits - 1) * 2 - 1
Waveform quantize(const Waveform& wave, int bits);

struct ChannelStages {
  Waveform noisy;
  Waveform filtered;
  Waveform quantized;
};

// quantize(bandpass(wave + noise)); optional per-stage outputs.
Waveform channel_simulate(const Waveform& wave, const ChannelParams& params,
                          ChannelStages* stages = nullptr);

// Pure sine at freq, amplitude 0.9.
Waveform tone_trigger(double freq_hz, double duration_s);

}  // namespace svlab::dsp
