#pragma once

#include <cstddef>
#include <vector>

namespace svlab {

inline constexpr int kSampleRate = 16000;

// Mono audio buffer. Generated audio keeps samples inside [-1, 1]; DSP stages
// may transiently exceed that range (noise addition, filter ringing) until the
// quantizer or the WAV writer re-imposes it.
struct Waveform {
  std::vector<double> samples;
  int sample_rate = kSampleRate;

  std::size_t size() const { return samples.size(); }
  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

}  // namespace svlab
