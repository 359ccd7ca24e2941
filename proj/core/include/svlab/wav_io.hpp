#pragma once

#include <filesystem>

#include "svlab/waveform.hpp"

namespace svlab {

// RIFF/WAVE, mono, 16-bit signed PCM little-endian, 16 kHz.
// write_wav requires samples in [-1, 1]; round-trip error is bounded by the
// 16-bit quantization step (<= 1/32768 per sample).
void write_wav(const Waveform& wave, const std::filesystem::path& path);

// Throws FormatError on malformed/truncated files and UnsupportedFormatError
// on anything that is not mono 16-bit PCM at 16 kHz.
Waveform read_wav(const std::filesystem::path& path);

}  // namespace svlab
