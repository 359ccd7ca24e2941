#include "svlab/wav_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "svlab/errors.hpp"

namespace svlab {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace

void write_wav(const Waveform& wave, const std::filesystem::path& path) {
  if (wave.samples.empty()) {
    throw std::invalid_argument("write_wav: empty waveform");
  }
  if (wave.sample_rate != kSampleRate) {
    throw std::invalid_argument("write_wav: sample rate must be 16000");
  }
  for (double x : wave.samples) {
    if (!(x >= -1.0 && x <= 1.0)) {
      throw std::invalid_argument("write_wav: sample outside [-1, 1]");
    }
  }

  const std::uint32_t n = static_cast<std::uint32_t>(wave.samples.size());
  const std::uint32_t data_bytes = n * 2;
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);

  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E'});
  out.insert(out.end(), {'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<std::uint32_t>(wave.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(wave.sample_rate) * 2);
  put_u16(out, 2);   // block align
  put_u16(out, 16);  // bits per sample
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, data_bytes);

  for (double x : wave.samples) {
    long v = std::lround(x * 32767.0);
    v = std::clamp(v, -32768L, 32767L);
    const auto s = static_cast<std::int16_t>(v);
    const auto u = static_cast<std::uint16_t>(s);
    out.push_back(static_cast<std::uint8_t>(u & 0xff));
    out.push_back(static_cast<std::uint8_t>(u >> 8));
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) {
    throw std::runtime_error("write_wav: cannot open " + path.string());
  }
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) {
    throw std::runtime_error("write_wav: short write to " + path.string());
  }
}

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw FormatError("read_wav: cannot open " + path.string());
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError("read_wav: not a RIFF/WAVE file: " + path.string());
  }

  // Chunk walk; we need fmt then data.
  bool have_fmt = false;
  std::uint16_t channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::size_t pos = 12;
  const std::uint8_t* data = nullptr;
  std::uint32_t data_len = 0;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* hdr = bytes.data() + pos;
    const std::uint32_t len = get_u32(hdr + 4);
    if (pos + 8 + len > bytes.size()) {
      throw FormatError("read_wav: truncated chunk in " + path.string());
    }
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (len < 16) {
        throw FormatError("read_wav: short fmt chunk in " + path.string());
      }
      const std::uint8_t* p = hdr + 8;
      const std::uint16_t format = get_u16(p);
      channels = get_u16(p + 2);
      rate = get_u32(p + 4);
      bits = get_u16(p + 14);
      if (format != 1) {
        throw UnsupportedFormatError("read_wav: non-PCM format " + std::to_string(format));
      }
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = hdr + 8;
      data_len = len;
      break;
    }
    pos += 8 + len + (len & 1);  // chunks are word-aligned
  }
  if (!have_fmt || data == nullptr) {
    throw FormatError("read_wav: missing fmt/data chunk in " + path.string());
  }
  if (channels != 1) {
    throw UnsupportedFormatError("read_wav: expected mono, got " + std::to_string(channels) +
                                 " channels");
  }
  if (bits != 16) {
    throw UnsupportedFormatError("read_wav: expected 16-bit PCM, got " + std::to_string(bits));
  }
  if (rate != static_cast<std::uint32_t>(kSampleRate)) {
    throw UnsupportedFormatError("read_wav: expected 16000 Hz, got " + std::to_string(rate));
  }
  if (data_len % 2 != 0) {
    throw FormatError("read_wav: odd data length in " + path.string());
  }

  Waveform wave;
  wave.sample_rate = kSampleRate;
  wave.samples.resize(data_len / 2);
  for (std::size_t i = 0; i < wave.samples.size(); ++i) {
    const auto u = static_cast<std::uint16_t>(data[2 * i] | (data[2 * i + 1] << 8));
    const auto s = static_cast<std::int16_t>(u);
    wave.samples[i] = std::clamp(static_cast<double>(s) / 32767.0, -1.0, 1.0);
  }
  return wave;
}

}  // namespace svlab
