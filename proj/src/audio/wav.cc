// maac/audio/wav.cc

#include "maac/audio/wav.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace maac::audio {
namespace {

std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff),
                     static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

void put16(std::ostream& out, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  out.write(b, 2);
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  auto fail = [&](const std::string& why) {
    throw std::runtime_error(path.string() + ": " + why);
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    fail("not a RIFF/WAVE file");
  }
  int channels = 0, rate = 0, bits = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::size_t len = le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + len > bytes.size()) fail("truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (len < 16) fail("short fmt chunk");
      if (le16(chunk + 8) != 1) fail("only PCM encoding is supported");
      channels = le16(chunk + 10);
      rate = static_cast<int>(le32(chunk + 12));
      bits = le16(chunk + 22);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_len = len;
    }
    pos = body + len + (len & 1);
  }
  if (!data || channels == 0) fail("missing fmt or data chunk");
  if (bits != 16) fail("only 16-bit samples are supported");
  if (channels > 2) fail("more than two channels");
  const std::size_t frames = data_len / (2 * static_cast<std::size_t>(channels));
  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (int c = 0; c < channels; ++c) {
      const auto raw = static_cast<std::int16_t>(
          le16(data + 2 * (i * static_cast<std::size_t>(channels) + static_cast<std::size_t>(c))));
      acc += raw / 32768.0;
    }
    w.samples[i] = acc / channels;
  }
  return w;
}

void write_wav(const std::filesystem::path& path, const Waveform& wave) {
  if (wave.sample_rate <= 0) throw std::invalid_argument("write_wav: bad rate");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const auto n = static_cast<std::uint32_t>(wave.samples.size());
  out.write("RIFF", 4);
  put32(out, 36 + 2 * n);
  out.write("WAVEfmt ", 8);
  put32(out, 16);
  put16(out, 1);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(wave.sample_rate));
  put32(out, static_cast<std::uint32_t>(wave.sample_rate) * 2);
  put16(out, 2);
  put16(out, 16);
  out.write("data", 4);
  put32(out, 2 * n);
  for (double s : wave.samples) {
    const double c = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
    const auto v = static_cast<std::int16_t>(c);
    put16(out, static_cast<std::uint16_t>(v));
  }
}

Waveform resample_linear(const Waveform& wave, int target_rate) {
  if (target_rate <= 0 || wave.sample_rate <= 0) {
    throw std::invalid_argument("resample_linear: rates must be positive");
  }
  if (target_rate == wave.sample_rate) return wave;
  Waveform out;
  out.sample_rate = target_rate;
  const double ratio = static_cast<double>(wave.sample_rate) / target_rate;
  const auto n = static_cast<std::size_t>(
      std::floor(static_cast<double>(wave.samples.size() - 1) / ratio)) + 1;
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * ratio;
    const auto k = static_cast<std::size_t>(t);
    const double frac = t - static_cast<double>(k);
    const double a = wave.samples[k];
    const double b = k + 1 < wave.samples.size() ? wave.samples[k + 1] : a;
    out.samples[i] = a + frac * (b - a);
  }
  return out;
}

}  // namespace maac::audio
