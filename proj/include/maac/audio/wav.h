// maac/audio/wav.h

#pragma once

#include <filesystem>
#include <vector>

namespace maac::audio {

struct Waveform {
  std::vector<double> samples;  // nominally in [-1, 1]
  int sample_rate = 0;
};

// 16-bit PCM RIFF/WAVE; stereo is averaged to mono. Other encodings raise
// std::runtime_error.
Waveform read_wav(const std::filesystem::path& path);
// Mono 16-bit PCM; samples are clipped to [-1, 1].
void write_wav(const std::filesystem::path& path, const Waveform& wave);

// Linear-interpolation resampling.
Waveform resample_linear(const Waveform& wave, int target_rate);

}  // namespace maac::audio
