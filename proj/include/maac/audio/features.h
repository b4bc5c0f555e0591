// maac/audio/features.h
//
// Log-mel energies: periodic Hann window, power spectrum via FFTW, HTK mel
// triangles with unit peak, then log(x + floor_eps). Frames are taken
// without padding, so T = 1 + (n - window) / hop.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "maac/audio/wav.h"
#include "maac/numerics/tensor.h"

namespace maac::audio {

struct LogMelParams {
  int sample_rate = 32000;
  int window = 1024;
  int hop = 320;
  int n_mels = 64;
  double floor_eps = 1e-10;
  double f_min = 0.0;
  double f_max = 0.0;  // 0 means Nyquist

  bool operator==(const LogMelParams&) const = default;

  static LogMelParams tiny() { return {16000, 512, 256, 32, 1e-10, 0.0, 0.0}; }
  double effective_f_max() const { return f_max > 0 ? f_max : sample_rate / 2.0; }
  void validate() const;
  // Short stable digest; feature cache files are keyed by it.
  std::string digest() const;
  nlohmann::json to_json() const;
  static LogMelParams from_json(const nlohmann::json& j);
};

struct LogMel {
  Tensor frames;  // [T_frames x n_mels]
  LogMelParams params;

  std::size_t n_frames() const { return frames.dim(0); }
  std::size_t n_mels() const { return frames.dim(1); }
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// n_mels + 2 edge frequencies in Hz; filter j peaks at edges[j + 1].
std::vector<double> mel_edges_hz(const LogMelParams& p);
// [n_mels x (window/2 + 1)] triangle weights.
Tensor mel_filterbank(const LogMelParams& p);

std::size_t frame_count(std::size_t n_samples, const LogMelParams& p);

// The waveform rate must equal p.sample_rate; resample first otherwise.
LogMel logmel(const Waveform& w, const LogMelParams& p);

// Cache file: framed container with magic "MAACFEAT", header
// {"shape": [T, F], "params": {...}}.
void write_feature_cache(const std::filesystem::path& path, const LogMel& m);
LogMel read_feature_cache(const std::filesystem::path& path);
// As above, but a params mismatch is an error.
LogMel read_feature_cache(const std::filesystem::path& path,
                          const LogMelParams& expected);

}  // namespace maac::audio
