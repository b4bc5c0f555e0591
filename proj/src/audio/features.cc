// maac/audio/features.cc

#include "maac/audio/features.h"

#include <fftw3.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <numbers>
#include <stdexcept>

#include "maac/io/framed_file.h"
#include "maac/numerics/rng.h"

namespace maac::audio {
namespace {

constexpr char kMagic[] = "MAACFEAT";

struct FftwDeleter {
  void operator()(double* p) const { fftw_free(p); }
  void operator()(fftw_complex* p) const { fftw_free(p); }
};

}  // namespace

void LogMelParams::validate() const {
  if (sample_rate <= 0 || window <= 1 || hop <= 0 || n_mels <= 0) {
    throw std::invalid_argument("log-mel params must be positive");
  }
  if (!(floor_eps > 0)) throw std::invalid_argument("floor_eps must be > 0");
  if (f_min < 0 || effective_f_max() <= f_min ||
      effective_f_max() > sample_rate / 2.0) {
    throw std::invalid_argument("log-mel frequency range is invalid");
  }
}

nlohmann::json LogMelParams::to_json() const {
  return {{"sample_rate", sample_rate}, {"window", window}, {"hop", hop},
          {"n_mels", n_mels},           {"floor_eps", floor_eps},
          {"f_min", f_min},             {"f_max", f_max}};
}

LogMelParams LogMelParams::from_json(const nlohmann::json& j) {
  LogMelParams p;
  p.sample_rate = j.at("sample_rate").get<int>();
  p.window = j.at("window").get<int>();
  p.hop = j.at("hop").get<int>();
  p.n_mels = j.at("n_mels").get<int>();
  p.floor_eps = j.at("floor_eps").get<double>();
  p.f_min = j.value("f_min", 0.0);
  p.f_max = j.value("f_max", 0.0);
  return p;
}

std::string LogMelParams::digest() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(to_json().dump())));
  return buf;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

std::vector<double> mel_edges_hz(const LogMelParams& p) {
  p.validate();
  const double lo = hz_to_mel(p.f_min);
  const double hi = hz_to_mel(p.effective_f_max());
  std::vector<double> edges(static_cast<std::size_t>(p.n_mels) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) /
                                  static_cast<double>(p.n_mels + 1));
  }
  return edges;
}

Tensor mel_filterbank(const LogMelParams& p) {
  const auto edges = mel_edges_hz(p);
  const std::size_t n_bins = static_cast<std::size_t>(p.window) / 2 + 1;
  const auto n_mels = static_cast<std::size_t>(p.n_mels);
  Tensor fb({n_mels, n_bins});
  for (std::size_t j = 0; j < n_mels; ++j) {
    const double l = edges[j], c = edges[j + 1], r = edges[j + 2];
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * p.sample_rate / p.window;
      double w = 0.0;
      if (f > l && f <= c) {
        w = (f - l) / (c - l);
      } else if (f > c && f < r) {
        w = (r - f) / (r - c);
      }
      fb.at(j, k) = w;
    }
  }
  return fb;
}

std::size_t frame_count(std::size_t n_samples, const LogMelParams& p) {
  const auto win = static_cast<std::size_t>(p.window);
  if (n_samples < win) return 0;
  return 1 + (n_samples - win) / static_cast<std::size_t>(p.hop);
}

LogMel logmel(const Waveform& w, const LogMelParams& p) {
  p.validate();
  if (w.sample_rate != p.sample_rate) {
    throw std::invalid_argument("logmel: waveform rate " +
                                std::to_string(w.sample_rate) +
                                " differs from feature rate " +
                                std::to_string(p.sample_rate));
  }
  const std::size_t n_frames = frame_count(w.samples.size(), p);
  if (n_frames == 0) {
    throw std::invalid_argument("logmel: signal shorter than one window (" +
                                std::to_string(w.samples.size()) + " < " +
                                std::to_string(p.window) + " samples)");
  }
  const auto win = static_cast<std::size_t>(p.window);
  const std::size_t n_bins = win / 2 + 1;
  const auto n_mels = static_cast<std::size_t>(p.n_mels);

  std::vector<double> hann(win);
  for (std::size_t i = 0; i < win; ++i) {
    hann[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                   static_cast<double>(win));
  }
  const Tensor fb = mel_filterbank(p);

  std::unique_ptr<double, FftwDeleter> in(fftw_alloc_real(win));
  std::unique_ptr<fftw_complex, FftwDeleter> out(fftw_alloc_complex(n_bins));
  // FFTW planning is not thread-safe; ESTIMATE keeps it cheap and
  // deterministic.
  fftw_plan plan = fftw_plan_dft_r2c_1d(p.window, in.get(), out.get(),
                                        FFTW_ESTIMATE);
  LogMel m;
  m.params = p;
  m.frames = Tensor({n_frames, n_mels});
  std::vector<double> power(n_bins);
  for (std::size_t t = 0; t < n_frames; ++t) {
    const double* src = w.samples.data() + t * static_cast<std::size_t>(p.hop);
    for (std::size_t i = 0; i < win; ++i) in.get()[i] = src[i] * hann[i];
    fftw_execute(plan);
    for (std::size_t k = 0; k < n_bins; ++k) {
      power[k] = out.get()[k][0] * out.get()[k][0] + out.get()[k][1] * out.get()[k][1];
    }
    for (std::size_t j = 0; j < n_mels; ++j) {
      double e = 0.0;
      for (std::size_t k = 0; k < n_bins; ++k) e += fb.at(j, k) * power[k];
      m.frames.at(t, j) = std::log(e + p.floor_eps);
    }
  }
  fftw_destroy_plan(plan);
  m.frames.finalize("logmel");
  return m;
}

void write_feature_cache(const std::filesystem::path& path, const LogMel& m) {
  nlohmann::json header = {{"shape", m.frames.shape()},
                           {"params", m.params.to_json()}};
  io::write_framed(path, kMagic, header, m.frames.data());
}

LogMel read_feature_cache(const std::filesystem::path& path) {
  io::FramedFile f = io::read_framed(path, kMagic);
  LogMel m;
  Shape shape;
  try {
    shape = f.header.at("shape").get<Shape>();
    m.params = LogMelParams::from_json(f.header.at("params"));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path.string() + ": bad feature header: " + e.what());
  }
  if (shape.size() != 2 || shape_size(shape) != f.values.size() ||
      shape[1] != static_cast<std::size_t>(m.params.n_mels)) {
    throw std::runtime_error(path.string() + ": feature shape " +
                             shape_string(shape) + " does not match body");
  }
  m.frames = Tensor(shape, std::move(f.values));
  return m;
}

LogMel read_feature_cache(const std::filesystem::path& path,
                          const LogMelParams& expected) {
  LogMel m = read_feature_cache(path);
  if (!(m.params == expected)) {
    throw std::runtime_error(path.string() +
                             ": cached features were computed with params " +
                             m.params.to_json().dump() + ", expected " +
                             expected.to_json().dump());
  }
  return m;
}

}  // namespace maac::audio
