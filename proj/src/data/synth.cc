// maac/data/synth.cc

#include "maac/data/synth.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <stdexcept>

#include "maac/data/csv.h"
#include "maac/numerics/rng.h"

namespace maac::data {
namespace {

std::string article(const std::string& noun) {
  return std::string(std::string_view("aeiou").find(noun[0]) != std::string_view::npos ? "an"
                                                                                        : "a");
}

std::string phrase(const SynthEvent& e, int form, int det) {
  const std::string d = det == 0 ? article(e.noun) : "the";
  switch (form) {
    case 0: return d + " " + e.noun + " " + e.verb_3s;
    case 1: return d + " " + e.noun + " is " + e.verb_ing;
    default: return e.verb_ing + " of " + d + " " + e.noun;
  }
}

std::string sentence_case(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s + ".";
}


constexpr double kTwoPi = 2 * std::numbers::pi;

// Raised-cosine fade over `ramp` samples at both ends.
double fade(std::size_t t, std::size_t len, std::size_t ramp) {
  const std::size_t edge = std::min(t, len - 1 - t);
  if (edge >= ramp) return 1.0;
  return 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(edge) /
                              static_cast<double>(ramp));
}

// Gate that is open for `on` seconds out of every `period`.
double gate(double time, double on, double period) {
  return std::fmod(time, period) < on ? 1.0 : 0.0;
}

// Each event type has its own time-frequency shape so a small convolutional
// model can tell them apart without relying on absolute frequency alone.
void add_event(std::vector<double>& out, std::size_t onset, std::size_t len,
               std::size_t type, double hz, double sr, Rng& rng) {
  const auto ramp = static_cast<std::size_t>(0.01 * sr);
  std::vector<double> phase(24);
  for (double& p : phase) p = rng.uniform(0, kTwoPi);
  auto tone = [&](double f, double time, std::size_t k) {
    return std::sin(kTwoPi * f * time + phase[k]);
  };
  auto band = [&](double lo, double hi, double time) {
    double acc = 0;
    for (std::size_t k = 0; k < 16; ++k) {
      const double f = lo + (hi - lo) * (static_cast<double>(k) + 0.5) / 16.0;
      acc += std::sin(kTwoPi * f * time + phase[k]);
    }
    return acc / 4.0;
  };
  for (std::size_t t = 0; t < len; ++t) {
    const double time = static_cast<double>(t) / sr;
    double v = 0;
    switch (type % 12) {
      case 0: v = tone(hz, time, 0); break;                           // steady tone
      case 1: v = gate(time, 0.048, 0.096) * tone(hz, time, 0); break;  // fast pulses
      case 2: v = gate(time, 0.128, 0.256) * tone(hz, time, 0); break;  // slow pulses
      case 3: {  // rising glides, 0.2 s each
        const double u = std::fmod(time, 0.2);
        v = std::sin(kTwoPi * hz * (u + 0.5 * u * u / 0.2) + phase[0]);
        break;
      }
      case 4: {  // falling glides
        const double u = std::fmod(time, 0.2);
        v = std::sin(kTwoPi * hz * (1.5 * u - 0.5 * u * u / 0.2) + phase[0]);
        break;
      }
      case 5: v = 2.0 * gate(time, 0.006, 0.096) * band(200, 0.45 * sr, time); break;  // clicks
      case 6: v = band(0.85 * hz, 1.15 * hz, time); break;         // noise band
      case 7: v = 0.7 * (tone(hz, time, 0) + tone(1.26 * hz, time, 1)); break;  // two-tone chord
      case 8: v = (0.5 - 0.5 * std::cos(kTwoPi * 6.0 * time)) * tone(hz, time, 0); break;
      case 9: v = gate(time, 0.064, 0.128) * band(0.85 * hz, 1.15 * hz, time); break;
      case 10: v = 0.6 * (tone(hz, time, 0) + tone(2 * hz, time, 1) + tone(3 * hz, time, 2)); break;
      default: v = gate(time, 0.016, 0.032) * tone(hz, time, 0); break;
    }
    out[onset + t] += 0.2 * fade(t, len, ramp) * v;
  }
}

}  // namespace

const std::vector<SynthEvent>& synth_events() {
  static const std::vector<SynthEvent> events = {
      {"dog", "bark", "barks", "barking"},     {"bird", "chirp", "chirps", "chirping"},
      {"engine", "hum", "hums", "humming"},    {"bell", "ring", "rings", "ringing"},
      {"door", "creak", "creaks", "creaking"}, {"water", "flow", "flows", "flowing"},
      {"wind", "blow", "blows", "blowing"},    {"crowd", "cheer", "cheers", "cheering"},
      {"bee", "buzz", "buzzes", "buzzing"},    {"car", "honk", "honks", "honking"},
      {"rain", "patter", "patters", "pattering"}, {"clock", "tick", "ticks", "ticking"},
  };
  return events;
}

void SynthOptions::validate() const {
  if (n_clips == 0) throw std::invalid_argument("synth: n_clips must be >= 1");
  if (n_events < 2 || n_events > synth_events().size()) {
    throw std::invalid_argument("synth: n_events must lie in [2, " +
                                std::to_string(synth_events().size()) + "]");
  }
  if (min_events < 1 || min_events > max_events || max_events > n_events) {
    throw std::invalid_argument("synth: need 1 <= min_events <= max_events <= n_events");
  }
  features.validate();
  if (static_cast<std::size_t>(features.n_mels) < n_events + 2) {
    throw std::invalid_argument("synth: too few mel bands for the events");
  }
  if (duration_s * features.sample_rate < features.window) {
    throw std::invalid_argument("synth: clips shorter than one analysis window");
  }
}

nlohmann::json SynthOptions::to_json() const {
  return {{"seed", seed},           {"n_clips", n_clips},
          {"n_events", n_events},   {"min_events", min_events},
          {"max_events", max_events}, {"duration_s", duration_s},
          {"features", features.to_json()}};
}

double synth_event_hz(std::size_t e, std::size_t n_events,
                      const audio::LogMelParams& features) {
  // Bands spread evenly over the filterbank, keeping clear of both edges.
  const auto n = static_cast<std::size_t>(features.n_mels);
  const std::size_t band = 2 + e * (n - 4) / (n_events - 1);
  const auto edges = audio::mel_edges_hz(features);
  return edges[band + 1];
}

std::vector<SynthClip> generate_synthetic(const SynthOptions& opt) {
  opt.validate();
  const auto& events = synth_events();
  const Rng root(opt.seed);
  const auto n_samples = static_cast<std::size_t>(opt.duration_s * opt.features.sample_rate);
  const double sr = opt.features.sample_rate;
  const char* joiners[] = {" and ", " while ", " as ", " then "};
  std::vector<SynthClip> clips;
  for (std::size_t i = 0; i < opt.n_clips; ++i) {
    Rng rng = root.derive("clip").derive(i);
    SynthClip clip;
    char name[32];
    std::snprintf(name, sizeof name, "synth_%04zu.wav", i);
    clip.clip_id = name;
    const std::size_t k =
        opt.min_events + rng.below(opt.max_events - opt.min_events + 1);
    std::vector<int> pool(opt.n_events);
    for (std::size_t e = 0; e < opt.n_events; ++e) pool[e] = static_cast<int>(e);
    for (std::size_t j = 0; j < k; ++j) {
      std::swap(pool[j], pool[j + rng.below(opt.n_events - j)]);
    }
    clip.events.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(clip.events.begin(), clip.events.end());

    clip.wave.sample_rate = opt.features.sample_rate;
    clip.wave.samples.assign(n_samples, 0.0);
    for (double& s : clip.wave.samples) s = 0.003 * rng.normal();
    for (int e : clip.events) {
      const double hz = synth_event_hz(static_cast<std::size_t>(e), opt.n_events, opt.features);
      const auto len =
          static_cast<std::size_t>(rng.uniform(0.4, 0.8) * static_cast<double>(n_samples));
      const std::size_t onset = rng.below(n_samples - len + 1);
      Rng er = rng.derive("event").derive(static_cast<std::uint64_t>(e));
      add_event(clip.wave.samples, onset, len, static_cast<std::size_t>(e), hz, sr, er);
    }
    // Overlapping events can add up past full scale; keep 16-bit WAVs unclipped.
    double peak = 0;
    for (double v : clip.wave.samples) peak = std::max(peak, std::abs(v));
    if (peak > 0.9) {
      for (double& v : clip.wave.samples) v *= 0.9 / peak;
    }

    std::string canonical;
    for (std::size_t j = 0; j < k; ++j) {
      if (j) canonical += " and ";
      canonical += phrase(events[static_cast<std::size_t>(clip.events[j])], 0, 0);
    }
    clip.captions.push_back(sentence_case(canonical));
    for (int c = 0; c < 4; ++c) {
      std::vector<int> order = clip.events;
      for (std::size_t j = order.size(); j > 1; --j) std::swap(order[j - 1], order[rng.below(j)]);
      std::string s;
      for (std::size_t j = 0; j < order.size(); ++j) {
        if (j) s += joiners[rng.below(4)];
        s += phrase(events[static_cast<std::size_t>(order[j])], static_cast<int>(rng.below(3)),
                    static_cast<int>(rng.below(2)));
      }
      clip.captions.push_back(sentence_case(s));
    }
    clips.push_back(std::move(clip));
  }
  return clips;
}

std::vector<std::string> planted_keywords(const SynthClip& clip) {
  std::set<std::string> out;
  for (int e : clip.events) {
    out.insert(synth_events()[static_cast<std::size_t>(e)].noun);
    out.insert(synth_events()[static_cast<std::size_t>(e)].verb);
  }
  return {out.begin(), out.end()};
}

void write_synthetic(const std::filesystem::path& dir, const SynthOptions& opt,
                     const std::vector<SynthClip>& clips) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "features");
  if (opt.write_wav) fs::create_directories(dir / "wav");
  std::ofstream csv(dir / "captions.csv", std::ios::binary);
  if (!csv) throw std::runtime_error("cannot write " + (dir / "captions.csv").string());
  write_csv_row(csv, {"file_name", "caption_1", "caption_2", "caption_3", "caption_4",
                      "caption_5"});
  nlohmann::json planted = nlohmann::json::object();
  for (const auto& clip : clips) {
    std::vector<std::string> row = {clip.clip_id};
    row.insert(row.end(), clip.captions.begin(), clip.captions.end());
    write_csv_row(csv, row);
    const std::string stem = fs::path(clip.clip_id).stem().string();
    audio::write_feature_cache(dir / "features" / (stem + ".feat"),
                               audio::logmel(clip.wave, opt.features));
    if (opt.write_wav) audio::write_wav(dir / "wav" / clip.clip_id, clip.wave);
    nlohmann::json names = nlohmann::json::array();
    for (int e : clip.events) names.push_back(synth_events()[static_cast<std::size_t>(e)].noun);
    planted[clip.clip_id] = {{"events", names}, {"keywords", planted_keywords(clip)}};
  }
  std::ofstream meta(dir / "planted.json", std::ios::binary);
  meta << nlohmann::json{{"options", opt.to_json()}, {"clips", planted}}.dump(1) << '\n';
}

}  // namespace maac::data
