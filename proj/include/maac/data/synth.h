// maac/data/synth.h
//
// Synthetic captioning corpus. Every clip mixes 2-4 "events", each with its
// own time-frequency shape (steady tone, pulses, glides, clicks, noise band,
// chord, ...) placed in its own mel band, and gets five template captions that
// name the events with one noun and one verb apiece. The event -> keyword
// map is exact, so the ideal keyword recall is 1.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "maac/audio/features.h"
#include "maac/audio/wav.h"

namespace maac::data {

struct SynthEvent {
  std::string noun;
  std::string verb;      // canonical form, the keyword
  std::string verb_3s;   // "barks"
  std::string verb_ing;  // "barking"
};

// Twelve events; the first n_events of them are used.
const std::vector<SynthEvent>& synth_events();

struct SynthOptions {
  std::uint64_t seed = 0;
  std::size_t n_clips = 50;
  std::size_t n_events = 10;
  std::size_t min_events = 2;
  std::size_t max_events = 4;
  double duration_s = 1.5;
  bool write_wav = false;
  audio::LogMelParams features = audio::LogMelParams::tiny();

  void validate() const;
  nlohmann::json to_json() const;
};

struct SynthClip {
  std::string clip_id;          // "synth_0007.wav"
  std::vector<int> events;      // ascending event indices
  std::vector<std::string> captions;  // caption_1 is the canonical one
  audio::Waveform wave;
};

// Base frequency of event e: the centre of its mel band under `features`.
double synth_event_hz(std::size_t e, std::size_t n_events,
                      const audio::LogMelParams& features);

// caption_1 lists the events in index order as "a <noun> <verb>s" joined
// by "and"; the other four vary order, article, verb form and conjunction.
std::vector<SynthClip> generate_synthetic(const SynthOptions& opt);

// Canonical keywords of a clip (noun and verb of every event), sorted.
std::vector<std::string> planted_keywords(const SynthClip& clip);

// Writes captions.csv, features/<stem>.feat, planted.json and, when
// requested, wav/<clip>.wav under dir.
void write_synthetic(const std::filesystem::path& dir, const SynthOptions& opt,
                     const std::vector<SynthClip>& clips);

}  // namespace maac::data
