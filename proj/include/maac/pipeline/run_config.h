// maac/pipeline/run_config.h
//
// Everything a CLI stage needs besides its input files: model shape, training
// schedule, keyword/decoding settings and synthetic-data options. Read from a
// flat "key = value" file, overridden by flags, and written back next to every
// stage's outputs.

#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "maac/data/synth.h"
#include "maac/model/captioner.h"
#include "maac/training/config.h"

namespace maac::pipeline {

struct RunConfig {
  std::string preset = "tiny";
  model::ModelConfig model;
  train::TrainConfig train;
  std::size_t n_keywords = 300;
  std::size_t beam_size = 4;
  double length_gamma = 0.0;
  data::SynthOptions synth;

  // "tiny" (desk scale) or "paper".
  static RunConfig from_preset(const std::string& name);

  // Throws std::invalid_argument naming the key for unknown keys or values
  // that do not parse.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  void validate() const;

  // Sorted key = value lines, loadable with apply_config_file.
  void write(std::ostream& out) const;
  void write(const std::filesystem::path& path) const;
};

struct ConfigKey {
  std::string key;
  std::string section;  // which stage reads it
  std::string help;
};
const std::vector<ConfigKey>& config_keys();

// "key = value" lines; '#' starts a comment. Errors carry the line number.
std::vector<std::pair<std::string, std::string>> parse_config(std::istream& in);

// Preset (flag, else the file's "preset" entry, else tiny), then the file's
// other entries in order, then the overrides.
RunConfig resolve_config(const std::filesystem::path& file, const std::string& preset,
                         const std::vector<std::pair<std::string, std::string>>& overrides);

}  // namespace maac::pipeline
