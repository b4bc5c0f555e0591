// maac/pipeline/stages.h
//
// One function per CLI subcommand. Inputs default to the files an earlier
// stage leaves in the same output directory, so a run is
//
//   gen-synth -> build-keywords -> build-labels -> pretrain-encoder
//   -> train-ce -> finetune-rl -> infer -> evaluate
//
// all pointed at one directory. Every stage writes config.<stage>.txt with
// the resolved configuration and is a pure function of its inputs and the
// config (training logs leave out wall time for that reason).

#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "maac/data/corpus.h"
#include "maac/pipeline/checkpoint.h"
#include "maac/pipeline/run_config.h"

namespace maac::pipeline {

namespace fs = std::filesystem;

struct StageIo {
  fs::path out_dir;
  fs::path captions;    // default <out>/captions.csv
  fs::path data_dir;    // default <out>/features
  data::DataKind kind = data::DataKind::kFeatures;
  fs::path cache_dir;   // audio input only; default <out>/feature_cache
  fs::path keywords;    // default <out>/keywords.tsv
  fs::path vocab;       // default <out>/vocab.json
  fs::path labels;      // default <out>/labels.jsonl
  fs::path planted;     // default <out>/planted.json when present
  fs::path checkpoint;  // input checkpoint; default depends on the stage
  fs::path stoplist;    // default: the built-in list
  std::ostream* progress = nullptr;

  // Fills unset paths from out_dir.
  void apply_defaults();
};

fs::path gen_synth(const RunConfig& cfg, StageIo io);

struct KeywordResult {
  kw::KeywordTable table;
  data::Vocab vocab;
};
// keywords.tsv and vocab.json. The vocabulary comes from these (training)
// captions plus every keyword.
KeywordResult build_keywords(const RunConfig& cfg, StageIo io);

// labels.jsonl: {"clip_id", "keywords": [...], "bits": "0110..."} per clip.
void build_labels(const RunConfig& cfg, StageIo io);
std::map<std::string, std::vector<std::uint8_t>> read_labels(const fs::path& path,
                                                              std::size_t n_keywords);

// Log-mel frames for every clip of the table. Audio input is resampled to the
// feature rate and cached under <cache_dir>/<params digest>/.
std::vector<Tensor> load_features(const data::CaptionTable& table, const fs::path& data_dir,
                                  data::DataKind kind, const audio::LogMelParams& params,
                                  const fs::path& cache_dir);

// encoder.ckpt, encoder_log.jsonl, encoder_report.json
// {train_bce, planted_recall (if planted.json exists), k}.
nlohmann::json pretrain_encoder(const RunConfig& cfg, StageIo io);

// ce.ckpt, ce_log.jsonl, ce_report.json
// {tf_accuracy, tf_loss, greedy_exact, clips, greedy_cider}.
nlohmann::json train_ce(const RunConfig& cfg, StageIo io);

// rl.ckpt, rl_log.jsonl, rl_report.json {cider_before, cider_after}.
nlohmann::json finetune_rl(const RunConfig& cfg, StageIo io);

// hypotheses.csv with the best beam for every clip of the captions table.
fs::path infer(const RunConfig& cfg, StageIo io);

// metrics.json from hypotheses.csv against the captions table.
nlohmann::json evaluate(const RunConfig& cfg, StageIo io, const fs::path& hypotheses,
                        std::optional<double> spice = std::nullopt);

// attention.json: the greedy caption of one clip with its per-step weights.
nlohmann::json export_attention(const RunConfig& cfg, StageIo io, const std::string& clip_id);

}  // namespace maac::pipeline
