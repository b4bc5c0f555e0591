// maac/tools/maac.cc
//
// Command-line front end; each subcommand is one pipeline stage.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "maac/pipeline/stages.h"

namespace {

using maac::pipeline::RunConfig;
using maac::pipeline::StageIo;

struct Common {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
  StageIo io;
  bool audio = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--preset", c.preset, "base configuration")
      ->check(CLI::IsMember({"tiny", "paper"}));
  cmd->add_option("--seed", c.seed, "overrides the seed key");
  cmd->add_option("--set", c.sets, "key=value override, repeatable");
  cmd->add_option("--out-dir", c.io.out_dir, "working directory for inputs and outputs")
      ->required();
}

void add_captions(CLI::App* cmd, Common& c) {
  cmd->add_option("--captions", c.io.captions, "captions CSV (default <out>/captions.csv)");
}

void add_data(CLI::App* cmd, Common& c) {
  add_captions(cmd, c);
  cmd->add_option("--data-dir", c.io.data_dir,
                  "feature files <stem>.feat, or audio with --audio (default <out>/features)");
  cmd->add_flag("--audio", c.audio, "data dir holds WAV files named as in the CSV");
  cmd->add_option("--cache-dir", c.io.cache_dir, "feature cache for audio input");
}

RunConfig resolve(Common& c) {
  std::vector<std::pair<std::string, std::string>> overrides;
  for (const auto& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got " + s);
    overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  if (c.seed) overrides.emplace_back("seed", std::to_string(*c.seed));
  if (c.audio) c.io.kind = maac::data::DataKind::kAudio;
  c.io.progress = &std::cerr;
  return maac::pipeline::resolve_config(c.config, c.preset, overrides);
}

}  // namespace

int main(int argc, char** argv) {
  namespace pl = maac::pipeline;
  CLI::App app{"maac: keyword-guided audio captioning"};
  app.require_subcommand(1);
  Common c;

  auto* synth = app.add_subcommand("gen-synth", "write a synthetic captioned dataset");
  add_common(synth, c);

  auto* keywords = app.add_subcommand("build-keywords", "keyword table and vocabulary");
  add_common(keywords, c);
  add_captions(keywords, c);
  keywords->add_option("--stoplist", c.io.stoplist, "one word per line");

  auto* labels = app.add_subcommand("build-labels", "multi-hot keyword labels per clip");
  add_common(labels, c);
  add_captions(labels, c);
  labels->add_option("--keywords", c.io.keywords, "keyword TSV");

  auto* encoder = app.add_subcommand("pretrain-encoder", "train the keyword encoder");
  add_common(encoder, c);
  add_data(encoder, c);
  encoder->add_option("--keywords", c.io.keywords, "keyword TSV");
  encoder->add_option("--vocab", c.io.vocab, "vocabulary JSON");
  encoder->add_option("--labels", c.io.labels, "labels JSONL");
  encoder->add_option("--planted", c.io.planted, "planted.json of a synthetic set");

  auto* ce = app.add_subcommand("train-ce", "cross-entropy captioner training");
  add_common(ce, c);
  add_data(ce, c);
  ce->add_option("--init", c.io.checkpoint, "encoder checkpoint (default <out>/encoder.ckpt)");

  auto* rl = app.add_subcommand("finetune-rl", "self-critical CIDEr-D fine-tuning");
  add_common(rl, c);
  add_data(rl, c);
  rl->add_option("--init", c.io.checkpoint, "CE checkpoint (default <out>/ce.ckpt)");

  auto* inf = app.add_subcommand("infer", "beam-search captions to hypotheses.csv");
  add_common(inf, c);
  add_data(inf, c);
  inf->add_option("--checkpoint", c.io.checkpoint, "default <out>/rl.ckpt, else ce.ckpt");

  std::string hypotheses;
  std::optional<double> spice;
  auto* eval = app.add_subcommand("evaluate", "BLEU, ROUGE-L and CIDEr-D to metrics.json");
  add_common(eval, c);
  add_captions(eval, c);
  eval->add_option("--hypotheses", hypotheses, "default <out>/hypotheses.csv");
  eval->add_option("--spice", spice, "externally computed SPICE, enables SPIDEr");

  std::string clip;
  auto* att = app.add_subcommand("export-attention", "per-step attention of one clip");
  add_common(att, c);
  add_data(att, c);
  att->add_option("--checkpoint", c.io.checkpoint, "default <out>/rl.ckpt, else ce.ckpt");
  att->add_option("--clip", clip, "file_name of the clip")->required();

  auto* keys = app.add_subcommand("config-keys", "list config keys with their defaults");
  std::string keys_preset = "tiny";
  keys->add_option("--preset", keys_preset)->check(CLI::IsMember({"tiny", "paper"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (keys->parsed()) {
      const RunConfig cfg = RunConfig::from_preset(keys_preset);
      for (const auto& k : pl::config_keys()) {
        std::cout << k.key << " = " << cfg.get(k.key) << "    # [" << k.section << "] "
                  << k.help << "\n";
      }
      return 0;
    }
    const RunConfig cfg = resolve(c);
    if (synth->parsed()) {
      std::cout << pl::gen_synth(cfg, c.io).string() << "\n";
    } else if (keywords->parsed()) {
      const auto r = pl::build_keywords(cfg, c.io);
      std::cout << r.table.size() << " keywords, vocabulary of " << r.vocab.size() << "\n";
    } else if (labels->parsed()) {
      pl::build_labels(cfg, c.io);
    } else if (encoder->parsed()) {
      std::cout << pl::pretrain_encoder(cfg, c.io).dump(2) << "\n";
    } else if (ce->parsed()) {
      std::cout << pl::train_ce(cfg, c.io).dump(2) << "\n";
    } else if (rl->parsed()) {
      std::cout << pl::finetune_rl(cfg, c.io).dump(2) << "\n";
    } else if (inf->parsed()) {
      std::cout << pl::infer(cfg, c.io).string() << "\n";
    } else if (eval->parsed()) {
      pl::evaluate(cfg, c.io, hypotheses, spice);
    } else if (att->parsed()) {
      std::cout << pl::export_attention(cfg, c.io, clip).dump(2) << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "maac: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
