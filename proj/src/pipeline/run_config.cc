// maac/pipeline/run_config.cc

#include "maac/pipeline/run_config.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace maac::pipeline {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const char* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw std::invalid_argument("config: " + key + " = '" + v + "' is not a valid number");
  }
  if constexpr (std::is_unsigned_v<T>) {
    if (!v.empty() && v[0] == '-') {
      throw std::invalid_argument("config: " + key + " must be non-negative");
    }
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config: " + key + " = '" + v + "' is not a boolean");
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}
std::string fmt(bool v) { return v ? "true" : "false"; }
template <class T>
  requires std::is_integral_v<T>
std::string fmt(T v) { return std::to_string(v); }

std::string fmt_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::vector<int> parse_ints(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::istringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(parse_number<int>(key, trim(item)));
  if (out.empty()) throw std::invalid_argument("config: " + key + " is empty");
  return out;
}

struct Entry {
  ConfigKey doc;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define MAAC_FIELD(KEY, SECTION, HELP, EXPR, TYPE)                                    \
  Entry {                                                                             \
    {KEY, SECTION, HELP}, [](const RunConfig& c) { return fmt(c.EXPR); },             \
        [](RunConfig& c, const std::string& v) { c.EXPR = parse_number<TYPE>(KEY, v); } \
  }
#define MAAC_FLAG(KEY, SECTION, HELP, EXPR)                                \
  Entry {                                                                  \
    {KEY, SECTION, HELP}, [](const RunConfig& c) { return fmt(c.EXPR); }, \
        [](RunConfig& c, const std::string& v) { c.EXPR = parse_bool(KEY, v); } \
  }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      {{"seed", "all", "seed for data generation, initialisation and training"},
       [](const RunConfig& c) { return fmt(c.train.seed); },
       [](RunConfig& c, const std::string& v) {
         c.train.seed = c.synth.seed = parse_number<std::uint64_t>("seed", v);
       }},
      MAAC_FIELD("features.sample_rate", "features", "analysis rate in Hz",
                 model.features.sample_rate, int),
      MAAC_FIELD("features.window", "features", "STFT window and FFT size",
                 model.features.window, int),
      MAAC_FIELD("features.hop", "features", "STFT hop in samples", model.features.hop, int),
      MAAC_FIELD("features.n_mels", "features", "mel bands", model.features.n_mels, int),
      MAAC_FIELD("features.f_min", "features", "lowest mel edge in Hz", model.features.f_min,
                 double),
      MAAC_FIELD("features.f_max", "features", "highest mel edge in Hz, 0 for Nyquist",
                 model.features.f_max, double),
      {{"encoder.channels", "encoder", "comma-separated block widths"},
       [](const RunConfig& c) { return fmt_ints(c.model.encoder.backbone.channels); },
       [](RunConfig& c, const std::string& v) {
         c.model.encoder.backbone.channels = parse_ints("encoder.channels", v);
       }},
      MAAC_FIELD("encoder.head_dim", "encoder", "width of each hierarchy head",
                 model.encoder.head_dim, int),
      MAAC_FIELD("keywords.n", "build-keywords", "keyword table size N", n_keywords,
                 std::size_t),
      MAAC_FIELD("decoder.c1", "decoder", "projected acoustic width", model.decoder.c1, int),
      MAAC_FIELD("decoder.C", "decoder", "attention width C", model.decoder.C, int),
      MAAC_FIELD("decoder.H", "decoder", "LSTM width H", model.decoder.H, int),
      MAAC_FIELD("decoder.M", "decoder", "semantic latent width M", model.decoder.M, int),
      MAAC_FIELD("decoder.embed_dim", "decoder", "word embedding width",
                 model.decoder.embed_dim, int),
      MAAC_FIELD("decoder.K", "decoder", "keywords fed to the decoder", model.decoder.K, int),
      MAAC_FLAG("decoder.use_prev_words", "decoder", "previous-word attention path",
                model.decoder.use_prev_words),
      MAAC_FLAG("decoder.use_keywords", "decoder", "keyword attention path",
                model.decoder.use_keywords),
      MAAC_FLAG("decoder.share_semantic_attention", "decoder",
                "one attention module for keywords and previous words",
                model.decoder.share_semantic_attention),
      MAAC_FIELD("decoder.dropout_embed", "decoder", "dropout on word embeddings",
                 model.decoder.dropout_embed, double),
      MAAC_FIELD("decoder.dropout_classifier", "decoder", "dropout before the output layer",
                 model.decoder.dropout_classifier, double),
      MAAC_FIELD("train.batch_size", "pretrain-encoder", "clips per encoder batch",
                 train.batch_size, std::size_t),
      MAAC_FIELD("train.lr_encoder_heads", "pretrain-encoder", "phase 1 lr (frozen backbone)",
                 train.lr_encoder_heads, double),
      MAAC_FIELD("train.lr_encoder_finetune", "pretrain-encoder", "phase 2 lr",
                 train.lr_encoder_finetune, double),
      MAAC_FIELD("train.epochs_encoder_heads", "pretrain-encoder", "phase 1 epochs",
                 train.epochs_encoder_heads, int),
      MAAC_FIELD("train.epochs_encoder_finetune", "pretrain-encoder", "phase 2 epochs",
                 train.epochs_encoder_finetune, int),
      MAAC_FLAG("train.mixup", "pretrain-encoder", "mixup on encoder batches", train.mixup),
      MAAC_FIELD("train.mixup_alpha", "pretrain-encoder", "Beta(alpha, alpha) for mixup",
                 train.mixup_alpha, double),
      MAAC_FLAG("train.spec_augment", "pretrain-encoder", "time/frequency masking",
                train.spec_augment),
      MAAC_FIELD("train.spec_time_masks", "pretrain-encoder", "time masks per clip",
                 train.spec_augment_cfg.n_time_masks, int),
      MAAC_FIELD("train.spec_max_time_width", "pretrain-encoder",
                 "widest time mask, 0 for a tenth of the clip",
                 train.spec_augment_cfg.max_time_width, int),
      MAAC_FIELD("train.spec_freq_masks", "pretrain-encoder", "frequency masks per clip",
                 train.spec_augment_cfg.n_freq_masks, int),
      MAAC_FIELD("train.spec_max_freq_width", "pretrain-encoder", "widest frequency mask",
                 train.spec_augment_cfg.max_freq_width, int),
      MAAC_FIELD("train.lr_ce", "train-ce", "CE lr", train.lr_ce, double),
      MAAC_FIELD("train.epochs_ce", "train-ce", "CE epochs", train.epochs_ce, int),
      MAAC_FIELD("train.label_smoothing", "train-ce", "label smoothing eps",
                 train.label_smoothing, double),
      MAAC_FIELD("train.teacher_forcing_prob", "train-ce", "initial teacher forcing prob",
                 train.teacher_forcing_prob, double),
      MAAC_FIELD("train.teacher_forcing_decay", "train-ce", "per-epoch factor on it",
                 train.teacher_forcing_decay, double),
      MAAC_FIELD("train.teacher_forcing_min", "train-ce", "floor of the schedule",
                 train.teacher_forcing_min, double),
      MAAC_FIELD("train.ce_captions_per_clip", "train-ce",
                 "CE targets per clip, first n in file order", train.ce_captions_per_clip,
                 std::size_t),
      MAAC_FIELD("train.lr_rl", "finetune-rl", "RL lr", train.lr_rl, double),
      MAAC_FIELD("train.epochs_rl", "finetune-rl", "RL epochs", train.epochs_rl, int),
      MAAC_FLAG("train.freeze_encoder_rl", "finetune-rl", "keep the encoder fixed during RL",
                train.freeze_encoder_rl),
      MAAC_FIELD("train.lr_decay", "training", "per-epoch lr factor", train.lr_decay, double),
      MAAC_FIELD("train.grad_clip", "training", "global gradient-norm clip", train.grad_clip,
                 double),
      MAAC_FIELD("train.adam_beta1", "training", "Adam beta1", train.adam.beta1, double),
      MAAC_FIELD("train.adam_beta2", "training", "Adam beta2", train.adam.beta2, double),
      MAAC_FIELD("train.adam_eps", "training", "Adam epsilon", train.adam.eps, double),
      MAAC_FIELD("decode.max_len", "finetune-rl, infer", "longest caption in words",
                 train.max_len, std::size_t),
      MAAC_FIELD("decode.beam_size", "infer", "beam width, 1 is greedy", beam_size,
                 std::size_t),
      MAAC_FIELD("decode.length_gamma", "infer", "final ranking by logprob / len^gamma",
                 length_gamma, double),
      MAAC_FIELD("synth.n_clips", "gen-synth", "clips to generate", synth.n_clips,
                 std::size_t),
      MAAC_FIELD("synth.n_events", "gen-synth", "distinct events (at most 12)",
                 synth.n_events, std::size_t),
      MAAC_FIELD("synth.min_events", "gen-synth", "fewest events per clip", synth.min_events,
                 std::size_t),
      MAAC_FIELD("synth.max_events", "gen-synth", "most events per clip", synth.max_events,
                 std::size_t),
      MAAC_FIELD("synth.duration", "gen-synth", "clip length in seconds", synth.duration_s,
                 double),
      MAAC_FLAG("synth.write_wav", "gen-synth", "also write 16-bit WAV files",
                synth.write_wav),
  };
  return table;
}

#undef MAAC_FIELD
#undef MAAC_FLAG

const Entry& find_entry(const std::string& key) {
  for (const auto& e : entries()) {
    if (e.doc.key == key) return e;
  }
  throw std::invalid_argument("config: unknown key '" + key + "'");
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& e : entries()) out.push_back(e.doc);
    return out;
  }();
  return keys;
}

RunConfig RunConfig::from_preset(const std::string& name) {
  RunConfig c;
  c.preset = name;
  c.model = model::ModelConfig::preset(name);
  if (name == "tiny") {
    // Desk scale: a 50-clip synthetic set is overfit in well under a minute.
    // Augmentation is off because the goal there is memorisation.
    c.n_keywords = 20;
    c.train.batch_size = 16;
    c.train.epochs_encoder_heads = 5;
    c.train.epochs_encoder_finetune = 100;
    c.train.lr_encoder_finetune = 1e-2;
    c.train.mixup = false;
    c.train.spec_augment = false;
    c.train.epochs_ce = 200;
    c.train.lr_ce = 2e-2;
    c.train.ce_captions_per_clip = 1;
    c.train.epochs_rl = 5;
  }
  c.synth.features = c.model.features;
  return c;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "preset") {
    throw std::invalid_argument("config: preset can only be chosen before other keys");
  }
  find_entry(key).set(*this, trim(value));
  if (key == "encoder.channels" &&
      model.encoder.backbone.channels.size() != model.encoder.backbone.pools.size()) {
    throw std::invalid_argument("config: encoder.channels needs " +
                                std::to_string(model.encoder.backbone.pools.size()) +
                                " entries for this preset");
  }
  model.encoder.backbone.n_mels = model.features.n_mels;
  model.decoder.x_dim = model.encoder.backbone.channels.back();
  synth.features = model.features;
}

std::string RunConfig::get(const std::string& key) const {
  if (key == "preset") return preset;
  return find_entry(key).get(*this);
}

void RunConfig::validate() const {
  if (n_keywords == 0) throw std::invalid_argument("config: keywords.n must be >= 1");
  if (beam_size == 0) throw std::invalid_argument("config: decode.beam_size must be >= 1");
  if (model.decoder.K <= 0) throw std::invalid_argument("config: decoder.K must be >= 1");
  model.features.validate();
  model.encoder.backbone.validate();
  train.validate();
  synth.validate();
}

void RunConfig::write(std::ostream& out) const {
  out << "preset = " << preset << "\n";
  for (const auto& e : entries()) out << e.doc.key << " = " << e.get(*this) << "\n";
}

void RunConfig::write(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write(out);
}

std::vector<std::pair<std::string, std::string>> parse_config(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    const std::string key = eq == std::string::npos ? "" : trim(line.substr(0, eq));
    if (key.empty()) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key = value");
    }
    out.emplace_back(key, trim(line.substr(eq + 1)));
  }
  return out;
}

RunConfig resolve_config(const std::filesystem::path& file, const std::string& preset,
                         const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::vector<std::pair<std::string, std::string>> from_file;
  if (!file.empty()) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open config " + file.string());
    try {
      from_file = parse_config(in);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(file.string() + ": " + e.what());
    }
  }
  std::string name = "tiny";
  for (const auto& [k, v] : from_file) {
    if (k == "preset") name = v;
  }
  if (!preset.empty()) name = preset;
  RunConfig cfg = RunConfig::from_preset(name);
  for (const auto& [k, v] : from_file) {
    if (k != "preset") cfg.set(k, v);
  }
  for (const auto& [k, v] : overrides) cfg.set(k, v);
  cfg.validate();
  return cfg;
}

}  // namespace maac::pipeline
