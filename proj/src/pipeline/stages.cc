// maac/pipeline/stages.cc

#include "maac/pipeline/stages.h"

#include <fstream>
#include <stdexcept>

#include "maac/audio/features.h"
#include "maac/audio/wav.h"
#include "maac/data/synth.h"
#include "maac/keywords/keyword_table.h"
#include "maac/training/trainers.h"

namespace maac::pipeline {
namespace {

void write_config(const RunConfig& cfg, const StageIo& io, const std::string& stage) {
  fs::create_directories(io.out_dir);
  cfg.write(io.out_dir / ("config." + stage + ".txt"));
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

// Captions table with its data files checked; rejected rows are reported.
data::CaptionTable load_table(const StageIo& io, bool need_data) {
  data::CaptionTable table;
  if (need_data) {
    table = data::load_corpus_csv(io.captions, io.data_dir, io.kind).table;
  } else {
    table = data::read_captions_csv(io.captions);
  }
  if (io.progress) {
    for (const auto& r : table.rejected) {
      *io.progress << "warning: " << io.captions.string() << " line " << r.line << " ("
                   << r.clip_id << "): " << r.reason << ", row skipped\n";
    }
  }
  if (table.clips.empty()) throw std::runtime_error(io.captions.string() + ": no usable clips");
  return table;
}

kw::KeywordTable read_keywords(const fs::path& path) {
  auto in = open_in(path);
  return kw::KeywordTable::read_tsv(in);
}

data::Vocab read_vocab(const fs::path& path) {
  auto in = open_in(path);
  return data::Vocab::from_json(nlohmann::json::parse(in));
}

train::Progress printer(const StageIo& io, int every) {
  if (!io.progress) return {};
  std::ostream* out = io.progress;
  return [out, every](const train::EpochRecord& r) {
    // The last epoch of a stage carries the evaluation; always show it.
    const bool last = r.metrics.contains("tf_accuracy") || r.metrics.contains("train_bce_eval");
    if (r.epoch % every != 0 && !last) return;
    *out << r.stage << " epoch " << r.epoch << " loss " << r.loss << " lr " << r.lr;
    if (!r.metrics.empty()) *out << ' ' << r.metrics.dump();
    *out << '\n';
  };
}

void write_log(const train::TrainLog& log, const fs::path& path) {
  auto out = open_out(path);
  log.write_jsonl(out, false);
}

Checkpoint load_model(const RunConfig& cfg, const fs::path& path) {
  Checkpoint ck = load_checkpoint(path);
  check_compatible(ck.meta, cfg.model, path);
  return ck;
}

// A vocab.json next to the data that disagrees with the checkpoint means the
// token ids of the two no longer line up.
void check_vocab(const StageIo& io, const CheckpointMeta& meta, const fs::path& ckpt) {
  if (!fs::exists(io.vocab)) return;
  const auto v = read_vocab(io.vocab);
  if (v.hash() != meta.vocab.hash()) {
    throw std::runtime_error("vocabulary of " + ckpt.string() + " (hash " + meta.vocab.hash() +
                             ") differs from " + io.vocab.string() + " (hash " + v.hash() + ")");
  }
}

fs::path default_decoder_checkpoint(const StageIo& io) {
  if (!io.checkpoint.empty()) return io.checkpoint;
  if (fs::exists(io.out_dir / "rl.ckpt")) return io.out_dir / "rl.ckpt";
  return io.out_dir / "ce.ckpt";
}

std::vector<train::CaptionExample> caption_examples(ParameterStore& store,
                                                    const CheckpointMeta& meta,
                                                    const data::CaptionTable& table,
                                                    const std::vector<Tensor>& frames) {
  const auto kw_vocab = model::keyword_vocab_ids(meta.keywords, meta.vocab);
  const auto k = static_cast<std::size_t>(meta.model.decoder.K);
  std::vector<train::CaptionExample> out;
  for (std::size_t i = 0; i < table.clips.size(); ++i) {
    const auto& clip = table.clips[i];
    model::ClipEncoding e = model::encode_clip(store, meta.model.encoder, frames[i], k);
    train::CaptionExample ex;
    ex.clip_id = clip.clip_id;
    ex.sequence = std::move(e.sequence);
    ex.keyword_ids = model::to_vocab_ids(e.topk, kw_vocab);
    for (const auto& c : clip.captions) {
      ex.captions.push_back(meta.vocab.encode(c.tokens));
      ex.references.push_back(c.tokens);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::string join_words(const std::vector<std::string>& words) {
  std::string s;
  for (const auto& w : words) s += (s.empty() ? "" : " ") + w;
  return s;
}

}  // namespace

void StageIo::apply_defaults() {
  if (out_dir.empty()) throw std::invalid_argument("an output directory is required");
  if (captions.empty()) captions = out_dir / "captions.csv";
  if (data_dir.empty()) data_dir = out_dir / "features";
  if (cache_dir.empty()) cache_dir = out_dir / "feature_cache";
  if (keywords.empty()) keywords = out_dir / "keywords.tsv";
  if (vocab.empty()) vocab = out_dir / "vocab.json";
  if (labels.empty()) labels = out_dir / "labels.jsonl";
  if (planted.empty() && fs::exists(out_dir / "planted.json")) planted = out_dir / "planted.json";
}

fs::path gen_synth(const RunConfig& cfg, StageIo io) {
  io.apply_defaults();
  write_config(cfg, io, "gen-synth");
  const auto clips = data::generate_synthetic(cfg.synth);
  data::write_synthetic(io.out_dir, cfg.synth, clips);
  return io.out_dir / "captions.csv";
}

KeywordResult build_keywords(const RunConfig& cfg, StageIo io) {
  io.apply_defaults();
  write_config(cfg, io, "build-keywords");
  const auto table = load_table(io, false);
  kw::Stoplist stop = kw::default_stoplist();
  if (!io.stoplist.empty()) {
    auto in = open_in(io.stoplist);
    stop = kw::read_stoplist(in);
  }
  const auto captions = table.all_captions();
  KeywordResult r{kw::build_keyword_table(captions, cfg.n_keywords, stop), {}};
  r.vocab = data::Vocab::build(captions, r.table.entries());
  auto out = open_out(io.keywords);
  r.table.write_tsv(out);
  write_json(io.vocab, r.vocab.to_json());
  if (io.progress && r.table.size() < cfg.n_keywords) {
    *io.progress << "warning: only " << r.table.size() << " keyword candidates, "
                 << cfg.n_keywords << " requested\n";
  }
  return r;
}

void build_labels(const RunConfig& cfg, StageIo io) {
  io.apply_defaults();
  write_config(cfg, io, "build-labels");
  const auto table = load_table(io, false);
  const auto keywords = read_keywords(io.keywords);
  auto out = open_out(io.labels);
  for (const auto& clip : table.clips) {
    const auto label = kw::encode_multihot(clip.captions, keywords);
    std::string bits;
    nlohmann::json names = nlohmann::json::array();
    for (std::size_t i = 0; i < label.bits.size(); ++i) {
      bits.push_back(label.bits[i] ? '1' : '0');
      if (label.bits[i]) names.push_back(keywords.entry(i));
    }
    out << nlohmann::json{{"clip_id", clip.clip_id}, {"keywords", names}, {"bits", bits}}.dump()
        << '\n';
  }
}

std::map<std::string, std::vector<std::uint8_t>> read_labels(const fs::path& path,
                                                              std::size_t n_keywords) {
  auto in = open_in(path);
  std::map<std::string, std::vector<std::uint8_t>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fail = [&](const std::string& why) {
      throw std::runtime_error(path.string() + " line " + std::to_string(line_no) + ": " + why);
    };
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      fail("not JSON");
    }
    if (!j.contains("clip_id") || !j.contains("bits")) fail("needs clip_id and bits");
    const auto bits = j["bits"].get<std::string>();
    if (bits.size() != n_keywords) {
      fail("has " + std::to_string(bits.size()) + " bits, the keyword table has " +
           std::to_string(n_keywords));
    }
    std::vector<std::uint8_t> v;
    for (char c : bits) {
      if (c != '0' && c != '1') fail("bits must be 0 or 1");
      v.push_back(c == '1');
    }
    out[j["clip_id"].get<std::string>()] = std::move(v);
  }
  return out;
}

std::vector<Tensor> load_features(const data::CaptionTable& table, const fs::path& data_dir,
                                  data::DataKind kind, const audio::LogMelParams& params,
                                  const fs::path& cache_dir) {
  std::vector<Tensor> out;
  const fs::path cache = cache_dir / params.digest();
  for (const auto& clip : table.clips) {
    const fs::path src = data::clip_data_path(data_dir, clip.clip_id, kind);
    if (kind == data::DataKind::kFeatures) {
      out.push_back(audio::read_feature_cache(src, params).frames);
      continue;
    }
    const fs::path cached = cache / (fs::path(clip.clip_id).stem().string() + ".feat");
    if (fs::exists(cached)) {
      out.push_back(audio::read_feature_cache(cached, params).frames);
      continue;
    }
    audio::Waveform w = audio::read_wav(src);
    if (w.sample_rate != params.sample_rate) w = audio::resample_linear(w, params.sample_rate);
    audio::LogMel m = audio::logmel(w, params);
    fs::create_directories(cache);
    audio::write_feature_cache(cached, m);
    out.push_back(std::move(m.frames));
  }
  return out;
}

nlohmann::json pretrain_encoder(const RunConfig& cfg, StageIo io) {
  io.apply_defaults();
  write_config(cfg, io, "pretrain-encoder");
  const auto table = load_table(io, true);
  const auto keywords = read_keywords(io.keywords);
  const auto vocab = read_vocab(io.vocab);
  const auto labels = read_labels(io.labels, keywords.size());
  const auto frames = load_features(table, io.data_dir, io.kind, cfg.model.features, io.cache_dir);

  std::vector<train::EncoderExample> data;
  for (std::size_t i = 0; i < table.clips.size(); ++i) {
    const auto& id = table.clips[i].clip_id;
    auto it = labels.find(id);
    if (it == labels.end()) throw std::runtime_error(io.labels.string() + ": no label for " + id);
    Tensor target({it->second.size()});
    for (std::size_t k = 0; k < it->second.size(); ++k) target[k] = it->second[k];
    data.push_back({id, frames[i], std::move(target)});
  }

  CheckpointMeta meta{"encoder", -1, cfg.model, vocab, keywords};
  meta.model.bind_sizes(keywords.size(), vocab.size());
  ParameterStore store = init_model(meta.model, cfg.train.seed);
  train::TrainLog log;
  train::train_encoder(store, meta.model.encoder, data, cfg.train, log, printer(io, 10));
  if (!log.empty()) meta.epoch = log.back().epoch;

  const auto eval = train::evaluate_encoder(store, meta.model.encoder, data);
  const auto k = static_cast<std::size_t>(cfg.model.decoder.K);
  nlohmann::json report = {{"train_bce", eval.bce}, {"k", k}, {"clips", data.size()}};
  if (!io.planted.empty()) {
    auto in = open_in(io.planted);
    const auto planted_json = nlohmann::json::parse(in).at("clips");
    std::vector<std::vector<int>> planted;
    for (const auto& clip : table.clips) {
      std::vector<int> idx;
      for (const auto& w : planted_json.at(clip.clip_id).at("keywords")) {
        idx.push_back(keywords.index_of(w.get<std::string>()));
      }
      planted.push_back(std::move(idx));
    }
    report["planted_recall"] = train::planted_recall(eval.probs, planted, k);
  }
  save_checkpoint(io.out_dir / "encoder.ckpt", store, meta);
  write_log(log, io.out_dir / "encoder_log.jsonl");
  write_json(io.out_dir / "encoder_report.json", report);
  return report;
}

nlohmann::json train_ce(const RunConfig& cfg, StageIo io) {
  io.apply_defaults();
  write_config(cfg, io, "train-ce");
  const fs::path ckpt = io.checkpoint.empty() ? io.out_dir / "encoder.ckpt" : io.checkpoint;
  Checkpoint ck = load_model(cfg, ckpt);
  check_vocab(io, ck.meta, ckpt);
  const auto table = load_table(io, true);
  const auto frames = load_features(table, io.data_dir, io.kind, cfg.model.features, io.cache_dir);
  const auto data = caption_examples(ck.store, ck.meta, table, frames);
  const auto& dcfg = ck.meta.model.decoder;

  train::TrainLog log;
  train::train_captioner_ce(ck.store, dcfg, data, cfg.train, log, printer(io, 10));
  ck.meta.stage = "ce";
  if (!log.empty()) ck.meta.epoch = log.back().epoch;

  const std::size_t n_targets = cfg.train.ce_captions_per_clip;
  const auto tf = train::teacher_forced_eval(ck.store, dcfg, data, n_targets);
  const auto greedy = train::greedy_captions(ck.store, dcfg, data, cfg.train.max_len);
  std::size_t exact = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& caps = data[i].captions;
    const auto end = caps.begin() + static_cast<std::ptrdiff_t>(std::min(n_targets, caps.size()));
    exact += std::find(caps.begin(), end, greedy[i]) != end;
  }
  const nlohmann::json report = {
      {"tf_accuracy", tf.accuracy},
      {"tf_loss", tf.loss},
      {"greedy_exact", exact},
      {"clips", data.size()},
      {"greedy_cider", train::greedy_cider(ck.store, dcfg, data, ck.meta.vocab, cfg.train.max_len)}};
  save_checkpoint(io.out_dir / "ce.ckpt", ck.store, ck.meta);
  write_log(log, io.out_dir / "ce_log.jsonl");
  write_json(io.out_dir / "ce_report.json", report);
  return report;
}

nlohmann::json finetune_rl(const RunConfig& cfg, StageIo io) {
  io.apply_defaults();
  write_config(cfg, io, "finetune-rl");
  const fs::path ckpt = io.checkpoint.empty() ? io.out_dir / "ce.ckpt" : io.checkpoint;
  Checkpoint ck = load_model(cfg, ckpt);
  check_vocab(io, ck.meta, ckpt);
  const auto table = load_table(io, true);
  const auto frames = load_features(table, io.data_dir, io.kind, cfg.model.features, io.cache_dir);
  const auto data = caption_examples(ck.store, ck.meta, table, frames);
  const auto& dcfg = ck.meta.model.decoder;
  const auto max_len = cfg.train.max_len;

  const double before = train::greedy_cider(ck.store, dcfg, data, ck.meta.vocab, max_len);
  const auto kw_vocab = model::keyword_vocab_ids(ck.meta.keywords, ck.meta.vocab);
  train::RlEncoder enc;
  if (!cfg.train.freeze_encoder_rl) enc = {&ck.meta.model.encoder, frames, kw_vocab};
  train::TrainLog log;
  train::scst_finetune(ck.store, dcfg, data, ck.meta.vocab, cfg.train, log, enc, printer(io, 1));
  ck.meta.stage = "rl";
  if (!log.empty()) ck.meta.epoch = log.back().epoch;

  // With a trained encoder the cached sequences are stale; re-encode.
  const auto after_data = cfg.train.freeze_encoder_rl
                              ? data
                              : caption_examples(ck.store, ck.meta, table, frames);
  const nlohmann::json report = {
      {"cider_before", before},
      {"cider_after", train::greedy_cider(ck.store, dcfg, after_data, ck.meta.vocab, max_len)},
      {"clips", data.size()}};
  save_checkpoint(io.out_dir / "rl.ckpt", ck.store, ck.meta);
  write_log(log, io.out_dir / "rl_log.jsonl");
  write_json(io.out_dir / "rl_report.json", report);
  return report;
}

fs::path infer(const RunConfig& cfg, StageIo io) {
  io.apply_defaults();
  write_config(cfg, io, "infer");
  Checkpoint ck = load_model(cfg, default_decoder_checkpoint(io));
  const auto table = load_table(io, true);
  const auto frames = load_features(table, io.data_dir, io.kind, cfg.model.features, io.cache_dir);
  const auto data = caption_examples(ck.store, ck.meta, table, frames);
  const infer::SearchOptions opt{cfg.beam_size, cfg.train.max_len, cfg.length_gamma};
  std::vector<std::pair<std::string, std::string>> rows;
  for (const auto& ex : data) {
    model::DecoderSession session(ck.store, ck.meta.model.decoder, ex.sequence, ex.keyword_ids);
    const auto hyps = model::beam_captions(session, opt);
    const auto words = hyps.empty() ? std::vector<std::string>{}
                                    : ck.meta.vocab.decode(hyps.front().tokens);
    rows.emplace_back(ex.clip_id, join_words(words));
  }
  const fs::path path = io.out_dir / "hypotheses.csv";
  auto out = open_out(path);
  data::write_hypotheses_csv(out, rows);
  return path;
}

nlohmann::json evaluate(const RunConfig& cfg, StageIo io, const fs::path& hypotheses,
                        std::optional<double> spice) {
  io.apply_defaults();
  write_config(cfg, io, "evaluate");
  const auto table = load_table(io, false);
  const fs::path hyp_path = hypotheses.empty() ? io.out_dir / "hypotheses.csv" : hypotheses;
  auto in = open_in(hyp_path);
  const auto hyps = data::read_hypotheses_csv(in);
  std::vector<metrics::EvalPair> pairs;
  std::string missing;
  for (const auto& clip : table.clips) {
    auto it = hyps.find(clip.clip_id);
    if (it == hyps.end()) {
      missing += (missing.empty() ? "" : ", ") + clip.clip_id;
      continue;
    }
    metrics::EvalPair p{clip.clip_id, {}, {}};
    try {
      p.hypothesis = kw::tokenize_caption(it->second).tokens;
    } catch (const std::invalid_argument&) {
      // An empty caption is a legitimate (bad) hypothesis.
    }
    for (const auto& c : clip.captions) p.references.push_back(c.tokens);
    pairs.push_back(std::move(p));
  }
  if (!missing.empty()) {
    throw std::runtime_error(hyp_path.string() + ": no hypothesis for " + missing);
  }
  const auto report = metrics::evaluate(pairs, spice);
  const nlohmann::json j = report.to_json(pairs);
  write_json(io.out_dir / "metrics.json", j);
  if (io.progress) *io.progress << report.table();
  return j;
}

nlohmann::json export_attention(const RunConfig& cfg, StageIo io, const std::string& clip_id) {
  io.apply_defaults();
  write_config(cfg, io, "export-attention");
  Checkpoint ck = load_model(cfg, default_decoder_checkpoint(io));
  const auto full = load_table(io, false);
  const data::ClipEntry* clip = full.find(clip_id);
  if (!clip) throw std::runtime_error(io.captions.string() + ": no clip " + clip_id);
  data::CaptionTable one;
  one.clips.push_back(*clip);
  const auto frames = load_features(one, io.data_dir, io.kind, cfg.model.features, io.cache_dir);
  const auto data = caption_examples(ck.store, ck.meta, one, frames);
  model::DecoderSession session(ck.store, ck.meta.model.decoder, data[0].sequence,
                                data[0].keyword_ids, true);
  const auto d = model::greedy_caption(session, cfg.train.max_len);
  std::vector<std::string> kw_words;
  for (int id : data[0].keyword_ids) kw_words.push_back(ck.meta.vocab.word(id));
  const nlohmann::json j = {{"clip_id", clip_id},
                            {"caption", join_words(ck.meta.vocab.decode(d.tokens))},
                            {"keywords", kw_words},
                            {"steps", model::attention_json(d, ck.meta.vocab)}};
  write_json(io.out_dir / "attention.json", j);
  return j;
}

}  // namespace maac::pipeline
