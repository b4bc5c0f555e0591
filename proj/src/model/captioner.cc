// maac/model/captioner.cc

#include "maac/model/captioner.h"

#include <cstdio>
#include <stdexcept>

#include "maac/numerics/ops.h"

namespace maac::model {

ModelConfig ModelConfig::preset(const std::string& name) {
  ModelConfig m;
  if (name == "paper") {
    // Defaults of the three component configs are the full-scale ones.
    return m;
  }
  if (name != "tiny") {
    throw std::invalid_argument("unknown preset '" + name + "' (expected tiny or paper)");
  }
  m.features = audio::LogMelParams::tiny();
  m.encoder.backbone = enc::BackboneConfig::tiny(m.features.n_mels);
  m.encoder.head_dim = 32;
  m.decoder.c1 = 32;
  m.decoder.C = m.decoder.H = m.decoder.M = m.decoder.embed_dim = 32;
  m.decoder.dropout_embed = m.decoder.dropout_classifier = 0.1;
  m.decoder.x_dim = m.encoder.backbone.channels.back();
  return m;
}

void ModelConfig::bind_sizes(std::size_t n_keywords, std::size_t vocab_size) {
  encoder.n_keywords = static_cast<int>(n_keywords);
  decoder.vocab_size = static_cast<int>(vocab_size);
  decoder.x_dim = encoder.backbone.channels.back();
}

void ModelConfig::validate() const {
  features.validate();
  encoder.validate();
  if (encoder.backbone.n_mels != features.n_mels) {
    throw std::invalid_argument("model: encoder expects " +
                                std::to_string(encoder.backbone.n_mels) +
                                " mel bins, features produce " +
                                std::to_string(features.n_mels));
  }
  decoder.validate();
  if (decoder.x_dim != encoder.backbone.channels.back()) {
    throw std::invalid_argument("model: decoder x_dim differs from the last block width");
  }
  if (decoder.K > encoder.n_keywords) {
    throw std::invalid_argument("model: K=" + std::to_string(decoder.K) +
                                " exceeds the keyword table size " +
                                std::to_string(encoder.n_keywords));
  }
}

nlohmann::json ModelConfig::to_json() const {
  return {{"features", features.to_json()},
          {"encoder", encoder.to_json()},
          {"decoder", decoder.to_json()}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig m;
  m.features = audio::LogMelParams::from_json(j.at("features"));
  m.encoder = enc::EncoderConfig::from_json(j.at("encoder"));
  m.decoder = dec::DecoderConfig::from_json(j.at("decoder"));
  return m;
}

std::string json_hash(const nlohmann::json& j) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

std::vector<int> keyword_vocab_ids(const kw::KeywordTable& table,
                                   const data::Vocab& vocab) {
  std::vector<int> out;
  for (const auto& k : table.entries()) {
    if (!vocab.contains(k)) {
      throw std::invalid_argument("keyword '" + k + "' is not in the caption vocabulary");
    }
    out.push_back(vocab.id(k));
  }
  return out;
}

ClipEncoding encode_clip(ParameterStore& store, const enc::EncoderConfig& cfg,
                         const Tensor& frames, std::size_t k) {
  Binding bind(store, false, false);
  const Var x(enc::stack_features({&frames}));
  const enc::EncoderOut out = enc::encode(bind, x, cfg);
  ClipEncoding e;
  e.sequence = ops::select(out.sequence, 0).value();
  const auto& y = out.y_hat.value();
  e.probs.assign(y.data().begin(), y.data().end());
  e.topk = enc::topk_keywords(e.probs, k);
  return e;
}

std::vector<int> to_vocab_ids(std::span<const int> keyword_indices,
                              std::span<const int> keyword_vocab) {
  std::vector<int> out;
  for (int i : keyword_indices) out.push_back(keyword_vocab[static_cast<std::size_t>(i)]);
  return out;
}

DecoderSession::DecoderSession(ParameterStore& store, const dec::DecoderConfig& cfg,
                               const Tensor& sequence, std::span<const int> keyword_ids,
                               bool record_attention)
    : bind_(store, false, false), cfg_(cfg), record_(record_attention) {
  ctx_ = dec::prepare_context(bind_, cfg_, Var(sequence), keyword_ids);
}

DecoderSession::State DecoderSession::initial() {
  return State{dec::init_state(bind_, cfg_, ctx_), {}};
}

namespace {
std::vector<double> values(const std::optional<Var>& v) {
  if (!v) return {};
  const auto d = v->value().data();
  return {d.begin(), d.end()};
}
}  // namespace

infer::Expansion<DecoderSession::State> DecoderSession::expand(const State& s) {
  dec::StepOut step = dec::decode_step(bind_, cfg_, ctx_, s.dec, s.dec.prev.back());
  infer::Expansion<State> ex;
  const auto lp = step.log_probs.value().data();
  ex.log_probs.assign(lp.begin(), lp.end());
  StepAttention att;
  if (record_) {
    att.alpha_x = values(step.alpha_x);
    att.alpha_w = values(step.alpha_w);
    att.alpha_p = values(step.alpha_p);
  }
  ex.child = [this, next = std::move(step.state), trace = s.trace,
              att = std::move(att)](int token) {
    State child{next, trace};
    if (record_) {
      StepAttention a = att;
      a.token = token;
      child.trace.push_back(std::move(a));
    }
    dec::push_token(bind_, cfg_, child.dec, token);
    return child;
  };
  return ex;
}

Decoded greedy_caption(DecoderSession& session, std::size_t max_len) {
  auto h = infer::greedy_decode(session, max_len);
  return {infer::strip_eos(h.tokens), h.logprob, std::move(h.state.trace)};
}

std::vector<Decoded> beam_captions(DecoderSession& session,
                                   const infer::SearchOptions& opt) {
  std::vector<Decoded> out;
  for (auto& h : infer::beam_search(session, opt)) {
    out.push_back({infer::strip_eos(h.tokens), h.logprob, std::move(h.state.trace)});
  }
  return out;
}

nlohmann::json attention_json(const Decoded& d, const data::Vocab& vocab) {
  nlohmann::json steps = nlohmann::json::array();
  for (std::size_t t = 0; t < d.attention.size(); ++t) {
    const StepAttention& a = d.attention[t];
    steps.push_back({{"step", t + 1},
                     {"token", vocab.word(a.token)},
                     {"alpha_acoustic", a.alpha_x},
                     {"alpha_keywords", a.alpha_w},
                     {"alpha_prev", a.alpha_p}});
  }
  return steps;
}

}  // namespace maac::model
