// maac/model/captioner.h
//
// Glue between the keyword encoder and the decoder: the combined model
// configuration, per-clip encoding (acoustic sequence plus the top-K keyword
// ids) and a step model over the decoder for greedy and beam search.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "maac/audio/features.h"
#include "maac/data/vocab.h"
#include "maac/decoder/decoder.h"
#include "maac/encoder/keyword_encoder.h"
#include "maac/inference/search.h"
#include "maac/keywords/keyword_table.h"

namespace maac::model {

struct ModelConfig {
  audio::LogMelParams features;
  enc::EncoderConfig encoder;
  dec::DecoderConfig decoder;

  // "tiny" or "paper"; vocabulary and keyword counts are filled in later.
  static ModelConfig preset(const std::string& name);

  // Sets n_keywords, vocab_size and the decoder input width.
  void bind_sizes(std::size_t n_keywords, std::size_t vocab_size);
  void validate() const;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

// Hex FNV-1a of a JSON value's compact dump.
std::string json_hash(const nlohmann::json& j);

// Keyword table index -> vocabulary id. Throws if a keyword has no id.
std::vector<int> keyword_vocab_ids(const kw::KeywordTable& table,
                                   const data::Vocab& vocab);

struct ClipEncoding {
  Tensor sequence;            // [L x C_last]
  std::vector<double> probs;  // keyword probabilities [N]
  std::vector<int> topk;      // keyword indices, best first
};

// Eval-mode encoder pass on one clip's [T x n_mels] features.
ClipEncoding encode_clip(ParameterStore& store, const enc::EncoderConfig& cfg,
                         const Tensor& frames, std::size_t k);

std::vector<int> to_vocab_ids(std::span<const int> keyword_indices,
                              std::span<const int> keyword_vocab);

struct StepAttention {
  int token = 0;
  std::vector<double> alpha_x;
  std::vector<double> alpha_w;  // empty when the keyword path is off
  std::vector<double> alpha_p;  // empty when the previous-word path is off
};

// Eval-mode decoder over one clip. Satisfies infer::StepModel.
class DecoderSession {
 public:
  struct State {
    dec::DecoderState dec;
    std::vector<StepAttention> trace;
  };

  DecoderSession(ParameterStore& store, const dec::DecoderConfig& cfg,
                 const Tensor& sequence, std::span<const int> keyword_ids,
                 bool record_attention = false);

  State initial();
  infer::Expansion<State> expand(const State& s);

 private:
  Binding bind_;
  dec::DecoderConfig cfg_;
  dec::DecoderContext ctx_;
  bool record_;
};

struct Decoded {
  std::vector<int> tokens;  // without BOS and EOS
  double logprob = 0.0;
  std::vector<StepAttention> attention;
};

Decoded greedy_caption(DecoderSession& session, std::size_t max_len);
// All finished hypotheses, best first.
std::vector<Decoded> beam_captions(DecoderSession& session,
                                   const infer::SearchOptions& opt);

// One JSON object per decoded step:
// {step, token, alpha_acoustic, alpha_keywords, alpha_prev}.
nlohmann::json attention_json(const Decoded& d, const data::Vocab& vocab);

}  // namespace maac::model
