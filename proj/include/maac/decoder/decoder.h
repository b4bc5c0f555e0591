// maac/decoder/decoder.h
//
// LSTM caption decoder with one acoustic attention over X_hat and a semantic
// attention over keyword embeddings W_hat and previously predicted words
// P_hat. Every attention head computes
//
//   A     = ReLU((F W_i^T + b_i) (+) (h W_s^T + b_s))     [R x M]
//   alpha = softmax(A W_n + b_n)                          [R]
//   ctx   = sum_r alpha_r F_r                             [C]
//   o     = GLU([ctx, h])                                 [C]
//
// and the LSTM input is o_x + o_w + o_p + Emb(w_prev).
//
// Parameter names (prefix dec.):
//   x_linear, x_latent          acoustic sequence -> X -> X_hat
//   emb                         shared word table [V x E]
//   att_x.*                     acoustic attention
//   sem_latent, att_sem.*       semantic path when shared
//   kw_latent, att_kw.*,        semantic paths when not shared
//   prev_latent, att_prev.*
//   lstm.{w_ih, w_hh, b}, out.{w, b}

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "maac/numerics/graph.h"

namespace maac::dec {

struct DecoderConfig {
  int x_dim = 2048;  // channels of the encoder's last block
  int c1 = 512;      // width of X
  int C = 512;
  int H = 512;
  int M = 512;
  int embed_dim = 512;
  int K = 5;
  int vocab_size = 0;
  bool use_prev_words = true;
  bool use_keywords = true;
  bool share_semantic_attention = true;
  double dropout_embed = 0.5;
  double dropout_classifier = 0.25;

  // H == C == embed_dim is required by the GLU halving and the summed LSTM
  // input.
  void validate() const;
  nlohmann::json to_json() const;
  static DecoderConfig from_json(const nlohmann::json& j);
};

void register_decoder(ParameterStore& store, const DecoderConfig& cfg,
                      std::uint64_t seed);

struct AttentionParams {
  Var w_s, b_s;  // [M x H], [M]
  Var w_i, b_i;  // [M x C], [M]
  Var w_n, b_n;  // [1 x M], [1]
};
AttentionParams bind_attention(Binding& bind, const std::string& prefix);

struct AttentionOut {
  Var o;        // [C]
  Var alpha;    // [R]
  Var context;  // [C]
};

// keys = F W_i^T + b_i; computing it once per sequence is equivalent to
// recomputing it at every step.
Var attention_keys(const Var& f_hat, const AttentionParams& p);
AttentionOut attention_with_keys(const Var& f_hat, const Var& keys,
                                 const Var& h_prev, const AttentionParams& p);
AttentionOut attention_module(const Var& f_hat, const Var& h_prev,
                              const AttentionParams& p);

// Per-clip quantities that stay fixed while decoding.
struct DecoderContext {
  Var x_hat;   // [L x C]
  Var x_keys;  // [L x M]
  std::vector<int> keywords;
  Var w_hat;   // [K x C], undefined when keywords are off
  Var w_keys;
};

// sequence: [L x x_dim]; keyword_ids: vocabulary ids of the top-K keywords.
DecoderContext prepare_context(Binding& bind, const DecoderConfig& cfg,
                               const Var& sequence,
                               std::span<const int> keyword_ids);

struct DecoderState {
  Var h;  // [H]
  Var c;  // [H]
  std::vector<int> prev;  // P, seeded with BOS
  std::vector<Var> prev_rows;  // P_hat rows [C]
  std::vector<Var> prev_keys;  // their attention keys [M]

  std::size_t t() const { return prev.size(); }
};

// h0 = mean of the X_hat rows, c0 = 0, P = [BOS].
DecoderState init_state(Binding& bind, const DecoderConfig& cfg,
                        const DecoderContext& ctx);
// Appends a token to P (and its projected row when the P path is on).
void push_token(Binding& bind, const DecoderConfig& cfg, DecoderState& state,
                int token);

Var init_hidden(const Var& x_hat);

struct SemanticOut {
  Var o_w, o_p;  // [C]; zero vectors for disabled paths
  std::optional<Var> alpha_w, alpha_p;
};

// Embeds and projects both id lists, then attends with the semantic
// parameters. P must be non-empty.
SemanticOut semantic_context(Binding& bind, const DecoderConfig& cfg,
                             std::span<const int> keywords,
                             std::span<const int> prev, const Var& h_prev);

struct StepOut {
  Var logits;     // [V]
  Var log_probs;  // [V]
  DecoderState state;  // h and c advanced; P unchanged
  Var alpha_x;
  std::optional<Var> alpha_w, alpha_p;
};

// One step. The caller appends the chosen token with push_token.
StepOut decode_step(Binding& bind, const DecoderConfig& cfg,
                    const DecoderContext& ctx, const DecoderState& state,
                    int w_prev);

// Names of the parameter groups a config uses, e.g. for ablation checks.
std::vector<std::string> semantic_prefixes(const DecoderConfig& cfg);

}  // namespace maac::dec
