// maac/decoder/decoder.cc

#include "maac/decoder/decoder.h"

#include <algorithm>
#include <stdexcept>

#include "maac/data/vocab.h"
#include "maac/numerics/init.h"
#include "maac/numerics/ops.h"

namespace maac::dec {
namespace {

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

void add_linear(ParameterStore& store, const std::string& prefix,
                std::size_t out, std::size_t in, std::uint64_t seed) {
  Rng rng = parameter_rng(seed, prefix + ".w");
  store.add(prefix + ".w", xavier_uniform({out, in}, in, out, rng));
  store.add(prefix + ".b", Tensor({out}, 0.0));
}

void add_attention(ParameterStore& store, const std::string& prefix,
                   const DecoderConfig& cfg, std::uint64_t seed) {
  const std::size_t M = sz(cfg.M), H = sz(cfg.H), C = sz(cfg.C);
  Rng rs = parameter_rng(seed, prefix + ".w_s");
  store.add(prefix + ".w_s", xavier_uniform({M, H}, H, M, rs));
  store.add(prefix + ".b_s", Tensor({M}, 0.0));
  Rng ri = parameter_rng(seed, prefix + ".w_i");
  store.add(prefix + ".w_i", xavier_uniform({M, C}, C, M, ri));
  store.add(prefix + ".b_i", Tensor({M}, 0.0));
  Rng rn = parameter_rng(seed, prefix + ".w_n");
  store.add(prefix + ".w_n", xavier_uniform({1, M}, M, 1, rn));
  store.add(prefix + ".b_n", Tensor({1}, 0.0));
}

// Semantic group used by the keyword path and by the previous-word path.
std::string kw_group(const DecoderConfig& cfg) {
  return cfg.share_semantic_attention ? "sem" : "kw";
}
std::string prev_group(const DecoderConfig& cfg) {
  return cfg.share_semantic_attention ? "sem" : "prev";
}

Var project(Binding& bind, const std::string& group, const Var& embedded) {
  const std::string p = "dec." + group + "_latent";
  return ops::linear(embedded, bind(p + ".w"), bind(p + ".b"));
}

AttentionParams group_attention(Binding& bind, const std::string& group) {
  return bind_attention(bind, "dec.att_" + group);
}

Var zeros(int n) { return Var(Tensor({sz(n)}, 0.0)); }

void check_token(const DecoderConfig& cfg, int token) {
  if (token < 0 || token >= cfg.vocab_size) {
    throw std::out_of_range("decoder: token id " + std::to_string(token) +
                            " outside vocabulary of " +
                            std::to_string(cfg.vocab_size));
  }
}

}  // namespace

void DecoderConfig::validate() const {
  if (x_dim <= 0 || c1 <= 0 || C <= 0 || H <= 0 || M <= 0 || embed_dim <= 0 ||
      K <= 0) {
    throw std::invalid_argument("decoder: dimensions must be positive");
  }
  if (H != C || embed_dim != C) {
    throw std::invalid_argument(
        "decoder: H, C and embed_dim must be equal (GLU halving and summed "
        "LSTM input); got H=" + std::to_string(H) + " C=" + std::to_string(C) +
        " embed_dim=" + std::to_string(embed_dim));
  }
  if (vocab_size <= data::kNumSpecials) {
    throw std::invalid_argument("decoder: vocabulary has no words");
  }
  if (dropout_embed < 0 || dropout_embed >= 1 || dropout_classifier < 0 ||
      dropout_classifier >= 1) {
    throw std::invalid_argument("decoder: dropout rates must lie in [0, 1)");
  }
}

nlohmann::json DecoderConfig::to_json() const {
  return {{"x_dim", x_dim},
          {"c1", c1},
          {"C", C},
          {"H", H},
          {"M", M},
          {"embed_dim", embed_dim},
          {"K", K},
          {"vocab_size", vocab_size},
          {"use_prev_words", use_prev_words},
          {"use_keywords", use_keywords},
          {"share_semantic_attention", share_semantic_attention},
          {"dropout_embed", dropout_embed},
          {"dropout_classifier", dropout_classifier}};
}

DecoderConfig DecoderConfig::from_json(const nlohmann::json& j) {
  DecoderConfig c;
  c.x_dim = j.at("x_dim").get<int>();
  c.c1 = j.at("c1").get<int>();
  c.C = j.at("C").get<int>();
  c.H = j.at("H").get<int>();
  c.M = j.at("M").get<int>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.K = j.at("K").get<int>();
  c.vocab_size = j.at("vocab_size").get<int>();
  c.use_prev_words = j.at("use_prev_words").get<bool>();
  c.use_keywords = j.at("use_keywords").get<bool>();
  c.share_semantic_attention = j.at("share_semantic_attention").get<bool>();
  c.dropout_embed = j.at("dropout_embed").get<double>();
  c.dropout_classifier = j.at("dropout_classifier").get<double>();
  return c;
}

std::vector<std::string> semantic_prefixes(const DecoderConfig& cfg) {
  std::vector<std::string> groups;
  auto add = [&](const std::string& g) {
    if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
  };
  if (cfg.use_keywords) add(kw_group(cfg));
  if (cfg.use_prev_words) add(prev_group(cfg));
  std::vector<std::string> out;
  for (const auto& g : groups) {
    out.push_back("dec." + g + "_latent.");
    out.push_back("dec.att_" + g + ".");
  }
  return out;
}

void register_decoder(ParameterStore& store, const DecoderConfig& cfg,
                      std::uint64_t seed) {
  cfg.validate();
  const std::size_t C = sz(cfg.C), H = sz(cfg.H), E = sz(cfg.embed_dim);
  const std::size_t V = sz(cfg.vocab_size);
  add_linear(store, "dec.x_linear", sz(cfg.c1), sz(cfg.x_dim), seed);
  add_linear(store, "dec.x_latent", C, sz(cfg.c1), seed);
  Rng er = parameter_rng(seed, "dec.emb");
  store.add("dec.emb", uniform_init({V, E}, 0.1, er));
  add_attention(store, "dec.att_x", cfg, seed);
  std::vector<std::string> groups;
  if (cfg.use_keywords) groups.push_back(kw_group(cfg));
  if (cfg.use_prev_words && (groups.empty() || groups.front() != prev_group(cfg))) {
    groups.push_back(prev_group(cfg));
  }
  for (const auto& g : groups) {
    add_linear(store, "dec." + g + "_latent", C, E, seed);
    add_attention(store, "dec.att_" + g, cfg, seed);
  }
  Rng ri = parameter_rng(seed, "dec.lstm.w_ih");
  store.add("dec.lstm.w_ih", xavier_uniform({4 * H, C}, C, 4 * H, ri));
  Rng rh = parameter_rng(seed, "dec.lstm.w_hh");
  store.add("dec.lstm.w_hh", xavier_uniform({4 * H, H}, H, 4 * H, rh));
  Tensor bias({4 * H}, 0.0);
  for (std::size_t i = H; i < 2 * H; ++i) bias[i] = 1.0;  // forget gate
  store.add("dec.lstm.b", std::move(bias));
  add_linear(store, "dec.out", V, H, seed);
}

AttentionParams bind_attention(Binding& bind, const std::string& prefix) {
  return {bind(prefix + ".w_s"), bind(prefix + ".b_s"), bind(prefix + ".w_i"),
          bind(prefix + ".b_i"), bind(prefix + ".w_n"), bind(prefix + ".b_n")};
}

Var attention_keys(const Var& f_hat, const AttentionParams& p) {
  if (f_hat.value().rank() != 2 || f_hat.shape()[0] == 0) {
    throw std::invalid_argument("attention: expected [R x C] rows, got " +
                                shape_string(f_hat.shape()));
  }
  return ops::linear(f_hat, p.w_i, p.b_i);
}

AttentionOut attention_with_keys(const Var& f_hat, const Var& keys,
                                 const Var& h_prev, const AttentionParams& p) {
  if (h_prev.value().rank() != 1 || f_hat.value().rank() != 2 ||
      keys.value().rank() != 2 || keys.shape()[0] != f_hat.shape()[0]) {
    throw std::invalid_argument("attention: shape mismatch");
  }
  const std::size_t R = f_hat.shape()[0], C = f_hat.shape()[1];
  if (h_prev.size() + C != 2 * C) {
    throw std::invalid_argument("attention: GLU needs a hidden state of width C");
  }
  const Var query = ops::linear(h_prev, p.w_s, p.b_s);           // [M]
  const Var a = ops::relu(ops::add_row(keys, query));            // [R x M]
  const Var scores = ops::reshape(ops::linear(a, p.w_n, p.b_n), {R});
  AttentionOut out;
  out.alpha = ops::softmax(scores, 0);
  out.context = ops::reshape(
      ops::matmul(ops::reshape(out.alpha, {1, R}), f_hat), {C});
  const Var parts[] = {out.context, h_prev};
  out.o = ops::glu(ops::concat(parts));
  return out;
}

AttentionOut attention_module(const Var& f_hat, const Var& h_prev,
                              const AttentionParams& p) {
  return attention_with_keys(f_hat, attention_keys(f_hat, p), h_prev, p);
}

Var init_hidden(const Var& x_hat) {
  static constexpr std::size_t kRows[] = {0};
  if (x_hat.value().rank() != 2) {
    throw std::invalid_argument("init_hidden: expected [L x C]");
  }
  return ops::mean_axes(x_hat, kRows);
}

DecoderContext prepare_context(Binding& bind, const DecoderConfig& cfg,
                               const Var& sequence,
                               std::span<const int> keyword_ids) {
  if (sequence.value().rank() != 2 || sequence.shape()[1] != sz(cfg.x_dim)) {
    throw std::invalid_argument("prepare_context: expected [L x " +
                                std::to_string(cfg.x_dim) + "], got " +
                                shape_string(sequence.shape()));
  }
  DecoderContext ctx;
  const Var x = ops::linear(sequence, bind("dec.x_linear.w"), bind("dec.x_linear.b"));
  ctx.x_hat = ops::linear(x, bind("dec.x_latent.w"), bind("dec.x_latent.b"));
  ctx.x_keys = attention_keys(ctx.x_hat, bind_attention(bind, "dec.att_x"));
  ctx.keywords.assign(keyword_ids.begin(), keyword_ids.end());
  if (cfg.use_keywords) {
    if (keyword_ids.empty()) {
      throw std::invalid_argument("prepare_context: keyword path needs K >= 1");
    }
    for (int id : keyword_ids) check_token(cfg, id);
    const std::string g = kw_group(cfg);
    ctx.w_hat = project(bind, g, ops::gather_rows(bind("dec.emb"), keyword_ids));
    ctx.w_keys = attention_keys(ctx.w_hat, group_attention(bind, g));
  }
  return ctx;
}

DecoderState init_state(Binding& bind, const DecoderConfig& cfg,
                        const DecoderContext& ctx) {
  DecoderState s;
  s.h = init_hidden(ctx.x_hat);
  s.c = zeros(cfg.H);
  push_token(bind, cfg, s, data::kBos);
  return s;
}

void push_token(Binding& bind, const DecoderConfig& cfg, DecoderState& state,
                int token) {
  check_token(cfg, token);
  state.prev.push_back(token);
  if (!cfg.use_prev_words) return;
  const std::string g = prev_group(cfg);
  const int ids[] = {token};
  const Var row = project(bind, g, ops::gather_rows(bind("dec.emb"), ids));
  const AttentionParams p = group_attention(bind, g);
  state.prev_rows.push_back(ops::reshape(row, {sz(cfg.C)}));
  state.prev_keys.push_back(
      ops::reshape(ops::linear(row, p.w_i, p.b_i), {sz(cfg.M)}));
}

SemanticOut semantic_context(Binding& bind, const DecoderConfig& cfg,
                             std::span<const int> keywords,
                             std::span<const int> prev, const Var& h_prev) {
  if (prev.empty()) {
    throw std::invalid_argument("semantic_context: P is empty (seed it with BOS)");
  }
  SemanticOut out{zeros(cfg.C), zeros(cfg.C), std::nullopt, std::nullopt};
  if (cfg.use_keywords) {
    const std::string g = kw_group(cfg);
    const Var w_hat = project(bind, g, ops::gather_rows(bind("dec.emb"), keywords));
    AttentionOut a = attention_module(w_hat, h_prev, group_attention(bind, g));
    out.o_w = a.o;
    out.alpha_w = a.alpha;
  }
  if (cfg.use_prev_words) {
    const std::string g = prev_group(cfg);
    const Var p_hat = project(bind, g, ops::gather_rows(bind("dec.emb"), prev));
    AttentionOut a = attention_module(p_hat, h_prev, group_attention(bind, g));
    out.o_p = a.o;
    out.alpha_p = a.alpha;
  }
  return out;
}

StepOut decode_step(Binding& bind, const DecoderConfig& cfg,
                    const DecoderContext& ctx, const DecoderState& state,
                    int w_prev) {
  check_token(cfg, w_prev);
  if (state.prev.empty()) {
    throw std::invalid_argument("decode_step: P is empty (seed it with BOS)");
  }
  StepOut out;
  std::vector<Var> inputs;
  AttentionOut ax = attention_with_keys(ctx.x_hat, ctx.x_keys, state.h,
                                        bind_attention(bind, "dec.att_x"));
  inputs.push_back(ax.o);
  out.alpha_x = ax.alpha;
  if (cfg.use_keywords) {
    AttentionOut aw = attention_with_keys(ctx.w_hat, ctx.w_keys, state.h,
                                          group_attention(bind, kw_group(cfg)));
    inputs.push_back(aw.o);
    out.alpha_w = aw.alpha;
  }
  if (cfg.use_prev_words) {
    AttentionOut ap = attention_with_keys(
        ops::stack(state.prev_rows), ops::stack(state.prev_keys), state.h,
        group_attention(bind, prev_group(cfg)));
    inputs.push_back(ap.o);
    out.alpha_p = ap.alpha;
  }
  const int ids[] = {w_prev};
  const Var emb = ops::reshape(ops::gather_rows(bind("dec.emb"), ids),
                               {sz(cfg.embed_dim)});
  inputs.push_back(ops::dropout(bind, emb, cfg.dropout_embed));
  const ops::LstmOut cell =
      ops::lstm_cell(ops::add_n(inputs), state.h, state.c, bind("dec.lstm.w_ih"),
                     bind("dec.lstm.w_hh"), bind("dec.lstm.b"));
  out.state = state;
  out.state.h = cell.h;
  out.state.c = cell.c;
  out.logits = ops::linear(ops::dropout(bind, cell.h, cfg.dropout_classifier),
                           bind("dec.out.w"), bind("dec.out.b"));
  out.log_probs = ops::log_softmax(out.logits);
  return out;
}

}  // namespace maac::dec
