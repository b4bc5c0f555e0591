// maac/encoder/keyword_encoder.cc

#include "maac/encoder/keyword_encoder.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "maac/numerics/init.h"
#include "maac/numerics/ops.h"

namespace maac::enc {
namespace {

std::string block_name(std::size_t i, const char* leaf) {
  return "enc.backbone.b" + std::to_string(i) + "." + leaf;
}

void add_linear(ParameterStore& store, const std::string& prefix,
                std::size_t out, std::size_t in, std::uint64_t seed) {
  Rng w_rng = parameter_rng(seed, prefix + ".w");
  store.add(prefix + ".w", xavier_uniform({out, in}, in, out, w_rng));
  store.add(prefix + ".b", Tensor({out}, 0.0));
}

}  // namespace

void BackboneConfig::validate() const {
  if (n_mels <= 0) throw std::invalid_argument("backbone: n_mels must be > 0");
  if (channels.size() < 4) {
    throw std::invalid_argument(
        "backbone: need at least 4 blocks (heads tap blocks 3, 4 and last)");
  }
  if (pools.size() != channels.size()) {
    throw std::invalid_argument("backbone: one pool entry per block required");
  }
  for (int c : channels) {
    if (c <= 0) throw std::invalid_argument("backbone: channel widths must be > 0");
  }
  int f = n_mels;
  for (const auto& [pt, pf] : pools) {
    if (pt <= 0 || pf <= 0) throw std::invalid_argument("backbone: bad pool size");
    f /= pf;
    if (f == 0) throw std::invalid_argument("backbone: pooling exhausts mel axis");
  }
}

BackboneConfig BackboneConfig::tiny(int n_mels) {
  BackboneConfig c;
  c.n_mels = n_mels;
  c.channels = {8, 8, 16, 16, 32, 32};
  c.pools = {{2, 2}, {2, 2}, {2, 2}, {1, 2}, {1, 1}, {1, 1}};
  return c;
}

void EncoderConfig::validate() const {
  backbone.validate();
  if (head_dim <= 0 || n_keywords <= 0) {
    throw std::invalid_argument("encoder: head_dim and n_keywords must be > 0");
  }
}

nlohmann::json EncoderConfig::to_json() const {
  nlohmann::json pools = nlohmann::json::array();
  for (const auto& [t, f] : backbone.pools) pools.push_back({t, f});
  return {{"n_mels", backbone.n_mels},
          {"channels", backbone.channels},
          {"pools", pools},
          {"head_dim", head_dim},
          {"n_keywords", n_keywords}};
}

EncoderConfig EncoderConfig::from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.backbone.n_mels = j.at("n_mels").get<int>();
  c.backbone.channels = j.at("channels").get<std::vector<int>>();
  c.backbone.pools.clear();
  for (const auto& p : j.at("pools")) {
    c.backbone.pools.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
  }
  c.head_dim = j.at("head_dim").get<int>();
  c.n_keywords = j.at("n_keywords").get<int>();
  return c;
}

std::vector<std::size_t> tap_blocks(const BackboneConfig& cfg) {
  return {2, 3, cfg.n_blocks() - 1};
}

void register_encoder(ParameterStore& store, const EncoderConfig& cfg,
                      std::uint64_t seed) {
  cfg.validate();
  std::size_t in_ch = 1;
  for (std::size_t i = 0; i < cfg.backbone.n_blocks(); ++i) {
    const auto out_ch = static_cast<std::size_t>(cfg.backbone.channels[i]);
    const std::size_t fan_in = in_ch * 9, fan_out = out_ch * 9;
    Rng rng = parameter_rng(seed, block_name(i, "conv.w"));
    store.add(block_name(i, "conv.w"),
              xavier_uniform({out_ch, in_ch, 3, 3}, fan_in, fan_out, rng));
    store.add(block_name(i, "conv.b"), Tensor({out_ch}, 0.0));
    store.add(block_name(i, "bn.gamma"), Tensor({out_ch}, 1.0));
    store.add(block_name(i, "bn.beta"), Tensor({out_ch}, 0.0));
    store.add(block_name(i, "bn.mean"), Tensor({out_ch}, 0.0), false);
    store.add(block_name(i, "bn.var"), Tensor({out_ch}, 1.0), false);
    in_ch = out_ch;
  }
  const auto taps = tap_blocks(cfg.backbone);
  const auto d = static_cast<std::size_t>(cfg.head_dim);
  for (std::size_t j = 0; j < 3; ++j) {
    add_linear(store, "enc.head" + std::to_string(j + 1), d,
               static_cast<std::size_t>(cfg.backbone.channels[taps[j]]), seed);
  }
  add_linear(store, "enc.cls", static_cast<std::size_t>(cfg.n_keywords), 3 * d,
             seed);
}

BackboneOut backbone_forward(Binding& bind, const Var& x,
                             const BackboneConfig& cfg) {
  if (x.value().rank() != 4 || x.shape()[1] != 1 ||
      x.shape()[3] != static_cast<std::size_t>(cfg.n_mels)) {
    throw std::invalid_argument("backbone_forward: expected [B, 1, T, " +
                                std::to_string(cfg.n_mels) + "], got " +
                                shape_string(x.shape()));
  }
  std::size_t t = x.shape()[2];
  for (const auto& [pt, pf] : cfg.pools) t /= static_cast<std::size_t>(pt);
  if (t == 0) {
    throw std::invalid_argument("backbone_forward: input of " +
                                std::to_string(x.shape()[2]) +
                                " frames is too short for the pooling stack");
  }
  BackboneOut out;
  Var h = x;
  for (std::size_t i = 0; i < cfg.n_blocks(); ++i) {
    h = ops::conv2d(h, bind(block_name(i, "conv.w")), bind(block_name(i, "conv.b")));
    ops::BatchNormState st{&bind.store().get(block_name(i, "bn.mean")),
                           &bind.store().get(block_name(i, "bn.var"))};
    h = ops::batch_norm(h, bind(block_name(i, "bn.gamma")),
                        bind(block_name(i, "bn.beta")), st, bind.training());
    h = ops::relu(h);
    const auto [pt, pf] = cfg.pools[i];
    if (pt > 1 || pf > 1) {
      h = ops::avg_pool2d(h, static_cast<std::size_t>(pt), static_cast<std::size_t>(pf));
    }
    out.blocks.push_back(h);
  }
  return out;
}

HeadsOut hierarchy_heads(Binding& bind, const BackboneOut& blocks,
                         const BackboneConfig& cfg) {
  const auto taps = tap_blocks(cfg);
  if (blocks.blocks.size() <= taps.back()) {
    throw std::invalid_argument("hierarchy_heads: missing tapped block");
  }
  static constexpr std::size_t kSpatial[] = {2, 3};
  Var f[3];
  for (std::size_t j = 0; j < 3; ++j) {
    const Var pooled = ops::mean_axes(blocks.blocks[taps[j]], kSpatial);
    const std::string p = "enc.head" + std::to_string(j + 1);
    f[j] = ops::linear(pooled, bind(p + ".w"), bind(p + ".b"));
  }
  return {f[0], f[1], f[2]};
}

Var predict_keywords(Binding& bind, const HeadsOut& heads) {
  const Var parts[] = {heads.f1, heads.f2, heads.f3};
  return ops::sigmoid(
      ops::linear(ops::concat(parts), bind("enc.cls.w"), bind("enc.cls.b")));
}

EncoderOut encode(Binding& bind, const Var& x, const EncoderConfig& cfg) {
  EncoderOut out;
  out.backbone = backbone_forward(bind, x, cfg.backbone);
  out.heads = hierarchy_heads(bind, out.backbone, cfg.backbone);
  out.y_hat = predict_keywords(bind, out.heads);
  // [B, C, L, F] -> mean over F -> [B, C, L] -> [B, L, C]
  static constexpr std::size_t kFreq[] = {3};
  const Var last = ops::mean_axes(out.backbone.blocks.back(), kFreq);
  const std::size_t b = last.shape()[0];
  std::vector<Var> per_clip;
  for (std::size_t i = 0; i < b; ++i) {
    per_clip.push_back(ops::transpose(ops::select(last, i)));
  }
  out.sequence = ops::stack(per_clip);
  return out;
}

Tensor stack_features(const std::vector<const Tensor*>& frames) {
  if (frames.empty()) throw std::invalid_argument("stack_features: empty batch");
  const Shape s = frames.front()->shape();
  if (s.size() != 2) throw std::invalid_argument("stack_features: need [T x F]");
  Tensor out({frames.size(), 1, s[0], s[1]});
  std::size_t k = 0;
  for (const Tensor* f : frames) {
    if (f->shape() != s) {
      throw std::invalid_argument("stack_features: feature shapes differ: " +
                                  shape_string(s) + " vs " +
                                  shape_string(f->shape()));
    }
    for (double v : f->data()) out[k++] = v;
  }
  return out;
}

Var bce_loss(const Var& y_hat, const Tensor& targets, double eps) {
  return ops::binary_cross_entropy(y_hat, targets, eps);
}

std::vector<int> topk_keywords(std::span<const double> probs, std::size_t k) {
  if (k > probs.size()) {
    throw std::invalid_argument("topk_keywords: K=" + std::to_string(k) +
                                " exceeds N=" + std::to_string(probs.size()));
  }
  std::vector<int> idx(probs.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return probs[static_cast<std::size_t>(a)] > probs[static_cast<std::size_t>(b)];
  });
  idx.resize(k);
  return idx;
}

}  // namespace maac::enc
