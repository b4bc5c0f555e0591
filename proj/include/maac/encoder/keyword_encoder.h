// maac/encoder/keyword_encoder.h
//
// Convolutional keyword encoder. Each backbone block is
// conv3x3 -> batch norm -> ReLU -> average pool. Three heads tap blocks 3, 4
// and the last block through global average pooling and a linear layer; the
// keyword classifier is sigmoid(Linear(concat(f1, f2, f3))).
//
// Parameter names:
//   enc.backbone.b<i>.{conv.w, conv.b, bn.gamma, bn.beta, bn.mean, bn.var}
//   enc.head<j>.{w, b}     j = 1..3
//   enc.cls.{w, b}

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "maac/numerics/graph.h"

namespace maac::enc {

struct BackboneConfig {
  int n_mels = 64;
  std::vector<int> channels = {64, 128, 256, 512, 1024, 2048};
  // (time, frequency) pool per block; {1, 1} disables pooling.
  std::vector<std::pair<int, int>> pools = {{2, 2}, {2, 2}, {2, 2},
                                            {2, 2}, {2, 2}, {1, 1}};

  std::size_t n_blocks() const { return channels.size(); }
  void validate() const;
  static BackboneConfig tiny(int n_mels = 32);
};

struct EncoderConfig {
  BackboneConfig backbone;
  int head_dim = 512;
  int n_keywords = 300;

  void validate() const;
  nlohmann::json to_json() const;
  static EncoderConfig from_json(const nlohmann::json& j);
};

// Block indices (0-based) tapped by the three heads.
std::vector<std::size_t> tap_blocks(const BackboneConfig& cfg);

void register_encoder(ParameterStore& store, const EncoderConfig& cfg,
                      std::uint64_t seed);

struct BackboneOut {
  std::vector<Var> blocks;  // [B, C_i, T_i, F_i]
};

// x: [B, 1, T, n_mels].
BackboneOut backbone_forward(Binding& bind, const Var& x,
                             const BackboneConfig& cfg);

struct HeadsOut {
  Var f1, f2, f3;  // [B, head_dim]
};
HeadsOut hierarchy_heads(Binding& bind, const BackboneOut& blocks,
                         const BackboneConfig& cfg);

// [B, N] probabilities.
Var predict_keywords(Binding& bind, const HeadsOut& heads);

struct EncoderOut {
  BackboneOut backbone;
  HeadsOut heads;
  Var y_hat;
  // Last block, frequency-mean pooled, time-major: [B, L, C_last].
  Var sequence;
};

EncoderOut encode(Binding& bind, const Var& x, const EncoderConfig& cfg);

// Batch input [B, 1, T, F] from [T x F] feature matrices of equal shape.
Tensor stack_features(const std::vector<const Tensor*>& frames);

// Full two-sided BCE, mean over all entries; targets may be soft.
Var bce_loss(const Var& y_hat, const Tensor& targets, double eps = 1e-7);

// Indices of the k largest values, descending; ties go to the lower index.
std::vector<int> topk_keywords(std::span<const double> probs, std::size_t k);

}  // namespace maac::enc
