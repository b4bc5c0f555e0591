// maac/training/trainers.h
//
// Encoder pretraining (heads first, then everything), cross-entropy
// captioner training on a frozen encoder and self-critical RL fine-tuning
// with a CIDEr-D reward. Every procedure is a pure function of its inputs
// and cfg.seed.

#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "maac/data/vocab.h"
#include "maac/decoder/decoder.h"
#include "maac/encoder/keyword_encoder.h"
#include "maac/metrics/metrics.h"
#include "maac/training/config.h"

namespace maac::train {

using Progress = std::function<void(const EpochRecord&)>;

struct EncoderExample {
  std::string clip_id;
  Tensor frames;  // [T x n_mels]
  Tensor target;  // [N] multi-hot
};

// Shorter clips in a batch are padded with their own mean up to the longest.
Tensor pad_frames(const Tensor& frames, std::size_t n_frames);

void train_encoder(ParameterStore& store, const enc::EncoderConfig& cfg,
                   std::span<const EncoderExample> data, const TrainConfig& tc,
                   TrainLog& log, const Progress& progress = {});

struct EncoderEval {
  double bce = 0.0;  // eval mode, no augmentation
  std::vector<std::vector<double>> probs;
};
EncoderEval evaluate_encoder(ParameterStore& store, const enc::EncoderConfig& cfg,
                             std::span<const EncoderExample> data);

// |top-K ∩ planted| / min(K, |planted|), averaged over clips.
double planted_recall(const std::vector<std::vector<double>>& probs,
                      const std::vector<std::vector<int>>& planted, std::size_t k);

struct CaptionExample {
  std::string clip_id;
  Tensor sequence;                      // encoder output [L x C_last]
  std::vector<int> keyword_ids;         // vocabulary ids of the top-K keywords
  std::vector<std::vector<int>> captions;  // word ids, no BOS/EOS
  std::vector<metrics::Tokens> references;
};

// Teacher-forced CE loss of one caption. P and w_{t-1} take the gold token
// with probability tf_prob, otherwise the model's own argmax. `fed`, when
// given, receives the tokens appended to P.
Var caption_ce_loss(Binding& bind, const dec::DecoderConfig& cfg,
                    const dec::DecoderContext& ctx, std::span<const int> caption,
                    double eps, double tf_prob, Rng& rng,
                    std::vector<int>* fed = nullptr);

void train_captioner_ce(ParameterStore& store, const dec::DecoderConfig& cfg,
                        std::span<const CaptionExample> data, const TrainConfig& tc,
                        TrainLog& log, const Progress& progress = {});

struct TeacherForcedEval {
  double accuracy = 0.0;  // masked argmax == target, EOS steps included
  double loss = 0.0;      // unsmoothed
};
TeacherForcedEval teacher_forced_eval(ParameterStore& store, const dec::DecoderConfig& cfg,
                                      std::span<const CaptionExample> data,
                                      std::size_t captions_per_clip);

std::vector<std::vector<int>> greedy_captions(ParameterStore& store,
                                              const dec::DecoderConfig& cfg,
                                              std::span<const CaptionExample> data,
                                              std::size_t max_len);

using RewardFn = std::function<double(const std::vector<int>&)>;

struct ScstStep {
  std::vector<int> sampled;  // without EOS
  std::vector<int> greedy;
  double r_sample = 0.0;
  double r_greedy = 0.0;
  Var loss;  // undefined when the advantage is zero
};

// One clip: a multinomial sample and a greedy baseline, both in eval mode.
// sequence may be a graph value when the encoder is trained too.
ScstStep scst_clip(Binding& bind, const dec::DecoderConfig& cfg, const Var& sequence,
                   std::span<const int> keyword_ids, const RewardFn& reward, Rng& rng,
                   std::size_t max_len);

// Sum of masked log-probabilities of a fixed token sequence (EOS appended
// unless the sequence already hit max_len).
Var sequence_log_prob(Binding& bind, const dec::DecoderConfig& cfg,
                      const dec::DecoderContext& ctx, std::span<const int> tokens,
                      bool append_eos);

struct RlEncoder {
  // Needed only when the encoder is trained during RL.
  const enc::EncoderConfig* cfg = nullptr;
  std::span<const Tensor> frames;
  std::span<const int> keyword_vocab;
};

void scst_finetune(ParameterStore& store, const dec::DecoderConfig& cfg,
                   std::span<const CaptionExample> data, const data::Vocab& vocab,
                   const TrainConfig& tc, TrainLog& log, const RlEncoder& encoder = {},
                   const Progress& progress = {});

// Corpus CIDEr-D of greedy captions against the references.
double greedy_cider(ParameterStore& store, const dec::DecoderConfig& cfg,
                    std::span<const CaptionExample> data, const data::Vocab& vocab,
                    std::size_t max_len);

}  // namespace maac::train
