// maac/training/config.h
//
// Hyper-parameters of the three training stages, the per-epoch learning-rate
// schedule and the JSON-lines training log.

#pragma once

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "maac/audio/augment.h"
#include "maac/training/optim.h"

namespace maac::train {

enum class Stage {
  kEncoderHeads,     // backbone frozen
  kEncoderFinetune,  // everything trainable
  kCaptionerCe,
  kRl,
};

std::string_view stage_name(Stage s);
// Accepts the names returned by stage_name; throws std::invalid_argument
// otherwise.
Stage parse_stage(std::string_view name);

struct TrainConfig {
  std::size_t batch_size = 32;
  AdamConfig adam;
  double lr_encoder_heads = 1e-3;
  double lr_encoder_finetune = 5e-4;
  double lr_ce = 3e-4;
  double lr_rl = 5e-5;
  double lr_decay = 0.98;
  int epochs_encoder_heads = 80;
  int epochs_encoder_finetune = 25;
  int epochs_ce = 30;
  int epochs_rl = 55;
  double label_smoothing = 0.1;
  // Probability of feeding the gold token; decays per epoch by
  // teacher_forcing_decay down to teacher_forcing_min.
  double teacher_forcing_prob = 1.0;
  double teacher_forcing_decay = 1.0;
  double teacher_forcing_min = 0.0;
  double grad_clip = 5.0;
  bool mixup = true;
  double mixup_alpha = 1.0;
  bool spec_augment = true;
  audio::SpecAugmentConfig spec_augment_cfg;
  // Captions per clip used as CE targets (the first n in file order).
  std::size_t ce_captions_per_clip = 5;
  bool freeze_encoder_rl = true;
  std::size_t max_len = 30;
  std::uint64_t seed = 0;

  void validate() const;
  double lr_init(Stage s) const;
  int epochs(Stage s) const;
  double teacher_forcing_at(int epoch) const;
  nlohmann::json to_json() const;
};

// lr_init(stage) * lr_decay^epoch, with epoch counted from the start of the
// stage.
double lr_at(const TrainConfig& cfg, Stage stage, int epoch);
double lr_at(const TrainConfig& cfg, std::string_view stage, int epoch);

struct EpochRecord {
  std::string stage;
  int epoch = 0;  // global across the stages of one log
  double loss = 0.0;
  double lr = 0.0;
  nlohmann::json metrics = nlohmann::json::object();
  double wall_seconds = 0.0;
};

class TrainLog {
 public:
  // Throws std::logic_error unless epochs strictly increase.
  void append(EpochRecord r);
  const std::vector<EpochRecord>& records() const { return records_; }
  bool empty() const { return records_.empty(); }
  const EpochRecord& back() const { return records_.back(); }
  int next_epoch() const { return records_.empty() ? 0 : records_.back().epoch + 1; }

  // One JSON object per line; wall time is omitted when include_time is
  // false so logs of identical runs compare equal.
  void write_jsonl(std::ostream& out, bool include_time = true) const;

 private:
  std::vector<EpochRecord> records_;
};

}  // namespace maac::train
