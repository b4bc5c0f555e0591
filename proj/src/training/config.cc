// maac/training/config.cc

#include "maac/training/config.h"

#include <cmath>
#include <stdexcept>

namespace maac::train {

std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::kEncoderHeads: return "encoder_heads";
    case Stage::kEncoderFinetune: return "encoder_finetune";
    case Stage::kCaptionerCe: return "ce";
    case Stage::kRl: return "rl";
  }
  return "?";
}

Stage parse_stage(std::string_view name) {
  for (Stage s : {Stage::kEncoderHeads, Stage::kEncoderFinetune, Stage::kCaptionerCe,
                  Stage::kRl}) {
    if (stage_name(s) == name) return s;
  }
  throw std::invalid_argument("unknown training stage '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw std::invalid_argument("train: batch_size must be >= 1");
  for (double lr : {lr_encoder_heads, lr_encoder_finetune, lr_ce, lr_rl, lr_decay}) {
    if (!(lr > 0)) throw std::invalid_argument("train: learning rates must be > 0");
  }
  if (!(label_smoothing >= 0 && label_smoothing < 1)) {
    throw std::invalid_argument("train: label_smoothing must lie in [0, 1)");
  }
  if (teacher_forcing_prob < 0 || teacher_forcing_prob > 1 || teacher_forcing_min < 0 ||
      teacher_forcing_min > 1 || teacher_forcing_decay <= 0) {
    throw std::invalid_argument("train: bad teacher forcing schedule");
  }
  if (epochs_encoder_heads < 0 || epochs_encoder_finetune < 0 || epochs_ce < 0 ||
      epochs_rl < 0) {
    throw std::invalid_argument("train: epoch counts must be >= 0");
  }
  if (!(grad_clip > 0)) throw std::invalid_argument("train: grad_clip must be > 0");
  if (!(mixup_alpha > 0)) throw std::invalid_argument("train: mixup_alpha must be > 0");
  if (ce_captions_per_clip == 0 || max_len == 0) {
    throw std::invalid_argument("train: ce_captions_per_clip and max_len must be >= 1");
  }
}

double TrainConfig::lr_init(Stage s) const {
  switch (s) {
    case Stage::kEncoderHeads: return lr_encoder_heads;
    case Stage::kEncoderFinetune: return lr_encoder_finetune;
    case Stage::kCaptionerCe: return lr_ce;
    case Stage::kRl: return lr_rl;
  }
  throw std::invalid_argument("unknown stage");
}

int TrainConfig::epochs(Stage s) const {
  switch (s) {
    case Stage::kEncoderHeads: return epochs_encoder_heads;
    case Stage::kEncoderFinetune: return epochs_encoder_finetune;
    case Stage::kCaptionerCe: return epochs_ce;
    case Stage::kRl: return epochs_rl;
  }
  throw std::invalid_argument("unknown stage");
}

double TrainConfig::teacher_forcing_at(int epoch) const {
  return std::max(teacher_forcing_min,
                  teacher_forcing_prob * std::pow(teacher_forcing_decay, epoch));
}

nlohmann::json TrainConfig::to_json() const {
  return {{"batch_size", batch_size},
          {"adam_beta1", adam.beta1},
          {"adam_beta2", adam.beta2},
          {"adam_eps", adam.eps},
          {"lr_encoder_heads", lr_encoder_heads},
          {"lr_encoder_finetune", lr_encoder_finetune},
          {"lr_ce", lr_ce},
          {"lr_rl", lr_rl},
          {"lr_decay", lr_decay},
          {"epochs_encoder_heads", epochs_encoder_heads},
          {"epochs_encoder_finetune", epochs_encoder_finetune},
          {"epochs_ce", epochs_ce},
          {"epochs_rl", epochs_rl},
          {"label_smoothing", label_smoothing},
          {"teacher_forcing_prob", teacher_forcing_prob},
          {"teacher_forcing_decay", teacher_forcing_decay},
          {"teacher_forcing_min", teacher_forcing_min},
          {"grad_clip", grad_clip},
          {"mixup", mixup},
          {"mixup_alpha", mixup_alpha},
          {"spec_augment", spec_augment},
          {"ce_captions_per_clip", ce_captions_per_clip},
          {"freeze_encoder_rl", freeze_encoder_rl},
          {"max_len", max_len},
          {"seed", seed}};
}

double lr_at(const TrainConfig& cfg, Stage stage, int epoch) {
  if (epoch < 0) throw std::invalid_argument("lr_at: epoch must be >= 0");
  return cfg.lr_init(stage) * std::pow(cfg.lr_decay, epoch);
}

double lr_at(const TrainConfig& cfg, std::string_view stage, int epoch) {
  return lr_at(cfg, parse_stage(stage), epoch);
}

void TrainLog::append(EpochRecord r) {
  if (!records_.empty() && r.epoch <= records_.back().epoch) {
    throw std::logic_error("TrainLog: epoch " + std::to_string(r.epoch) +
                           " after " + std::to_string(records_.back().epoch));
  }
  records_.push_back(std::move(r));
}

void TrainLog::write_jsonl(std::ostream& out, bool include_time) const {
  for (const auto& r : records_) {
    nlohmann::json j = {{"stage", r.stage},
                        {"epoch", r.epoch},
                        {"loss", r.loss},
                        {"lr", r.lr},
                        {"metrics", r.metrics}};
    if (include_time) j["wall_seconds"] = r.wall_seconds;
    out << j.dump() << '\n';
  }
}

}  // namespace maac::train
