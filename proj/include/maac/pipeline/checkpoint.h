// maac/pipeline/checkpoint.h
//
// Checkpoint = framed container (magic "MAACCKPT") whose JSON header holds
// the stage, epoch, model config and its hash, vocabulary, keyword table and
// the parameter manifest (name, shape, trainable); the body is every
// parameter's values in manifest order.

#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "maac/data/vocab.h"
#include "maac/keywords/keyword_table.h"
#include "maac/model/captioner.h"
#include "maac/numerics/graph.h"

namespace maac::pipeline {

struct CheckpointMeta {
  std::string stage;
  int epoch = 0;  // last finished epoch in the training log, -1 before training
  model::ModelConfig model;
  data::Vocab vocab;
  kw::KeywordTable keywords;
};

struct Checkpoint {
  CheckpointMeta meta;
  ParameterStore store;
};

// Encoder and decoder parameters for cfg, which must have its sizes bound.
ParameterStore init_model(const model::ModelConfig& cfg, std::uint64_t seed);

// Written to a temporary file and renamed, so a crash leaves no half file.
void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store,
                     const CheckpointMeta& meta);

// Throws std::runtime_error on truncation, a bad magic, a manifest that does
// not match the values or the model config, or a hash mismatch.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Rejects a checkpoint whose model config differs from `expected` (the
// message names the differing keys). Vocabulary and keyword sizes are taken
// from the checkpoint, so `expected` may leave them unbound.
void check_compatible(const CheckpointMeta& meta, const model::ModelConfig& expected,
                      const std::filesystem::path& path);

}  // namespace maac::pipeline
