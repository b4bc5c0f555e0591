// maac/pipeline/checkpoint.cc

#include "maac/pipeline/checkpoint.h"

#include <stdexcept>

#include "maac/io/framed_file.h"

namespace maac::pipeline {
namespace {

constexpr std::string_view kMagic = "MAACCKPT";

// Leaf paths ("decoder.H") whose values differ between two JSON objects.
void diff_keys(const nlohmann::json& a, const nlohmann::json& b, const std::string& prefix,
               std::vector<std::string>& out) {
  if (a.is_object() && b.is_object()) {
    for (const auto& [k, v] : a.items()) {
      const std::string path = prefix.empty() ? k : prefix + "." + k;
      if (!b.contains(k)) {
        out.push_back(path);
      } else {
        diff_keys(v, b.at(k), path, out);
      }
    }
    for (const auto& [k, v] : b.items()) {
      if (!a.contains(k)) out.push_back(prefix.empty() ? k : prefix + "." + k);
    }
  } else if (a != b) {
    out.push_back(prefix);
  }
}

}  // namespace

ParameterStore init_model(const model::ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ParameterStore store;
  enc::register_encoder(store, cfg.encoder, seed);
  dec::register_decoder(store, cfg.decoder, seed + 1);
  return store;
}

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store,
                     const CheckpointMeta& meta) {
  const nlohmann::json model = meta.model.to_json();
  nlohmann::json manifest = nlohmann::json::array();
  std::vector<double> values;
  for (const Parameter* p : store.all()) {
    manifest.push_back({{"name", p->name}, {"shape", p->value.shape()},
                        {"trainable", p->trainable}});
    values.insert(values.end(), p->value.data().begin(), p->value.data().end());
  }
  nlohmann::json keywords = {{"entries", meta.keywords.entries()},
                             {"frequencies", meta.keywords.frequencies()},
                             {"requested", meta.keywords.requested_size()}};
  const nlohmann::json header = {{"format", 1},
                                 {"stage", meta.stage},
                                 {"epoch", meta.epoch},
                                 {"model", model},
                                 {"config_hash", model::json_hash(model)},
                                 {"vocab", meta.vocab.to_json()},
                                 {"vocab_hash", meta.vocab.hash()},
                                 {"keywords", keywords},
                                 {"manifest", manifest}};
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  io::write_framed(tmp, kMagic, header, values);
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  io::FramedFile f = io::read_framed(path, kMagic);
  const auto& h = f.header;
  auto fail = [&](const std::string& why) -> void {
    throw std::runtime_error(path.string() + ": " + why);
  };
  Checkpoint ck;
  try {
    if (h.at("format").get<int>() != 1) fail("unsupported checkpoint format");
    ck.meta.stage = h.at("stage").get<std::string>();
    ck.meta.epoch = h.at("epoch").get<int>();
    const auto& model = h.at("model");
    if (model::json_hash(model) != h.at("config_hash").get<std::string>()) {
      fail("model config does not match its recorded hash");
    }
    ck.meta.model = model::ModelConfig::from_json(model);
    ck.meta.vocab = data::Vocab::from_json(h.at("vocab"));
    if (ck.meta.vocab.hash() != h.at("vocab_hash").get<std::string>()) {
      fail("vocabulary does not match its recorded hash");
    }
    const auto& kw = h.at("keywords");
    ck.meta.keywords = kw::KeywordTable(kw.at("entries").get<std::vector<std::string>>(),
                                        kw.at("frequencies").get<std::vector<std::uint64_t>>());
    ck.meta.keywords.set_requested_size(kw.at("requested").get<std::size_t>());
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("malformed header: ") + e.what());
  }

  // Shapes must be exactly those the recorded config registers.
  ParameterStore expected = init_model(ck.meta.model, 0);
  const auto& manifest = h.at("manifest");
  if (manifest.size() != expected.size()) {
    fail("manifest lists " + std::to_string(manifest.size()) + " parameters, the model has " +
         std::to_string(expected.size()));
  }
  std::size_t offset = 0;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const auto name = manifest[i].at("name").get<std::string>();
    const auto shape = manifest[i].at("shape").get<Shape>();
    const Parameter* want = expected.find(name);
    if (!want) fail("unexpected parameter " + name);
    if (want->value.shape() != shape) {
      fail("parameter " + name + " has shape " + shape_string(shape) + ", expected " +
           shape_string(want->value.shape()));
    }
    const std::size_t n = shape_size(shape);
    if (offset + n > f.values.size()) fail("value count is smaller than the manifest");
    std::vector<double> data(f.values.begin() + static_cast<std::ptrdiff_t>(offset),
                             f.values.begin() + static_cast<std::ptrdiff_t>(offset + n));
    offset += n;
    ck.store.add(name, Tensor(shape, std::move(data)),
                 manifest[i].at("trainable").get<bool>());
  }
  if (offset != f.values.size()) fail("value count is larger than the manifest");
  return ck;
}

void check_compatible(const CheckpointMeta& meta, const model::ModelConfig& expected,
                      const std::filesystem::path& path) {
  model::ModelConfig want = expected;
  want.bind_sizes(meta.keywords.size(), meta.vocab.size());
  const nlohmann::json a = meta.model.to_json();
  const nlohmann::json b = want.to_json();
  if (model::json_hash(a) == model::json_hash(b)) return;
  std::vector<std::string> keys;
  diff_keys(a, b, "", keys);
  std::string list;
  for (const auto& k : keys) list += (list.empty() ? "" : ", ") + k;
  throw std::runtime_error(path.string() + ": checkpoint model config (hash " +
                           model::json_hash(a) + ") differs from the requested one (hash " +
                           model::json_hash(b) + ") in: " + list);
}

}  // namespace maac::pipeline
