// maac/data/corpus.h
//
// Clotho-style caption tables: a header with file_name and caption_1..5
// columns, one clip per row.

#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "maac/data/vocab.h"
#include "maac/keywords/text.h"

namespace maac::data {

struct ClipEntry {
  std::string clip_id;  // the file_name column
  std::vector<kw::Caption> captions;
  std::size_t line = 0;
};

struct RejectedRow {
  std::size_t line = 0;
  std::string clip_id;
  std::string reason;
};

struct CaptionTable {
  std::vector<ClipEntry> clips;
  // Rows without a usable caption; they are left out of clips.
  std::vector<RejectedRow> rejected;

  std::vector<kw::Caption> all_captions() const;
  const ClipEntry* find(const std::string& clip_id) const;
};

// Empty caption cells are skipped. Header problems, ragged rows and
// duplicate clip ids raise std::runtime_error with the line number.
CaptionTable read_captions_csv(std::istream& in);
CaptionTable read_captions_csv(const std::filesystem::path& path);
void write_captions_csv(std::ostream& out, const CaptionTable& table);

enum class DataKind { kAudio, kFeatures };

// Where a clip's data lives: <dir>/<file_name> for audio,
// <dir>/<stem>.feat for cached features.
std::filesystem::path clip_data_path(const std::filesystem::path& dir,
                                     const std::string& clip_id, DataKind kind);

struct CaptionCorpus {
  CaptionTable table;
  std::filesystem::path data_dir;
  DataKind kind = DataKind::kAudio;
  Vocab vocab;
};

// Loads the table, checks every clip has its audio/feature file (the error
// lists all missing rows) and builds the vocabulary from these captions plus
// `extra_words`.
CaptionCorpus load_corpus_csv(const std::filesystem::path& captions_csv,
                              const std::filesystem::path& data_dir, DataKind kind,
                              std::span<const std::string> extra_words = {});

// Hypotheses: header "file_name,caption" (or "clip_id,caption").
std::map<std::string, std::string> read_hypotheses_csv(std::istream& in);
void write_hypotheses_csv(std::ostream& out,
                          const std::vector<std::pair<std::string, std::string>>& rows);

}  // namespace maac::data
