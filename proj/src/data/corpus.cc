// maac/data/corpus.cc

#include "maac/data/corpus.h"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "maac/data/csv.h"

namespace maac::data {
namespace {

std::string line_prefix(std::size_t line) { return "line " + std::to_string(line) + ": "; }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<kw::Caption> CaptionTable::all_captions() const {
  std::vector<kw::Caption> out;
  for (const auto& c : clips) out.insert(out.end(), c.captions.begin(), c.captions.end());
  return out;
}

const ClipEntry* CaptionTable::find(const std::string& clip_id) const {
  for (const auto& c : clips) {
    if (c.clip_id == clip_id) return &c;
  }
  return nullptr;
}

CaptionTable read_captions_csv(std::istream& in) {
  const std::vector<CsvRow> rows = read_csv(in);
  if (rows.empty()) throw std::runtime_error("captions CSV is empty");
  const auto& header = rows.front().fields;
  int name_col = -1;
  std::vector<std::size_t> caption_cols;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string h = trim(header[i]);
    if (h == "file_name") name_col = static_cast<int>(i);
    if (h.rfind("caption", 0) == 0) caption_cols.push_back(i);
  }
  if (name_col < 0 || caption_cols.empty()) {
    throw std::runtime_error(line_prefix(rows.front().line) +
                             "header needs file_name and at least one caption column");
  }
  CaptionTable table;
  std::set<std::string> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const CsvRow& row = rows[r];
    if (row.fields.size() != header.size()) {
      throw std::runtime_error(line_prefix(row.line) + "expected " +
                               std::to_string(header.size()) + " fields, found " +
                               std::to_string(row.fields.size()));
    }
    ClipEntry clip;
    clip.clip_id = trim(row.fields[static_cast<std::size_t>(name_col)]);
    clip.line = row.line;
    if (clip.clip_id.empty()) {
      throw std::runtime_error(line_prefix(row.line) + "empty file_name");
    }
    if (!seen.insert(clip.clip_id).second) {
      throw std::runtime_error(line_prefix(row.line) + "duplicate clip " + clip.clip_id);
    }
    for (std::size_t col : caption_cols) {
      const std::string& text = row.fields[col];
      try {
        clip.captions.push_back(kw::tokenize_caption(text, clip.clip_id));
      } catch (const std::invalid_argument&) {
        // blank or punctuation-only cell
      }
    }
    if (clip.captions.empty()) {
      table.rejected.push_back({row.line, clip.clip_id, "no non-empty caption"});
      continue;
    }
    table.clips.push_back(std::move(clip));
  }
  return table;
}

CaptionTable read_captions_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return read_captions_csv(in);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void write_captions_csv(std::ostream& out, const CaptionTable& table) {
  std::size_t n = 1;
  for (const auto& c : table.clips) n = std::max(n, c.captions.size());
  std::vector<std::string> header = {"file_name"};
  for (std::size_t i = 1; i <= n; ++i) header.push_back("caption_" + std::to_string(i));
  write_csv_row(out, header);
  for (const auto& c : table.clips) {
    std::vector<std::string> row = {c.clip_id};
    for (std::size_t i = 0; i < n; ++i) {
      row.push_back(i < c.captions.size() ? kw::join_tokens(c.captions[i].tokens) : "");
    }
    write_csv_row(out, row);
  }
}

std::filesystem::path clip_data_path(const std::filesystem::path& dir,
                                     const std::string& clip_id, DataKind kind) {
  if (kind == DataKind::kAudio) return dir / clip_id;
  return dir / (std::filesystem::path(clip_id).stem().string() + ".feat");
}

CaptionCorpus load_corpus_csv(const std::filesystem::path& captions_csv,
                              const std::filesystem::path& data_dir, DataKind kind,
                              std::span<const std::string> extra_words) {
  CaptionCorpus corpus;
  corpus.table = read_captions_csv(captions_csv);
  corpus.data_dir = data_dir;
  corpus.kind = kind;
  std::ostringstream missing;
  std::size_t n_missing = 0;
  for (const auto& c : corpus.table.clips) {
    const auto p = clip_data_path(data_dir, c.clip_id, kind);
    if (!std::filesystem::exists(p)) {
      ++n_missing;
      missing << "\n  line " << c.line << ": " << c.clip_id << " -> " << p.string();
    }
  }
  if (n_missing) {
    throw std::runtime_error(std::to_string(n_missing) + " clip(s) in " +
                             captions_csv.string() + " have no " +
                             (kind == DataKind::kAudio ? "audio" : "feature") +
                             " file:" + missing.str());
  }
  const auto caps = corpus.table.all_captions();
  corpus.vocab = Vocab::build(caps, extra_words);
  return corpus;
}

std::map<std::string, std::string> read_hypotheses_csv(std::istream& in) {
  const std::vector<CsvRow> rows = read_csv(in);
  if (rows.empty()) throw std::runtime_error("hypotheses CSV is empty");
  const auto& h = rows.front().fields;
  if (h.size() != 2 || (trim(h[0]) != "file_name" && trim(h[0]) != "clip_id") ||
      trim(h[1]) != "caption") {
    throw std::runtime_error(line_prefix(rows.front().line) +
                             "expected header file_name,caption");
  }
  std::map<std::string, std::string> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].fields.size() != 2) {
      throw std::runtime_error(line_prefix(rows[r].line) + "expected 2 fields");
    }
    if (!out.emplace(trim(rows[r].fields[0]), rows[r].fields[1]).second) {
      throw std::runtime_error(line_prefix(rows[r].line) + "duplicate clip " +
                               rows[r].fields[0]);
    }
  }
  return out;
}

void write_hypotheses_csv(std::ostream& out,
                          const std::vector<std::pair<std::string, std::string>>& rows) {
  write_csv_row(out, {"file_name", "caption"});
  for (const auto& [id, cap] : rows) write_csv_row(out, {id, cap});
}

}  // namespace maac::data
