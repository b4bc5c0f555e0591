// maac/io/framed_file.h
//
// Binary container shared by feature caches and checkpoints:
//   8-byte magic | u64 LE header length | JSON header (UTF-8)
//   | u64 LE value count | value count x float64 LE

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace maac::io {

struct FramedFile {
  nlohmann::json header;
  std::vector<double> values;
};

void write_framed(const std::filesystem::path& path, std::string_view magic,
                  const nlohmann::json& header, std::span<const double> values);
// Throws std::runtime_error on a wrong magic, truncation or trailing bytes.
FramedFile read_framed(const std::filesystem::path& path,
                       std::string_view magic);

std::string encode_framed(std::string_view magic, const nlohmann::json& header,
                          std::span<const double> values);
FramedFile decode_framed(std::string_view bytes, std::string_view magic,
                         const std::string& what);

}  // namespace maac::io
