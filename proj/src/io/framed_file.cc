// maac/io/framed_file.cc

#include "maac/io/framed_file.h"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace maac::io {
namespace {

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(std::string_view in, std::size_t pos) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + static_cast<std::size_t>(i)]))
         << (8 * i);
  }
  return v;
}

}  // namespace

std::string encode_framed(std::string_view magic, const nlohmann::json& header,
                          std::span<const double> values) {
  if (magic.size() != 8) throw std::invalid_argument("framed magic must be 8 bytes");
  const std::string head = header.dump();
  std::string out;
  out.reserve(8 + 8 + head.size() + 8 + 8 * values.size());
  out.append(magic);
  put_u64(out, head.size());
  out.append(head);
  put_u64(out, values.size());
  for (double v : values) put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

FramedFile decode_framed(std::string_view bytes, std::string_view magic,
                         const std::string& what) {
  auto fail = [&](const std::string& why) {
    throw std::runtime_error(what + ": " + why);
  };
  if (bytes.size() < 16 || bytes.substr(0, 8) != magic) fail("bad magic");
  const std::uint64_t head_len = get_u64(bytes, 8);
  if (head_len > bytes.size() - 16) fail("truncated header");
  FramedFile f;
  try {
    f.header = nlohmann::json::parse(bytes.substr(16, head_len));
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("header is not valid JSON: ") + e.what());
  }
  std::size_t pos = 16 + head_len;
  if (bytes.size() < pos + 8) fail("truncated value count");
  const std::uint64_t count = get_u64(bytes, pos);
  pos += 8;
  if ((bytes.size() - pos) / 8 < count) fail("truncated body");
  if (bytes.size() - pos != 8 * count) fail("trailing bytes after body");
  f.values.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    f.values[i] = std::bit_cast<double>(get_u64(bytes, pos + 8 * i));
  }
  return f;
}

void write_framed(const std::filesystem::path& path, std::string_view magic,
                  const nlohmann::json& header, std::span<const double> values) {
  const std::string bytes = encode_framed(magic, header, values);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

FramedFile read_framed(const std::filesystem::path& path,
                       std::string_view magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return decode_framed(bytes, magic, path.string());
}

}  // namespace maac::io
