#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace latentbo::io {

static_assert(std::endian::native == std::endian::little,
              "blob payloads are little-endian; big-endian hosts are unsupported");

// Container format shared by checkpoints and datasets:
//   8-byte magic "LBOBIN1\n"
//   uint64 little-endian header length
//   UTF-8 JSON header
//   raw payload bytes (little-endian float64 / packed integers)
constexpr char kBlobMagic[8] = {'L', 'B', 'O', 'B', 'I', 'N', '1', '\n'};

struct Blob {
  nlohmann::json header;
  std::vector<std::uint8_t> payload;
};

// Atomic write: temp file in the same directory, then rename.
inline void write_file_atomic(const std::string& path, const std::string& bytes) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, target);
}

inline void write_blob(const std::string& path, const Blob& blob) {
  const std::string header = blob.header.dump();
  std::string bytes;
  bytes.reserve(16 + header.size() + blob.payload.size());
  bytes.append(kBlobMagic, 8);
  std::uint64_t len = header.size();
  char lenbuf[8];
  std::memcpy(lenbuf, &len, 8);
  bytes.append(lenbuf, 8);
  bytes.append(header);
  bytes.append(reinterpret_cast<const char*>(blob.payload.data()), blob.payload.size());
  write_file_atomic(path, bytes);
}

inline Blob read_blob(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kBlobMagic, 8) != 0)
    throw std::runtime_error("not a latentbo blob: " + path);
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), 8);
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("truncated blob header: " + path);
  Blob blob;
  blob.header = nlohmann::json::parse(header);
  std::vector<std::uint8_t> payload((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
  blob.payload = std::move(payload);
  return blob;
}

inline void append_f64(std::vector<std::uint8_t>& payload, const double* data, std::size_t count) {
  const std::size_t offset = payload.size();
  payload.resize(offset + count * sizeof(double));
  std::memcpy(payload.data() + offset, data, count * sizeof(double));
}

inline void read_f64(const std::vector<std::uint8_t>& payload, std::size_t& cursor, double* out,
                     std::size_t count) {
  if (cursor + count * sizeof(double) > payload.size())
    throw std::runtime_error("blob payload truncated");
  std::memcpy(out, payload.data() + cursor, count * sizeof(double));
  cursor += count * sizeof(double);
}

}  // namespace latentbo::io
