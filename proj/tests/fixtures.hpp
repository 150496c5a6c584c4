#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace fixtures {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() / ("flamma_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

inline void put_be32(std::ofstream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                         static_cast<char>(v)};
  out.write(bytes, 4);
}

inline void write_idx_images(const std::filesystem::path& p, std::uint32_t magic, std::uint32_t count,
                             std::uint32_t rows, std::uint32_t cols, const std::vector<std::uint8_t>& pixels) {
  std::ofstream out(p, std::ios::binary);
  put_be32(out, magic);
  put_be32(out, count);
  put_be32(out, rows);
  put_be32(out, cols);
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

inline void write_idx_labels(const std::filesystem::path& p, std::uint32_t magic, std::uint32_t count,
                             const std::vector<std::uint8_t>& labels) {
  std::ofstream out(p, std::ios::binary);
  put_be32(out, magic);
  put_be32(out, count);
  out.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

}  // namespace fixtures
