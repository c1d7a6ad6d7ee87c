#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nogap/tensor.hpp"

namespace nogap::io {

inline constexpr std::string_view kDatasetMagic = "NGPD";
inline constexpr std::string_view kCheckpointMagic = "NGPC";
inline constexpr std::uint32_t kFormatVersion = 1;

/// Binary container shared by dataset and checkpoint files.
///
/// Layout (all integers little-endian):
///   magic[4] | u32 version
///   u32 n_meta   { u32 len, key bytes, u32 len, value bytes }*
///   u32 n_tensor { u32 len, name bytes, u32 rank, u64 dims[rank], f64 payload }*
///   u32 crc32 of every preceding byte
struct Container {
  std::string magic;
  std::uint32_t version = kFormatVersion;
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<std::pair<std::string, Tensor>> tensors;

  void set_meta(const std::string& key, std::string value);
  std::optional<std::string> find_meta(std::string_view key) const;
  /// Throws FormatError when the key is absent.
  const std::string& meta(std::string_view key) const;

  void add_tensor(std::string name, Tensor value);
  const Tensor* find_tensor(std::string_view name) const;
  /// Throws FormatError when the tensor is absent.
  const Tensor& tensor(std::string_view name) const;
};

std::vector<std::uint8_t> encode(const Container& c);

/// Throws FormatError on bad magic, unsupported version, truncation or a
/// checksum mismatch. Never returns a partially decoded container.
Container decode(std::span<const std::uint8_t> bytes, std::string_view expected_magic);

/// Writes to a temporary sibling and renames it into place.
void write_file(const std::filesystem::path& path, const Container& c);
Container read_file(const std::filesystem::path& path, std::string_view expected_magic);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

/// Git blob hash: hex SHA-1 of "blob <len>\0" followed by the bytes.
std::string content_hash(std::span<const std::uint8_t> bytes);
std::string file_content_hash(const std::filesystem::path& path);

}  // namespace nogap::io
