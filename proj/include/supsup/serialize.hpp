#pragma once

// Binary formats, all little-endian.
//
// Mask ("SSUP" v1): u16 layer count, then per layer u32 rows, u32 cols,
// u64 nnz, (cols + 1) x u64 column pointers, nnz x u16 row indices (CSC of
// the ones, row indices ascending within a column).
//
// Snapshot ("SSNP" v1): net config, mask count, masks in the mask format
// (each prefixed by its u64 byte length), then u8 has_hopfield and, when set,
// an "SSHP" block with u64 d, u64 count, d*d f64 Psi and d f64 mean.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "supsup/hopfield.hpp"
#include "supsup/mask.hpp"
#include "supsup/net.hpp"

namespace supsup {

inline constexpr std::uint8_t kFormatVersion = 1;

/// Throws FormatError when a layer has more than 65535 rows.
std::vector<std::uint8_t> serialize_mask(const Supermask& mask);
/// Throws FormatError on bad magic, version, truncation or inconsistent CSC data.
Supermask deserialize_mask(std::span<const std::uint8_t> bytes);
/// Exact serialized size, computed without serializing.
std::size_t serialized_mask_size(const Supermask& mask);

struct Snapshot {
  NetConfig config;
  std::vector<Supermask> masks;
  std::optional<HopfieldStore> hopfield;
};

std::vector<std::uint8_t> serialize_snapshot(const Snapshot& snap);
Snapshot deserialize_snapshot(std::span<const std::uint8_t> bytes);

/// Bytes needed to reproduce a bank: every serialized mask plus the 8-byte
/// network seed (the weights are regenerated from it).
std::size_t bank_storage_bytes(std::span<const Supermask> masks);

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
/// Throws DataError when the file cannot be read.
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

}  // namespace supsup
