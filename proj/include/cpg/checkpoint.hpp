#pragma once

// Binary checkpoint, little-endian throughout:
//
//   "CPG1" | u32 version | payload | u32 CRC-32 of everything before it
//
// payload:
//   u64 seed, u64 n0
//   growth policy: f64 increment_fraction, f64 max_expansion, u32 max_retries,
//                  u8 reset_on_grow, f32 noise
//   u32 layer count, per layer: u8 kind, u8 has_bias, u32 in_width, u32 out_width
//   u64 param count
//   per parameterised layer: u32 weight indices (row-major), u32 bias indices
//   f32 params, u16 owner tags
//   u16 committed tasks, u32 record count, per record:
//     u16 id, u8 best_effort, u8 goal source, f64 goal, f64 achieved,
//     u64 owned count, u32 growth events, u32 class count, i32 classes,
//     u32 head in_width, u32 head classes, f32 head params,
//     u64 mask bits, packed mask bytes (bit i -> byte i/8, bit i%8)

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cpg/controller.hpp"

namespace cpg {

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(const CpgState& state);
CpgState deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const CpgState& state, const std::filesystem::path& path);
CpgState load_checkpoint(const std::filesystem::path& path);

/// Little-endian bit packing, bit i stored in byte i/8 at position i%8.
std::vector<std::uint8_t> pack_bits(std::span<const std::uint8_t> bits);
std::vector<std::uint8_t> unpack_bits(std::span<const std::uint8_t> bytes, std::size_t n_bits);

/// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace cpg
