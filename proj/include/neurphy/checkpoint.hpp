#pragma once

// Binary checkpoint: "NPHY", u32 format version, u64 length + run config as
// JSON text, u32 parameter count, then per parameter u32 name length + name,
// u32 rank + u64 dims, little-endian f64 payload; a trailing CRC32 covers
// every preceding byte. All integers are little-endian.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "neurphy/config.hpp"
#include "neurphy/model.hpp"

namespace neurphy {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  RunConfig config;
  NeurPhyModel model;
};

std::string checkpoint_bytes(const NeurPhyModel& model, const RunConfig& cfg);
/// Throws kCorrupt on bad magic, truncation, checksum or layout mismatch and
/// kFormatVersionMismatch on an unknown version.
Checkpoint checkpoint_from_bytes(std::string_view bytes);

void checkpoint_save(const NeurPhyModel& model, const RunConfig& cfg, const std::filesystem::path& path);
Checkpoint checkpoint_load(const std::filesystem::path& path);

}  // namespace neurphy
