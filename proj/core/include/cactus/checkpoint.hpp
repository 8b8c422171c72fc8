#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "cactus/curriculum.hpp"
#include "cactus/learner.hpp"

namespace cactus {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  int epoch = 0;
  std::uint64_t seed = 0;
  CurriculumState curriculum;
};

// Binary container: 8-byte magic, u32 version, u32 header length, a JSON
// header describing every block, then the blocks as little-endian float32
// arrays in row-major order. A `<path>.manifest` text sidecar is written next
// to it.
void save_checkpoint(const std::filesystem::path& path, const ModelBundle& models,
                     const CheckpointMeta& meta);

struct LoadedCheckpoint {
  ModelBundle models;
  CheckpointMeta meta;
};

// Throws FormatError on a malformed file or inconsistent block shapes.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

std::filesystem::path manifest_path(const std::filesystem::path& checkpoint);

}  // namespace cactus
