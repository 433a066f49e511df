#pragma once

// Checkpoint container:
//
//   magic "ALWC" | version u16 | meta_count u32 | (key, value)*  | entry_count u32 | entry*
//   string  := len u32 | bytes
//   entry   := name string | ndim u32 | extent u64 * ndim | f64 * numel
//
// All integers and reals little-endian. Entry order is preserved so that
// save -> load -> save is byte-identical.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "alwig/optim.hpp"

namespace alwig {

inline constexpr std::uint16_t kCheckpointVersion = 1;

struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<double> values;

  bool operator==(const CheckpointEntry&) const = default;
};

struct Checkpoint {
  std::map<std::string, std::string> metadata;
  std::vector<CheckpointEntry> entries;

  const CheckpointEntry& at(const std::string& name) const;
  bool operator==(const Checkpoint&) const = default;
};

Checkpoint capture(const ParameterList& params, std::map<std::string, std::string> metadata = {});
// Copies stored values into same-named parameters. Every parameter must be
// present with an identical shape.
void restore(const Checkpoint& ckpt, ParameterList& params);

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace alwig
