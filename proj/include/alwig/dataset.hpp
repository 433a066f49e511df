#pragma once

// On-disk formats.
//
// Feature file (CRTF), little-endian:
//   "CRTF" | version u16 = 1 | N u32 | d_v u32 | N*d_v float32
//
// Dataset: JSONL, one object per line:
//   {"video_id": str, "feature_file": str, "category": str,
//    "tags": [str], "title": str, "captions": [str]}
// feature_file is resolved relative to the dataset file's directory.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "alwig/model.hpp"

namespace alwig {

inline constexpr std::uint16_t kFeatureFileVersion = 1;

std::vector<std::uint8_t> encode_features(const VideoClipFeatures& video);
// DataError on bad magic, unsupported version, zero extents, a payload whose
// length disagrees with the header, or non-finite values.
VideoClipFeatures decode_features(std::span<const std::uint8_t> bytes);
void save_features(const std::filesystem::path& path, const VideoClipFeatures& video);
VideoClipFeatures load_features(const std::filesystem::path& path);

struct DatasetRecord {
  std::string video_id;
  std::string feature_file;
  std::string category;
  std::vector<std::string> tags;
  std::string title;
  std::vector<std::string> captions;

  bool operator==(const DatasetRecord&) const = default;
};

struct Dataset {
  std::filesystem::path base_dir;  // feature_file paths resolve against this
  std::vector<DatasetRecord> records;

  std::filesystem::path feature_path(const DatasetRecord& r) const { return base_dir / r.feature_file; }
  VideoClipFeatures features(const DatasetRecord& r) const { return load_features(feature_path(r)); }
};

struct LoadOptions {
  bool check_features = true;  // open and parse every feature file
  bool require_tags = false;   // labeled splits need at least one tag
};

// Parses JSONL text; errors carry the 1-based line number.
std::vector<DatasetRecord> parse_dataset(const std::string& content, const LoadOptions& options = {},
                                         const std::filesystem::path& base_dir = {});
Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& options = {});

std::string record_to_json(const DatasetRecord& r);
void save_dataset(const std::filesystem::path& path, const std::vector<DatasetRecord>& records);

}  // namespace alwig
