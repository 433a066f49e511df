#include "alwig/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "alwig/bytes.hpp"
#include "alwig/error.hpp"

namespace alwig {

namespace {
constexpr std::uint8_t kFeatureMagic[4] = {'C', 'R', 'T', 'F'};
}

std::vector<std::uint8_t> encode_features(const VideoClipFeatures& video) {
  video.validate();
  bytes::Writer w;
  w.raw(kFeatureMagic);
  w.u16(kFeatureFileVersion);
  w.u32(static_cast<std::uint32_t>(video.frames));
  w.u32(static_cast<std::uint32_t>(video.dim));
  for (double v : video.values) w.f32(static_cast<float>(v));
  return std::move(w.buffer());
}

VideoClipFeatures decode_features(std::span<const std::uint8_t> data) {
  bytes::Reader r(data, "feature file");
  const auto magic = r.raw(4);
  if (!std::equal(magic.begin(), magic.end(), kFeatureMagic)) throw DataError("feature file: bad magic");
  const auto version = r.u16();
  if (version != kFeatureFileVersion) {
    throw DataError("feature file: unsupported version " + std::to_string(version));
  }
  VideoClipFeatures v;
  v.frames = r.u32();
  v.dim = r.u32();
  if (v.frames == 0 || v.dim == 0) throw DataError("feature file: zero frame count or dimension");
  const std::uint64_t expected = static_cast<std::uint64_t>(v.frames) * v.dim * 4;
  if (expected != r.remaining()) {
    throw DataError("feature file: header promises " + std::to_string(expected) + " payload bytes, found " +
                    std::to_string(r.remaining()));
  }
  v.values.resize(v.frames * v.dim);
  for (std::size_t i = 0; i < v.values.size(); ++i) {
    const float f = r.f32();
    if (!std::isfinite(f)) {
      throw DataError("feature file: non-finite value at frame " + std::to_string(i / v.dim) + ", component " +
                      std::to_string(i % v.dim));
    }
    v.values[i] = f;
  }
  return v;
}

void save_features(const std::filesystem::path& path, const VideoClipFeatures& video) {
  bytes::write_file(path, encode_features(video));
}

VideoClipFeatures load_features(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("missing feature file " + path.string());
  try {
    return decode_features(bytes::read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

namespace {

std::string req_string(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw DataError(std::string("missing field '") + key + "'");
  if (!it->is_string()) throw DataError(std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

std::vector<std::string> req_strings(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw DataError(std::string("missing field '") + key + "'");
  if (!it->is_array()) throw DataError(std::string("field '") + key + "' must be an array of strings");
  std::vector<std::string> out;
  for (const auto& e : *it) {
    if (!e.is_string()) throw DataError(std::string("field '") + key + "' must be an array of strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

}  // namespace

std::vector<DatasetRecord> parse_dataset(const std::string& content, const LoadOptions& options,
                                         const std::filesystem::path& base_dir) {
  std::vector<DatasetRecord> out;
  std::unordered_set<std::string> ids;
  std::istringstream in(content);
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (!j.is_object()) throw DataError("expected a JSON object");
      DatasetRecord r;
      r.video_id = req_string(j, "video_id");
      r.feature_file = req_string(j, "feature_file");
      r.category = req_string(j, "category");
      r.tags = req_strings(j, "tags");
      r.title = req_string(j, "title");
      r.captions = req_strings(j, "captions");
      if (r.video_id.empty()) throw DataError("empty video_id");
      if (options.require_tags && r.tags.empty()) throw DataError("record '" + r.video_id + "' has no tags");
      if (!ids.insert(r.video_id).second) throw DataError("duplicate video_id '" + r.video_id + "'");
      if (options.check_features) (void)load_features(base_dir / r.feature_file);
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("malformed JSON: ") + e.what(), lineno);
    } catch (const DataError& e) {
      throw DataError(e.what(), lineno);
    }
  }
  return out;
}

Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  Dataset d;
  d.base_dir = path.parent_path();
  d.records = parse_dataset(ss.str(), options, d.base_dir);
  return d;
}

std::string record_to_json(const DatasetRecord& r) {
  nlohmann::ordered_json j;
  j["video_id"] = r.video_id;
  j["feature_file"] = r.feature_file;
  j["category"] = r.category;
  j["tags"] = r.tags;
  j["title"] = r.title;
  j["captions"] = r.captions;
  return j.dump();
}

void save_dataset(const std::filesystem::path& path, const std::vector<DatasetRecord>& records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& r : records) out << record_to_json(r) << '\n';
}

}  // namespace alwig
