#include "alwig/checkpoint.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include "alwig/bytes.hpp"
#include "alwig/error.hpp"

namespace alwig {

namespace bytes {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace bytes

namespace {
constexpr std::uint8_t kMagic[4] = {'A', 'L', 'W', 'C'};
}

const CheckpointEntry& Checkpoint::at(const std::string& name) const {
  auto it = std::find_if(entries.begin(), entries.end(), [&](const auto& e) { return e.name == name; });
  if (it == entries.end()) throw DataError("checkpoint has no entry '" + name + "'");
  return *it;
}

Checkpoint capture(const ParameterList& params, std::map<std::string, std::string> metadata) {
  Checkpoint ckpt;
  ckpt.metadata = std::move(metadata);
  for (const auto& p : params) {
    const auto d = p.value.data();
    ckpt.entries.push_back({p.name, p.value.shape(), std::vector<double>(d.begin(), d.end())});
  }
  return ckpt;
}

void restore(const Checkpoint& ckpt, ParameterList& params) {
  for (auto& p : params) {
    const auto& e = ckpt.at(p.name);
    if (e.shape != p.value.shape()) {
      throw DataError("checkpoint entry '" + p.name + "' has shape " + shape_str(e.shape) + ", model expects " +
                      shape_str(p.value.shape()));
    }
    std::copy(e.values.begin(), e.values.end(), p.value.mutable_data().begin());
  }
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  bytes::Writer w;
  w.raw(kMagic);
  w.u16(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(ckpt.metadata.size()));
  for (const auto& [k, v] : ckpt.metadata) {
    w.str(k);
    w.str(v);
  }
  w.u32(static_cast<std::uint32_t>(ckpt.entries.size()));
  for (const auto& e : ckpt.entries) {
    w.str(e.name);
    w.u32(static_cast<std::uint32_t>(e.shape.size()));
    for (auto x : e.shape) w.u64(x);
    for (double v : e.values) w.f64(v);
  }
  return std::move(w.buffer());
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> data) {
  bytes::Reader r(data, "checkpoint");
  const auto magic = r.raw(4);
  if (!std::equal(magic.begin(), magic.end(), kMagic)) throw DataError("checkpoint: bad magic");
  const auto version = r.u16();
  if (version != kCheckpointVersion) throw DataError("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint ckpt;
  const auto meta = r.u32();
  for (std::uint32_t i = 0; i < meta; ++i) {
    auto k = r.str();
    ckpt.metadata[k] = r.str();
  }
  const auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    e.name = r.str();
    const auto ndim = r.u32();
    if (ndim > 8) throw DataError("checkpoint: entry '" + e.name + "' has implausible rank");
    std::uint64_t numel = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      const auto x = r.u64();
      if (x == 0) throw DataError("checkpoint: entry '" + e.name + "' has a zero extent");
      numel *= x;
      e.shape.push_back(static_cast<std::size_t>(x));
    }
    if (numel > r.remaining() / 8) throw DataError("checkpoint: entry '" + e.name + "' truncated");
    e.values.resize(static_cast<std::size_t>(numel));
    for (auto& v : e.values) v = r.f64();
    ckpt.entries.push_back(std::move(e));
  }
  if (r.remaining() != 0) throw DataError("checkpoint: trailing bytes");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  bytes::write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(bytes::read_file(path)); }

}  // namespace alwig
