#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "alwig/bytes.hpp"
#include "alwig/config.hpp"
#include "alwig/dataset.hpp"
#include "alwig/error.hpp"
#include "alwig/synth.hpp"
#include "helpers.hpp"

using namespace alwig;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

std::string line_for(const std::string& id, const std::string& feature = "f.crtf") {
  return R"({"video_id":")" + id + R"(","feature_file":")" + feature +
         R"(","category":"c","tags":["ab"],"title":"t","captions":["x"]})";
}

std::vector<double> mean_frame(const VideoClipFeatures& v) {
  std::vector<double> m(v.dim, 0.0);
  for (std::size_t f = 0; f < v.frames; ++f) {
    for (std::size_t d = 0; d < v.dim; ++d) m[d] += v.values[f * v.dim + d] / static_cast<double>(v.frames);
  }
  return m;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / std::sqrt(na * nb);
}

std::vector<std::uint8_t> tree_bytes(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), dir));
  }
  std::sort(files.begin(), files.end());
  std::vector<std::uint8_t> all;
  for (const auto& f : files) {
    const auto name = f.generic_string();
    all.insert(all.end(), name.begin(), name.end());
    const auto b = bytes::read_file(dir / f);
    all.insert(all.end(), b.begin(), b.end());
  }
  return all;
}

}  // namespace

TEST_CASE("feature file round trip and header checks") {
  std::mt19937_64 rng(1);
  auto v = testing::random_video(3, 5, rng);
  for (auto& x : v.values) x = static_cast<double>(static_cast<float>(x));
  const auto enc = encode_features(v);
  CHECK(enc.size() == 4 + 2 + 4 + 4 + 15 * 4);
  CHECK(std::string(enc.begin(), enc.begin() + 4) == "CRTF");
  const auto dec = decode_features(enc);
  CHECK(dec.frames == 3);
  CHECK(dec.dim == 5);
  CHECK(dec.values == v.values);

  auto bad = enc;
  bad[1] = 'X';
  CHECK_THROWS_AS(decode_features(bad), DataError);
  bad = enc;
  bad[4] = 2;
  CHECK_THROWS_AS(decode_features(bad), DataError);
  auto extra = enc;
  extra.push_back(0);
  CHECK_THROWS_AS(decode_features(extra), DataError);
  auto nan = enc;
  const float q = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(nan.data() + 14, &q, 4);
  CHECK_THROWS_AS(decode_features(nan), DataError);
  auto zero = std::vector<std::uint8_t>(enc.begin(), enc.begin() + 14);
  std::fill(zero.begin() + 6, zero.begin() + 10, 0);
  CHECK_THROWS_AS(decode_features(zero), DataError);
}

TEST_CASE("feature parser rejects every truncation") {
  std::mt19937_64 rng(2);
  const auto enc = encode_features(testing::random_video(4, 3, rng));
  for (std::size_t cut = 0; cut < enc.size(); ++cut) {
    CHECK_THROWS_AS(decode_features(std::span(enc.data(), cut)), DataError);
  }
  std::uniform_int_distribution<int> byte(0, 255);
  for (int trial = 0; trial < 200; ++trial) {
    auto mutated = enc;
    mutated[std::uniform_int_distribution<std::size_t>(0, 13)(rng)] = static_cast<std::uint8_t>(byte(rng));
    try {
      const auto v = decode_features(mutated);
      CHECK(v.values.size() == v.frames * v.dim);
      CHECK(mutated.size() == 14 + 4 * v.values.size());
    } catch (const DataError&) {
    }
  }
}

TEST_CASE("dataset parsing errors") {
  TempDir dir("alwig_dataset_errors");
  std::mt19937_64 rng(3);
  save_features(dir.path / "f.crtf", testing::random_video(2, 3, rng));

  CHECK(parse_dataset("").empty());
  write_text(dir.path / "empty.jsonl", "");
  CHECK(load_dataset(dir.path / "empty.jsonl").records.empty());

  write_text(dir.path / "dup.jsonl", line_for("a") + "\n" + line_for("a") + "\n");
  try {
    load_dataset(dir.path / "dup.jsonl");
    FAIL("expected a duplicate-id error");
  } catch (const DataError& e) {
    CHECK(e.line() == 2);
    CHECK(std::string(e.what()).find("'a'") != std::string::npos);
  }

  write_text(dir.path / "bad.jsonl", line_for("a") + "\n\n{not json\n");
  try {
    load_dataset(dir.path / "bad.jsonl");
    FAIL("expected a parse error");
  } catch (const DataError& e) {
    CHECK(e.line() == 3);
  }

  write_text(dir.path / "missing.jsonl", line_for("a", "nope.crtf") + "\n");
  try {
    load_dataset(dir.path / "missing.jsonl");
    FAIL("expected a missing-file error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("nope.crtf") != std::string::npos);
  }
  LoadOptions lax;
  lax.check_features = false;
  CHECK(load_dataset(dir.path / "missing.jsonl", lax).records.size() == 1);

  CHECK_THROWS_AS(parse_dataset(R"({"video_id":"a","feature_file":"f","tags":"x","title":"t"})", lax), DataError);
  LoadOptions labeled = lax;
  labeled.require_tags = true;
  CHECK_THROWS_AS(parse_dataset(R"({"video_id":"a","feature_file":"f","tags":[],"title":"t"})", labeled), DataError);
  CHECK_THROWS_AS(load_dataset(dir.path / "absent.jsonl"), DataError);
}

TEST_CASE("1000-record dataset round trip") {
  TempDir dir("alwig_dataset_roundtrip");
  std::mt19937_64 rng(4);
  std::vector<DatasetRecord> records;
  const std::vector<std::string> words{"猫", "跳舞", "a\"b", "tab\t", "小狗", "\\"};
  std::uniform_int_distribution<std::size_t> w(0, words.size() - 1), n(0, 4);
  for (int i = 0; i < 1000; ++i) {
    DatasetRecord r;
    r.video_id = "vid" + std::to_string(i);
    r.feature_file = "features/" + r.video_id + ".crtf";
    r.category = words[w(rng)];
    for (std::size_t k = n(rng); k > 0; --k) r.tags.push_back(words[w(rng)]);
    r.title = words[w(rng)] + words[w(rng)];
    for (std::size_t k = n(rng); k > 0; --k) r.captions.push_back(words[w(rng)]);
    records.push_back(r);
  }
  save_dataset(dir.path / "d.jsonl", records);
  LoadOptions lax;
  lax.check_features = false;
  const auto loaded = load_dataset(dir.path / "d.jsonl", lax);
  CHECK(loaded.records == records);
  CHECK(loaded.base_dir == dir.path);
}

TEST_CASE("synthetic corpus is deterministic") {
  TempDir a("alwig_synth_a"), b("alwig_synth_b");
  SynthConfig cfg;
  cfg.items = 20;
  cfg.heldout_items = 5;
  cfg.pretrain_items = 5;
  write_corpus(synth_generate(cfg), a.path);
  write_corpus(synth_generate(cfg), b.path);
  CHECK(tree_bytes(a.path) == tree_bytes(b.path));
  CHECK(fs::exists(a.path / "train.jsonl"));
  CHECK(fs::exists(a.path / "test.jsonl"));
  CHECK(fs::exists(a.path / "pretrain.jsonl"));
  CHECK(fs::exists(a.path / "vocab.txt"));
  CHECK(fs::exists(a.path / "lexicon.txt"));
  const auto ds = load_dataset(a.path / "train.jsonl");
  CHECK(ds.records.size() == 20);

  cfg.seed = 8;
  TempDir c("alwig_synth_c");
  write_corpus(synth_generate(cfg), c.path);
  CHECK(tree_bytes(a.path) != tree_bytes(c.path));
}

TEST_CASE("synthetic features carry the tag signal") {
  SynthConfig cfg;
  cfg.items = 40;
  cfg.tag_universe = 6;
  cfg.tags_per_item = 2;
  cfg.noise = 0.0;
  const auto corpus = synth_generate(cfg);
  const auto& split = corpus.split("train");
  std::size_t disjoint = 0, same = 0;
  for (std::size_t i = 0; i < split.records.size(); ++i) {
    for (std::size_t j = i + 1; j < split.records.size(); ++j) {
      std::set<std::string> ti(split.records[i].tags.begin(), split.records[i].tags.end());
      std::set<std::string> tj(split.records[j].tags.begin(), split.records[j].tags.end());
      std::vector<std::string> common;
      std::set_intersection(ti.begin(), ti.end(), tj.begin(), tj.end(), std::back_inserter(common));
      const double c = cosine(mean_frame(split.features[i]), mean_frame(split.features[j]));
      if (common.empty()) {
        ++disjoint;
        CHECK(c <= 0.1);
      } else if (ti == tj) {
        ++same;
        CHECK(c > 0.9);
      }
    }
  }
  CHECK(disjoint > 0);
  CHECK(same > 0);
}

TEST_CASE("synthetic config echo") {
  SynthConfig cfg;
  cfg.items = 10;
  cfg.tags_per_item = 3;
  const auto corpus = synth_generate(cfg);
  const auto& train = corpus.split("train");
  REQUIRE(train.records.size() == 10);
  for (const auto& r : train.records) {
    CHECK(r.tags.size() == 3);
    CHECK(r.captions.size() == cfg.captions_per_item);
    for (const auto& t : r.tags) CHECK(r.title.find(t) != std::string::npos);
  }
  for (const auto& v : train.features) {
    CHECK(v.frames == cfg.frames);
    CHECK(v.dim == cfg.feature_dim);
  }
  SynthConfig bad;
  bad.tags_per_item = bad.tag_universe + 1;
  CHECK_THROWS_AS(synth_generate(bad), ArgumentError);
  bad = SynthConfig{};
  bad.noise = 1.5;
  CHECK_THROWS_AS(synth_generate(bad), ArgumentError);
}

TEST_CASE("key-value config") {
  const auto kv = KeyValueConfig::parse("# comment\n a = 1 \n\nb=x y # trailing\n");
  CHECK(kv.get_size("a", 0) == 1);
  CHECK(kv.get_string("b", "") == "x y");
  CHECK(kv.get_double("missing", 2.5) == 2.5);
  CHECK_THROWS_AS(KeyValueConfig::parse("a = 1\na = 2\n"), UsageError);
  CHECK_THROWS_AS(KeyValueConfig::parse("no equals sign\n"), UsageError);
  CHECK_THROWS_AS(kv.require_known({"a"}), UsageError);
  CHECK_THROWS_AS(KeyValueConfig::parse("a = z").get_size("a", 0), UsageError);
}
