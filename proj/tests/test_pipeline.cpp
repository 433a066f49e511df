#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "alwig/bytes.hpp"
#include "alwig/error.hpp"
#include "alwig/pipeline.hpp"
#include "alwig/synth.hpp"

using namespace alwig;
namespace fs = std::filesystem;

namespace {

const std::string kData = "data.vocab = v.txt\ndata.train = t.jsonl\n";

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

std::string read_text(const fs::path& p) {
  const auto b = bytes::read_file(p);
  return {b.begin(), b.end()};
}

std::size_t line_count(const fs::path& p) {
  const auto s = read_text(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

ModelConfig small_model(const SynthCorpus& corpus) {
  ModelConfig m;
  m.video_dim = corpus.config.feature_dim;
  m.hidden_dim = 16;
  m.shared_dim = 8;
  m.encoder_layers = 1;
  m.decoder_layers = 1;
  m.heads = 2;
  m.vocab_size = corpus.vocab.size();
  m.max_text_len = 24;
  m.max_frames = corpus.config.frames;
  m.max_tags = 4;
  return m;
}

SynthCorpus small_corpus(std::size_t items, std::uint64_t seed = 3) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.items = items;
  cfg.tag_universe = 8;
  cfg.tags_per_item = 2;
  cfg.frames = 4;
  return synth_generate(cfg);
}

// A config file next to a written corpus, with toy dimensions.
std::string small_config_text(const std::string& extra = "") {
  return "data.vocab = vocab.txt\n"
         "data.lexicon = lexicon.txt\n"
         "data.train = train.jsonl\n"
         "model.hidden_dim = 16\nmodel.shared_dim = 8\nmodel.encoder_layers = 1\nmodel.decoder_layers = 1\n"
         "model.heads = 2\nmodel.max_text_len = 24\nmodel.max_frames = 8\nmodel.max_tags = 4\n"
         "scorer.hidden_dim = 16\nscorer.shared_dim = 8\nscorer.text_layers = 1\nscorer.heads = 2\n"
         "train.pretrain_epochs = 1\ntrain.finetune_epochs = 2\ntrain.batch_size = 4\n"
         "schedule.warmup_epochs = 1\nschedule.peak_lr = 1e-3\nschedule.final_lr = 1e-4\n"
         "eval.max_decode_len = 12\n" +
         extra;
}

fs::path cli() {
  const char* env = std::getenv("ALWIG_CLI");
  return env ? fs::path(env) : fs::path("alwig");
}

int run(const std::string& args) {
  const std::string cmd = cli().string() + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("train config parsing") {
  const auto defaults = parse_train_config(KeyValueConfig::parse(kData), "/base");
  CHECK(defaults.task == "alwig");
  CHECK(defaults.variant == Variant::full);
  CHECK(defaults.batch_size == 8);
  CHECK(defaults.pretrain_epochs == 30);
  CHECK(defaults.finetune_epochs == 30);
  CHECK(defaults.adamw.weight_decay == 0.02);
  CHECK(defaults.schedule.warmup_epochs == 10);
  CHECK(defaults.schedule.peak_lr == 1e-5);
  CHECK(defaults.schedule.final_lr == 1e-6);
  CHECK(defaults.beam == 3);
  CHECK(defaults.filter_threshold == 0.3);
  CHECK(defaults.model.tau_init == 0.07);
  CHECK(defaults.protocol() == ProtocolConstants{});

  const auto c = parse_train_config(
      KeyValueConfig::parse("variant = no_tag\ndata.vocab = v.txt\ndata.train = d/t.jsonl\neval.beam = 5\nfilter.threshold = 0.5\n"),
      "/base");
  CHECK(c.variant == Variant::no_tag);
  CHECK_FALSE(c.model.use_tags);
  CHECK(c.train_data == fs::path("/base/d/t.jsonl"));
  CHECK(c.protocol().beam_size == 5);
  CHECK(c.protocol().filter_threshold == 0.5);

  try {
    parse_train_config(KeyValueConfig::parse(kData + "train.epochz = 3\n"), "/base");
    FAIL("expected a usage error");
  } catch (const UsageError& e) {
    CHECK(std::string(e.what()).find("train.epochz") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_train_config(KeyValueConfig::parse(kData + "variant = no_video\n"), "/"), Error);
  CHECK_THROWS_AS(parse_train_config(KeyValueConfig::parse(kData + "task = other\n"), "/"), UsageError);
  CHECK_THROWS_AS(parse_train_config(KeyValueConfig::parse(kData + "filter.threshold = 1.1\n"), "/"), Error);
}

TEST_CASE("data paths are required") {
  CHECK_THROWS_AS(parse_train_config(KeyValueConfig::parse(""), "/base"), UsageError);
  CHECK_THROWS_AS(parse_train_config(KeyValueConfig::parse("data.vocab = v.txt\n"), "/base"), UsageError);
}

TEST_CASE("generation targets") {
  const TokenSequence text{9, 10, 11};
  CHECK(generation_target(text, true, 10) == TokenSequence{special::kBos, special::kTitle, 9, 10, 11, special::kEos});
  CHECK(generation_target(text, false, 10) ==
        TokenSequence{special::kBos, special::kCaption, 9, 10, 11, special::kEos});
  CHECK(generation_target(text, true, 4) == TokenSequence{special::kBos, special::kTitle, 9, special::kEos});
}

TEST_CASE("training with zero epochs returns the initialization") {
  TempDir dir("alwig_pipeline_zero");
  const auto corpus = small_corpus(6);
  write_corpus(corpus, dir.path);
  auto kv = KeyValueConfig::parse(small_config_text("seed = 11\n"));
  kv.set("train.pretrain_epochs", "0");
  kv.set("train.finetune_epochs", "0");
  const auto cfg = parse_train_config(kv, dir.path);
  const auto outcome = run_training(cfg);
  CHECK(outcome.log.empty());
  auto mc = cfg.model;
  mc.vocab_size = corpus.vocab.size();
  AlwigModel fresh(mc, 11);
  const auto restored = model_from_checkpoint(outcome.checkpoint, corpus.vocab);
  REQUIRE(restored.parameters().size() == fresh.parameters().size());
  for (std::size_t i = 0; i < fresh.parameters().size(); ++i) {
    const auto a = restored.parameters()[i].value.data();
    const auto b = fresh.parameters()[i].value.data();
    CHECK(std::equal(a.begin(), a.end(), b.begin(), b.end()));
  }
  CHECK_THROWS_AS(model_from_checkpoint(outcome.checkpoint, Vocabulary::from_texts({"xyz"})), DataError);
  CHECK_THROWS_AS(scorer_from_checkpoint(outcome.checkpoint, corpus.vocab), DataError);
}

struct Overfit {
  SynthCorpus corpus;
  std::vector<Example> examples;
  AlwigModel model;
  std::vector<LossRecord> log;
  std::size_t callbacks = 0;
};

// Eight items trained to memorization, shared by the cases below.
const Overfit& overfit_eight() {
  static const Overfit fit = [] {
    auto corpus = small_corpus(8);
    const auto& split = corpus.split("train");
    auto examples = prepare_examples(split.records, split.features, corpus.vocab, true);
    AlwigModel model(small_model(corpus), 1);
    StageOptions opt;
    opt.epochs = 200;
    opt.batch_size = 8;
    opt.schedule = {5, 3e-3, 3e-4, 200};
    std::size_t callbacks = 0;
    auto log = train_stage(model, examples, opt, "finetune", false, [&](std::size_t) { ++callbacks; });
    return Overfit{std::move(corpus), std::move(examples), std::move(model), std::move(log), callbacks};
  }();
  return fit;
}

TEST_CASE("overfitting eight items") {
  const auto& fit = overfit_eight();
  REQUIRE(fit.examples.size() == 8);
  CHECK(fit.examples[0].texts.size() == 1 + fit.corpus.config.captions_per_item);
  REQUIRE(fit.log.size() == 200);
  CHECK(fit.callbacks == 200);
  CHECK(fit.log.back().total < fit.log.front().total);
  for (const auto& r : fit.log) CHECK(std::abs(r.total - (r.align + r.gen)) <= 1e-9);

  const auto sim = similarity_matrix(fit.model, fit.examples);
  CHECK(sim.texts == 8 * fit.examples[0].texts.size());
  CHECK(sim.videos == 8);
  CHECK(recall_at_k(sim, 1, RetrievalDirection::text_to_video) == 100.0);

  const auto three =
      evaluate_model(fit.model, fit.examples, fit.corpus.vocab, fit.corpus.lexicon, {3, 20}, ProtocolConstants{});
  CHECK(three.report.t2v_r1 == 100.0);
  CHECK(report_from_json(report_to_json(three.report)) == three.report);
  const auto banned = special_tokens_banned_in_output();
  for (const auto& d : three.decoded) {
    for (auto t : d.title_tokens) CHECK(std::find(banned.begin(), banned.end(), t) == banned.end());
    for (auto t : d.caption_tokens) CHECK(std::find(banned.begin(), banned.end(), t) == banned.end());
  }
}

TEST_CASE("beam 3 decodes differ from beam 1 only with strictly higher scores") {
  const auto& fit = overfit_eight();
  const auto one =
      evaluate_model(fit.model, fit.examples, fit.corpus.vocab, fit.corpus.lexicon, {1, 20}, ProtocolConstants{});
  const auto three =
      evaluate_model(fit.model, fit.examples, fit.corpus.vocab, fit.corpus.lexicon, {3, 20}, ProtocolConstants{});
  REQUIRE(one.decoded.size() == three.decoded.size());
  for (std::size_t i = 0; i < one.decoded.size(); ++i) {
    const auto& a = one.decoded[i];
    const auto& b = three.decoded[i];
    if (a.title_tokens != b.title_tokens) CHECK(b.title_score > a.title_score);
    if (a.caption_tokens != b.caption_tokens) CHECK(b.caption_score > a.caption_score);
  }
}

TEST_CASE("no_pretrain logs only the fine-tuning stage") {
  TempDir dir("alwig_pipeline_stages");
  write_corpus(small_corpus(6), dir.path);
  auto cfg = parse_train_config(KeyValueConfig::parse(small_config_text()), dir.path);
  const auto full = run_training(cfg);
  CHECK(std::count_if(full.log.begin(), full.log.end(), [](auto& r) { return r.stage == "pretrain"; }) == 1);
  CHECK(std::count_if(full.log.begin(), full.log.end(), [](auto& r) { return r.stage == "finetune"; }) == 2);

  cfg = parse_train_config(KeyValueConfig::parse(small_config_text("variant = no_pretrain\n")), dir.path);
  const auto skipped = run_training(cfg);
  REQUIRE(skipped.log.size() == 2);
  for (const auto& r : skipped.log) CHECK(r.stage == "finetune");
  const auto tsv = loss_log_to_tsv(skipped.log);
  CHECK(std::count(tsv.begin(), tsv.end(), '\n') == 3);
}

TEST_CASE("filter summary") {
  std::vector<ScoredPair> pairs{{"a", "", -1.0, false}, {"b", "", 0.3, false}, {"c", "", 0.95, false},
                                {"d", "", 1.0, false},  {"e", "", 0.1, false}};
  const auto r = partition_by_score(pairs, 0.3);
  const auto s = summarize_filter(r, 0.3);
  CHECK(s.total == 5);
  CHECK(s.kept == 3);
  CHECK(s.kept_fraction() == 0.6);
  std::size_t mass = 0;
  for (auto c : s.histogram) mass += c;
  CHECK(mass == 5);
  CHECK(s.histogram[0] == 1);
  CHECK(s.histogram[19] == 2);
  CHECK(s.histogram[13] == 1);
  CHECK(s.histogram[11] == 1);
  CHECK(filter_summary_to_text(s).find("kept = 3") != std::string::npos);
  CHECK(scored_pair_to_json(r.scored[1]) == R"({"video_id":"b","score":0.300000,"kept":true})");
}

TEST_CASE("corpus statistics") {
  const Lexicon lex({"小猫", "跳舞"});
  SUBCASE("constant tag count") {
    std::vector<DatasetRecord> rs(4);
    for (auto& r : rs) {
      r.tags = {"a", "b", "c", "d", "e"};
      r.title = "小猫";
    }
    const auto s = corpus_stats(rs, lex);
    CHECK(s.mean_tag_count == 5.0);
    CHECK(s.tag_count_histogram == std::map<std::size_t, std::size_t>{{5, 4}});
  }
  SUBCASE("hand-built three-item corpus") {
    std::vector<DatasetRecord> rs(3);
    rs[0].title = "小猫跳舞";      // 小猫 跳舞
    rs[1].title = "小猫在跳舞了";  // 小猫 在 跳舞 了
    rs[2].title = "狗";            // 狗
    rs[0].captions = {"小猫", "跳舞跳舞跳舞"};
    rs[0].tags = {"x"};
    rs[1].tags = {"x", "y"};
    const auto s = corpus_stats(rs, lex);
    CHECK(s.items == 3);
    CHECK(std::abs(s.mean_title_length - 7.0 / 3.0) <= 1e-12);
    CHECK(s.title_length_histogram == std::map<std::size_t, std::size_t>{{1, 1}, {2, 1}, {4, 1}});
    CHECK(s.caption_length_histogram == std::map<std::size_t, std::size_t>{{1, 1}, {3, 1}});
    CHECK(s.mean_caption_length == 2.0);
    CHECK(s.tag_count_histogram == std::map<std::size_t, std::size_t>{{0, 1}, {1, 1}, {2, 1}});
    CHECK(s.mean_tag_count == 1.0);
    CHECK(s.unique_words == std::set<std::string>{"小猫", "跳舞", "在", "了", "狗"});

    const auto self = compare_corpora(s, s);
    CHECK(self.overlap == s.unique_words.size());
    CHECK(self.coverage_first_in_second == 100.0);
    CHECK(self.coverage_second_in_first == 100.0);

    std::vector<DatasetRecord> other(1);
    other[0].title = "小猫吃鱼";
    const auto o = corpus_stats(other, lex);
    const auto cmp = compare_corpora(s, o);
    CHECK(cmp.overlap == 1);
    CHECK(cmp.coverage_first_in_second == 20.0);
    CHECK(cmp.coverage_second_in_first == doctest::Approx(100.0 / 3.0));
    CHECK(stats_to_text(cmp).find("overlap = 1") != std::string::npos);
  }
}

TEST_CASE("command line") {
  TempDir dir("alwig_cli");
  const auto d = dir.path.string();
  REQUIRE(run("synth --out " + d + "/data --items 6 --heldout-items 4 --tag-universe 8 --tags-per-item 2 --frames 4") ==
          0);
  write_text(dir.path / "data" / "run.conf", small_config_text("data.validation = test.jsonl\n"));
  write_text(dir.path / "data" / "scorer.conf", small_config_text("task = scorer\n"));
  const std::string conf = d + "/data/run.conf";

  SUBCASE("train and eval are deterministic") {
    REQUIRE(run("train --config " + conf + " --out " + d + "/r1") == 0);
    REQUIRE(run("train --config " + conf + " --out " + d + "/r2") == 0);
    CHECK(read_text(dir.path / "r1/checkpoint.alwc") == read_text(dir.path / "r2/checkpoint.alwc"));
    CHECK(read_text(dir.path / "r1/loss_log.tsv") == read_text(dir.path / "r2/loss_log.tsv"));
    REQUIRE(run("train --config " + conf + " --out " + d + "/r3 --seed 5") == 0);
    CHECK(read_text(dir.path / "r1/checkpoint.alwc") != read_text(dir.path / "r3/checkpoint.alwc"));

    const std::string ck = " --checkpoint " + d + "/r1/checkpoint.alwc";
    REQUIRE(run("eval --config " + conf + ck + " --split " + d + "/data/test.jsonl --out " + d + "/e1") == 0);
    REQUIRE(run("eval --config " + conf + ck + " --split " + d + "/data/test.jsonl --out " + d + "/e2") == 0);
    CHECK(read_text(dir.path / "e1/report.json") == read_text(dir.path / "e2/report.json"));
    const auto report = report_from_json(read_text(dir.path / "e1/report.json"));
    CHECK(report.videos == 4);
    const auto run_cfg = parse_train_config(KeyValueConfig::parse(read_text(dir.path / "data/run.conf")), dir.path / "data");
    CHECK(read_text(dir.path / "e1/report.txt").rfind(protocol_header(run_cfg.protocol()), 0) == 0);
    CHECK(line_count(dir.path / "e1/decodes.tsv") >= 4);

    const auto features = d + "/data/features/test_00000.crtf";
    CHECK(run("decode --config " + conf + ck + " --features " + features + " --tags a,b") == 0);
    CHECK(run("eval --config " + conf + ck + " --split " + d + "/data/missing.jsonl --out " + d + "/e3") == 2);
  }
  SUBCASE("filter writes consistent files") {
    const std::string sconf = d + "/data/scorer.conf";
    REQUIRE(run("train --config " + sconf + " --out " + d + "/s") == 0);
    const std::string base = "filter --config " + sconf + " --checkpoint " + d + "/s/checkpoint.alwc --dataset " + d +
                             "/data/train.jsonl --out ";
    REQUIRE(run(base + d + "/f") == 0);
    const auto kept = line_count(dir.path / "f/kept.jsonl");
    CHECK(kept + line_count(dir.path / "f/removed.jsonl") == 6);
    CHECK(line_count(dir.path / "f/scored.jsonl") == 6);
    CHECK(read_text(dir.path / "f/summary.txt").find("kept = " + std::to_string(kept) + "\n") != std::string::npos);
    REQUIRE(run(base + d + "/all --threshold -1") == 0);
    CHECK(line_count(dir.path / "all/kept.jsonl") == 6);
    CHECK(run(base + d + "/bad --threshold 1.1") == 1);
  }
  SUBCASE("stats and usage errors") {
    CHECK(run("stats " + d + "/data/train.jsonl " + d + "/data/test.jsonl --lexicon " + d + "/data/lexicon.txt --out " +
              d + "/stats.txt") == 0);
    CHECK(read_text(dir.path / "stats.txt").find("overlap") != std::string::npos);
    CHECK(run("") == 1);
    CHECK(run("train --out " + d + "/x") == 1);
    CHECK(run("frobnicate") == 1);
    write_text(dir.path / "bad.conf", "data.train = train.jsonl\nbogus.key = 1\n");
    CHECK(run("train --config " + d + "/bad.conf --out " + d + "/x") == 1);
    CHECK(run("train --config " + conf + " --out " + d + "/x --variant no_video") == 1);
  }
}
