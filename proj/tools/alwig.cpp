// alwig: command-line front end.
//
//   alwig synth  --out DIR [--seed N] [--items N] [--heldout-items N] [--pretrain-items N] [--noise X]
//   alwig train  --config FILE --out DIR [--seed N] [--variant V]
//   alwig eval   --config FILE --checkpoint CKPT --split JSONL --out DIR [--beam N]
//   alwig filter --config FILE --checkpoint CKPT --dataset JSONL --out DIR [--threshold X]
//   alwig stats  --lexicon FILE --out FILE DATASET [DATASET]
//   alwig decode --config FILE --checkpoint CKPT --features CRTF --tags a,b,c [--beam N]
//
// Exit codes: 0 ok, 1 usage, 2 data, 3 numeric.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "alwig/checkpoint.hpp"
#include "alwig/config.hpp"
#include "alwig/dataset.hpp"
#include "alwig/error.hpp"
#include "alwig/pipeline.hpp"
#include "alwig/synth.hpp"

namespace fs = std::filesystem;
using namespace alwig;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

TrainConfig load_config(const fs::path& path, const std::string& variant = "") {
  auto kv = KeyValueConfig::load(path);
  if (!variant.empty()) kv.set("variant", variant);
  return parse_train_config(kv, path.parent_path());
}

Lexicon load_lexicon(const TrainConfig& c) {
  if (c.lexicon.empty()) throw UsageError("config key 'data.lexicon' is required for this command");
  return Lexicon::load(c.lexicon);
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct Args {
  std::string config;
  std::string out;
  std::string checkpoint;
  std::string split;
  std::string dataset;
  std::string lexicon;
  std::string features;
  std::string tags;
  std::string variant;
  std::vector<std::string> stats_inputs;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> beam;
  std::optional<double> threshold;
  SynthConfig synth;
};

int run_synth(const Args& a) {
  SynthConfig cfg = a.synth;
  if (a.seed) cfg.seed = *a.seed;
  write_corpus(synth_generate(cfg), a.out);
  return 0;
}

int run_train(const Args& a) {
  TrainConfig c = load_config(a.config, a.variant);
  if (a.seed) c.seed = *a.seed;
  const auto outcome = run_training(c);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  save_checkpoint(dir / "checkpoint.alwc", outcome.checkpoint);
  write_text(dir / "loss_log.tsv", loss_log_to_tsv(outcome.log));
  return 0;
}

int run_eval(const Args& a) {
  TrainConfig c = load_config(a.config);
  if (a.beam) c.beam = *a.beam;
  if (c.beam == 0) throw UsageError("--beam must be positive");
  const Vocabulary vocab = Vocabulary::load(c.vocab);
  const Lexicon lexicon = load_lexicon(c);
  const AlwigModel model = model_from_checkpoint(load_checkpoint(a.checkpoint), vocab);
  LoadOptions opts;
  opts.require_tags = true;
  const auto examples = prepare_examples(load_dataset(a.split, opts), vocab, true);
  const auto outcome = evaluate_model(model, examples, vocab, lexicon, {c.beam, c.max_decode_len}, c.protocol());

  const fs::path dir(a.out);
  write_text(dir / "report.txt", report_to_text(outcome.report));
  write_text(dir / "report.json", report_to_json(outcome.report));
  std::ostringstream dec;
  dec << "video_id\ttitle\ttitle_score\tcaption\tcaption_score\n";
  for (const auto& d : outcome.decoded) {
    char ts[64];
    char cs[64];
    std::snprintf(ts, sizeof ts, "%.17g", d.title_score);
    std::snprintf(cs, sizeof cs, "%.17g", d.caption_score);
    dec << d.video_id << '\t' << detokenize(d.title_tokens, vocab) << '\t' << ts << '\t'
        << detokenize(d.caption_tokens, vocab) << '\t' << cs << '\n';
  }
  write_text(dir / "decodes.tsv", dec.str());
  std::cout << report_to_text(outcome.report);
  return 0;
}

int run_filter(const Args& a) {
  TrainConfig c = load_config(a.config);
  const double threshold = a.threshold.value_or(c.filter_threshold);
  const Vocabulary vocab = Vocabulary::load(c.vocab);
  const TwoStreamModel model = scorer_from_checkpoint(load_checkpoint(a.checkpoint), vocab);
  const Dataset data = load_dataset(a.dataset);
  std::vector<ScorerInput> pairs;
  for (const auto& r : data.records) pairs.push_back({r.video_id, r.title, data.features(r), tokenize(r.title, vocab)});
  const FilterResult result = filter_dataset(pairs, model, threshold);

  std::string scored;
  std::string kept;
  std::string removed;
  for (std::size_t i = 0; i < result.scored.size(); ++i) {
    scored += scored_pair_to_json(result.scored[i]) + '\n';
    (result.scored[i].kept ? kept : removed) += record_to_json(data.records[i]) + '\n';
  }
  const fs::path dir(a.out);
  write_text(dir / "scored.jsonl", scored);
  write_text(dir / "kept.jsonl", kept);
  write_text(dir / "removed.jsonl", removed);
  const auto summary = filter_summary_to_text(summarize_filter(result, threshold));
  write_text(dir / "summary.txt", summary);
  std::cout << summary;
  return 0;
}

int run_stats(const Args& a) {
  if (a.stats_inputs.empty() || a.stats_inputs.size() > 2) throw UsageError("stats takes one or two datasets");
  const Lexicon lexicon = Lexicon::load(a.lexicon);
  LoadOptions opts;
  opts.check_features = false;
  const auto first = corpus_stats(load_dataset(a.stats_inputs[0], opts).records, lexicon);
  std::optional<CorpusStats> second;
  if (a.stats_inputs.size() == 2) second = corpus_stats(load_dataset(a.stats_inputs[1], opts).records, lexicon);
  const auto text = stats_to_text(compare_corpora(first, second));
  write_text(a.out, text);
  std::cout << text;
  return 0;
}

int run_decode(const Args& a) {
  TrainConfig c = load_config(a.config);
  if (a.beam) c.beam = *a.beam;
  if (c.beam == 0) throw UsageError("--beam must be positive");
  const Vocabulary vocab = Vocabulary::load(c.vocab);
  const AlwigModel model = model_from_checkpoint(load_checkpoint(a.checkpoint), vocab);
  std::vector<TokenSequence> tags;
  for (const auto& t : split_commas(a.tags)) tags.push_back(tokenize(t, vocab));
  BeamOptions opts;
  opts.beam = c.beam;
  opts.max_len = c.max_decode_len;
  opts.banned = special_tokens_banned_in_output();
  NoGradGuard no_grad;
  const auto f = model.fuse(tags, load_features(a.features));
  const auto h = model.beam_search_decode(f, {special::kBos, special::kTitle}, opts);
  std::cout << detokenize(h.tokens, vocab) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tag-driven video titling and retrieval"};
  app.require_subcommand(1);
  Args a;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  synth->add_option("--out", a.out, "Output directory")->required();
  synth->add_option("--seed", a.seed, "Random seed");
  synth->add_option("--items", a.synth.items, "Training items");
  synth->add_option("--heldout-items", a.synth.heldout_items, "Held-out test items");
  synth->add_option("--pretrain-items", a.synth.pretrain_items, "Title-only pre-training items");
  synth->add_option("--tag-universe", a.synth.tag_universe, "Number of distinct tags");
  synth->add_option("--tags-per-item", a.synth.tags_per_item, "Tags per item");
  synth->add_option("--frames", a.synth.frames, "Frames per item");
  synth->add_option("--noise", a.synth.noise, "Noise level in [0, 1]");

  auto* train = app.add_subcommand("train", "Train a model from a config file");
  train->add_option("--config", a.config)->required();
  train->add_option("--out", a.out, "Output directory")->required();
  train->add_option("--seed", a.seed);
  train->add_option("--variant", a.variant, "full, no_tag, no_gpt or no_pretrain");

  auto* eval = app.add_subcommand("eval", "Evaluate retrieval and generation on a split");
  eval->add_option("--config", a.config)->required();
  eval->add_option("--checkpoint", a.checkpoint)->required();
  eval->add_option("--split", a.split)->required();
  eval->add_option("--out", a.out, "Output directory")->required();
  eval->add_option("--beam", a.beam);

  auto* filter = app.add_subcommand("filter", "Score video-title pairs and drop mismatches");
  filter->add_option("--config", a.config)->required();
  filter->add_option("--checkpoint", a.checkpoint)->required();
  filter->add_option("--dataset", a.dataset)->required();
  filter->add_option("--out", a.out, "Output directory")->required();
  filter->add_option("--threshold", a.threshold);

  auto* stats = app.add_subcommand("stats", "Corpus statistics for one or two datasets");
  stats->add_option("datasets", a.stats_inputs)->required();
  stats->add_option("--lexicon", a.lexicon)->required();
  stats->add_option("--out", a.out, "Report file")->required();

  auto* decode = app.add_subcommand("decode", "Generate a title for one feature file");
  decode->add_option("--config", a.config)->required();
  decode->add_option("--checkpoint", a.checkpoint)->required();
  decode->add_option("--features", a.features)->required();
  decode->add_option("--tags", a.tags, "Comma-separated tags");
  decode->add_option("--beam", a.beam);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*synth) return run_synth(a);
    if (*train) return run_train(a);
    if (*eval) return run_eval(a);
    if (*filter) return run_filter(a);
    if (*stats) return run_stats(a);
    if (*decode) return run_decode(a);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const ArgumentError& e) {
    std::cerr << "argument error: " << e.what() << '\n';
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
