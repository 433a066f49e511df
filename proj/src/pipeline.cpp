#include "alwig/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "alwig/error.hpp"

namespace alwig {

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string real_str(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

TokenSequence clip(TokenSequence t, std::size_t n) {
  if (t.size() > n) t.resize(n);
  return t;
}

std::vector<std::pair<std::size_t, std::size_t>> make_batches(std::size_t n, std::size_t batch_size) {
  std::vector<std::pair<std::size_t, std::size_t>> batches;
  for (std::size_t s = 0; s < n; s += batch_size) batches.emplace_back(s, std::min(n, s + batch_size));
  if (batches.size() > 1 && batches.back().second - batches.back().first < 2) {
    batches[batches.size() - 2].second = batches.back().second;
    batches.pop_back();
  }
  return batches;
}

}  // namespace

std::vector<Example> prepare_examples(const std::vector<DatasetRecord>& records,
                                      const std::vector<VideoClipFeatures>& features, const Vocabulary& vocab,
                                      bool with_captions) {
  if (records.size() != features.size()) throw ArgumentError("prepare_examples: records and features differ in count");
  std::vector<Example> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    Example e;
    e.video_id = r.video_id;
    for (const auto& t : r.tags) e.tags.push_back(tokenize(t, vocab));
    e.video = features[i];
    e.texts.push_back(tokenize(r.title, vocab));
    e.raw.push_back(r.title);
    if (with_captions) {
      for (const auto& c : r.captions) {
        e.texts.push_back(tokenize(c, vocab));
        e.raw.push_back(c);
      }
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<Example> prepare_examples(const Dataset& dataset, const Vocabulary& vocab, bool with_captions) {
  std::vector<VideoClipFeatures> features;
  features.reserve(dataset.records.size());
  for (const auto& r : dataset.records) features.push_back(dataset.features(r));
  return prepare_examples(dataset.records, features, vocab, with_captions);
}

TokenSequence generation_target(const TokenSequence& text, bool is_title, std::size_t max_len) {
  if (max_len < 3) throw ArgumentError("generation_target: max_len must be at least 3");
  TokenSequence t{special::kBos, is_title ? special::kTitle : special::kCaption};
  const std::size_t room = max_len - 3;
  t.insert(t.end(), text.begin(), text.begin() + static_cast<std::ptrdiff_t>(std::min(room, text.size())));
  t.push_back(special::kEos);
  return t;
}

std::vector<LossRecord> train_stage(AlwigModel& model, const std::vector<Example>& examples,
                                    const StageOptions& options, const std::string& stage, bool titles_only,
                                    const std::function<void(std::size_t)>& after_epoch) {
  std::vector<LossRecord> log;
  if (options.epochs == 0) return log;
  if (examples.size() < 2) throw ArgumentError("train_stage: need at least two examples for in-batch negatives");
  if (options.batch_size < 2) throw ArgumentError("train_stage: batch_size must be at least 2");

  const auto& cfg = model.config();
  OptimizerState state(options.adamw);
  LrSchedule schedule = options.schedule;
  schedule.total_epochs = static_cast<double>(options.epochs);
  schedule.warmup_epochs = std::min(schedule.warmup_epochs, schedule.total_epochs);
  std::mt19937_64 rng(options.seed);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  const auto batches = make_batches(examples.size(), options.batch_size);
  auto& params = model.parameters();

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    LossRecord rec{stage, epoch + 1, 0.0, 0.0, 0.0};
    for (std::size_t b = 0; b < batches.size(); ++b) {
      std::vector<FusionEmbeddings> fs;
      std::vector<TextEmbeddings> ws;
      std::vector<Tensor> gens;
      for (std::size_t i = batches[b].first; i < batches[b].second; ++i) {
        const auto& ex = examples[order[i]];
        const std::size_t pick = titles_only ? 0 : (epoch + order[i]) % ex.texts.size();
        const auto& text = ex.texts[pick];
        fs.push_back(model.fuse(ex.tags, ex.video));
        ws.push_back(model.text_encode(clip(text, cfg.max_text_len)));
        gens.push_back(model.gen_loss(fs.back(), generation_target(text, pick == 0, cfg.max_text_len)));
      }
      const Tensor align = model.align_loss(fs, ws);
      Tensor gen = gens.front();
      for (std::size_t g = 1; g < gens.size(); ++g) gen = add(gen, gens[g]);
      gen = scale(gen, 1.0 / static_cast<double>(gens.size()));
      Tensor loss;
      try {
        loss = total_loss(align, gen);
      } catch (const NumericError& e) {
        throw NumericError(stage + " training: " + e.what() + " at epoch " + std::to_string(epoch + 1) + ", step " +
                           std::to_string(b + 1));
      }
      rec.align += align.item();
      rec.gen += gen.item();
      rec.total += loss.item();
      zero_grads(params);
      loss.backward();
      const double position = static_cast<double>(epoch) + static_cast<double>(b) / static_cast<double>(batches.size());
      try {
        adamw_step(params, state, lr_at(schedule, position));
      } catch (const NumericError& e) {
        throw NumericError(stage + " training: " + e.what() + " at epoch " + std::to_string(epoch + 1) + ", step " +
                           std::to_string(b + 1));
      }
      model.clamp_temperature();
    }
    const double nb = static_cast<double>(batches.size());
    rec.align /= nb;
    rec.gen /= nb;
    rec.total /= nb;
    log.push_back(rec);
    if (after_epoch) after_epoch(epoch + 1);
  }
  zero_grads(params);
  return log;
}

SimilarityMatrix similarity_matrix(const AlwigModel& model, const std::vector<Example>& examples) {
  NoGradGuard no_grad;
  const auto& cfg = model.config();
  SimilarityMatrix sim;
  sim.videos = examples.size();
  std::vector<std::vector<double>> video_vecs;
  std::vector<std::vector<double>> text_vecs;
  for (std::size_t v = 0; v < examples.size(); ++v) {
    const Tensor pv = model.project_video(model.fuse(examples[v].tags, examples[v].video));
    video_vecs.emplace_back(pv.data().begin(), pv.data().end());
    for (const auto& t : examples[v].texts) {
      const Tensor pt = model.project_text(model.text_encode(clip(t, cfg.max_text_len)));
      text_vecs.emplace_back(pt.data().begin(), pt.data().end());
      sim.text_to_video.push_back(v);
    }
  }
  sim.texts = text_vecs.size();
  sim.scores.resize(sim.texts * sim.videos);
  for (std::size_t t = 0; t < sim.texts; ++t) {
    for (std::size_t v = 0; v < sim.videos; ++v) {
      sim.scores[t * sim.videos + v] =
          std::inner_product(text_vecs[t].begin(), text_vecs[t].end(), video_vecs[v].begin(), 0.0);
    }
  }
  return sim;
}

std::vector<TokenId> special_tokens_banned_in_output() {
  std::vector<TokenId> banned;
  for (TokenId id = 0; id < special::kCount; ++id) {
    if (id != special::kEos) banned.push_back(id);
  }
  return banned;
}

EvalOutcome evaluate_model(const AlwigModel& model, const std::vector<Example>& examples, const Vocabulary& vocab,
                           const Lexicon& lexicon, const EvalOptions& options, const ProtocolConstants& protocol) {
  if (examples.empty()) throw InputError("evaluate: empty split");
  EvalOutcome out;
  ModelOutputs outputs;
  GoldReferences gold;
  BeamOptions beam;
  beam.beam = options.beam;
  beam.max_len = options.max_decode_len;
  beam.banned = special_tokens_banned_in_output();

  NoGradGuard no_grad;
  for (const auto& ex : examples) {
    if (ex.raw.size() < 2) throw InputError("evaluate: item '" + ex.video_id + "' has no caption references");
    const FusionEmbeddings f = model.fuse(ex.tags, ex.video);
    DecodedItem item;
    item.video_id = ex.video_id;
    const Hypothesis th = model.beam_search_decode(f, {special::kBos, special::kTitle}, beam);
    const Hypothesis ch = model.beam_search_decode(f, {special::kBos, special::kCaption}, beam);
    item.title_tokens = th.tokens;
    item.title_score = th.score();
    item.caption_tokens = ch.tokens;
    item.caption_score = ch.score();
    outputs.titles.push_back(segment_words(detokenize(th.tokens, vocab), lexicon));
    outputs.captions.push_back(segment_words(detokenize(ch.tokens, vocab), lexicon));
    gold.titles.items.push_back({segment_words(ex.raw[0], lexicon)});
    std::vector<Words> caps;
    for (std::size_t i = 1; i < ex.raw.size(); ++i) caps.push_back(segment_words(ex.raw[i], lexicon));
    gold.captions.items.push_back(std::move(caps));
    out.decoded.push_back(std::move(item));
  }
  out.report = evaluate_split(outputs, gold, similarity_matrix(model, examples), protocol);
  return out;
}

// ---------------------------------------------------------------------------

ProtocolConstants TrainConfig::protocol() const {
  ProtocolConstants p;
  p.filter_threshold = filter_threshold;
  p.beam_size = static_cast<int>(beam);
  p.weight_decay = adamw.weight_decay;
  p.warmup_epochs = schedule.warmup_epochs;
  p.peak_lr = schedule.peak_lr;
  p.final_lr = schedule.final_lr;
  p.total_epochs = schedule.total_epochs;
  return p;
}

const std::set<std::string>& train_config_keys() {
  static const std::set<std::string> keys = {
      "task",
      "variant",
      "seed",
      "data.vocab",
      "data.lexicon",
      "data.pretrain",
      "data.train",
      "data.validation",
      "model.video_dim",
      "model.hidden_dim",
      "model.shared_dim",
      "model.encoder_layers",
      "model.decoder_layers",
      "model.heads",
      "model.max_text_len",
      "model.max_frames",
      "model.max_tags",
      "model.tau_init",
      "model.tau_min",
      "scorer.hidden_dim",
      "scorer.shared_dim",
      "scorer.text_layers",
      "scorer.heads",
      "train.pretrain_epochs",
      "train.finetune_epochs",
      "train.batch_size",
      "train.weight_decay",
      "train.beta1",
      "train.beta2",
      "train.epsilon",
      "schedule.warmup_epochs",
      "schedule.peak_lr",
      "schedule.final_lr",
      "schedule.total_epochs",
      "eval.beam",
      "eval.max_decode_len",
      "filter.threshold",
  };
  return keys;
}

TrainConfig parse_train_config(const KeyValueConfig& kv, const std::filesystem::path& base_dir) {
  kv.require_known(train_config_keys());
  TrainConfig c;
  auto path = [&](const std::string& key) -> std::filesystem::path {
    const std::string v = kv.get_string(key, "");
    if (v.empty()) return {};
    std::filesystem::path p(v);
    return p.is_absolute() ? p : base_dir / p;
  };
  c.task = kv.get_string("task", c.task);
  if (c.task != "alwig" && c.task != "scorer") throw UsageError("config key 'task': expected alwig or scorer");
  try {
    c.variant = parse_variant(kv.get_string("variant", "full"));
  } catch (const ArgumentError& e) {
    throw UsageError(std::string("config key 'variant': ") + e.what());
  }
  c.seed = kv.get_u64("seed", c.seed);
  c.vocab = path("data.vocab");
  c.lexicon = path("data.lexicon");
  c.pretrain_data = path("data.pretrain");
  c.train_data = path("data.train");
  c.validation_data = path("data.validation");
  if (c.vocab.empty()) throw UsageError("config key 'data.vocab' is required");
  if (c.train_data.empty()) throw UsageError("config key 'data.train' is required");

  auto& m = c.model;
  m.video_dim = kv.get_size("model.video_dim", m.video_dim);
  m.hidden_dim = kv.get_size("model.hidden_dim", m.hidden_dim);
  m.shared_dim = kv.get_size("model.shared_dim", m.shared_dim);
  m.encoder_layers = kv.get_size("model.encoder_layers", m.encoder_layers);
  m.decoder_layers = kv.get_size("model.decoder_layers", m.decoder_layers);
  m.heads = kv.get_size("model.heads", m.heads);
  m.max_text_len = kv.get_size("model.max_text_len", m.max_text_len);
  m.max_frames = kv.get_size("model.max_frames", m.max_frames);
  m.max_tags = kv.get_size("model.max_tags", m.max_tags);
  m.tau_init = kv.get_double("model.tau_init", m.tau_init);
  m.tau_min = kv.get_double("model.tau_min", m.tau_min);
  m = ablate(m, c.variant);

  auto& s = c.scorer;
  s.video_dim = m.video_dim;
  s.max_text_len = m.max_text_len;
  s.tau_init = m.tau_init;
  s.tau_min = m.tau_min;
  s.hidden_dim = kv.get_size("scorer.hidden_dim", s.hidden_dim);
  s.shared_dim = kv.get_size("scorer.shared_dim", s.shared_dim);
  s.text_layers = kv.get_size("scorer.text_layers", s.text_layers);
  s.heads = kv.get_size("scorer.heads", s.heads);

  c.pretrain_epochs = kv.get_size("train.pretrain_epochs", c.pretrain_epochs);
  c.finetune_epochs = kv.get_size("train.finetune_epochs", c.finetune_epochs);
  c.batch_size = kv.get_size("train.batch_size", c.batch_size);
  c.adamw.weight_decay = kv.get_double("train.weight_decay", c.adamw.weight_decay);
  c.adamw.betas.first = kv.get_double("train.beta1", c.adamw.betas.first);
  c.adamw.betas.second = kv.get_double("train.beta2", c.adamw.betas.second);
  c.adamw.epsilon = kv.get_double("train.epsilon", c.adamw.epsilon);
  c.schedule.warmup_epochs = kv.get_double("schedule.warmup_epochs", c.schedule.warmup_epochs);
  c.schedule.peak_lr = kv.get_double("schedule.peak_lr", c.schedule.peak_lr);
  c.schedule.final_lr = kv.get_double("schedule.final_lr", c.schedule.final_lr);
  c.schedule.total_epochs = kv.get_double("schedule.total_epochs", c.schedule.total_epochs);
  c.beam = kv.get_size("eval.beam", c.beam);
  c.max_decode_len = kv.get_size("eval.max_decode_len", c.max_decode_len);
  c.filter_threshold = kv.get_double("filter.threshold", c.filter_threshold);

  if (c.batch_size < 2) throw UsageError("config key 'train.batch_size': must be at least 2");
  if (c.beam == 0) throw UsageError("config key 'eval.beam': must be positive");
  if (!(c.filter_threshold >= -1.0 && c.filter_threshold <= 1.0)) {
    throw UsageError("config key 'filter.threshold': must lie in [-1, 1]");
  }
  return c;
}

namespace {

std::map<std::string, std::string> vocab_metadata(const Vocabulary& vocab) {
  return {{"vocab.fingerprint", std::to_string(vocab.fingerprint())}, {"vocab.size", std::to_string(vocab.size())}};
}

void check_vocab(const Checkpoint& ckpt, const Vocabulary& vocab) {
  auto it = ckpt.metadata.find("vocab.fingerprint");
  if (it == ckpt.metadata.end()) throw DataError("checkpoint metadata lacks 'vocab.fingerprint'");
  if (it->second != std::to_string(vocab.fingerprint())) {
    throw DataError("vocabulary does not match the one the checkpoint was trained with");
  }
}

void check_kind(const Checkpoint& ckpt, const std::string& kind) {
  auto it = ckpt.metadata.find("kind");
  if (it == ckpt.metadata.end()) throw DataError("checkpoint metadata lacks 'kind'");
  if (it->second != kind) throw DataError("checkpoint holds a " + it->second + " model, expected " + kind);
}

StageOptions stage_options(const TrainConfig& c, std::size_t epochs, std::uint64_t salt) {
  StageOptions o;
  o.epochs = epochs;
  o.batch_size = c.batch_size;
  o.schedule = c.schedule;
  o.adamw = c.adamw;
  o.seed = c.seed * 1000003ULL + salt;
  return o;
}

}  // namespace

TrainOutcome run_training(const TrainConfig& c) {
  const Vocabulary vocab = Vocabulary::load(c.vocab);
  LoadOptions labeled;
  labeled.require_tags = c.task == "alwig";
  const Dataset train = load_dataset(c.train_data, labeled);
  TrainOutcome out;

  if (c.task == "scorer") {
    ScorerConfig sc = c.scorer;
    sc.vocab_size = vocab.size();
    TwoStreamModel model(sc, c.seed);
    std::vector<ScorerInput> pairs;
    for (const auto& r : train.records) pairs.push_back({r.video_id, r.title, train.features(r), tokenize(r.title, vocab)});
    ScorerTrainOptions o;
    o.epochs = c.finetune_epochs;
    o.batch_size = c.batch_size;
    o.schedule = c.schedule;
    o.adamw = c.adamw;
    o.seed = c.seed;
    const auto losses = train_two_stream(model, pairs, o);
    for (std::size_t e = 0; e < losses.size(); ++e) out.log.push_back({"scorer", e + 1, losses[e], 0.0, losses[e]});
    auto meta = sc.to_metadata();
    meta.merge(vocab_metadata(vocab));
    meta["kind"] = "scorer";
    meta["seed"] = std::to_string(c.seed);
    out.checkpoint = capture(model.parameters(), meta);
    return out;
  }

  ModelConfig mc = ablate(c.model, c.variant);
  mc.vocab_size = vocab.size();
  AlwigModel model(mc, c.seed);
  const auto train_examples = prepare_examples(train, vocab, true);

  if (!mc.skip_pretrain && c.pretrain_epochs > 0) {
    std::vector<Example> pre;
    if (!c.pretrain_data.empty()) {
      LoadOptions weak;
      weak.require_tags = true;
      pre = prepare_examples(load_dataset(c.pretrain_data, weak), vocab, false);
    } else {
      pre = prepare_examples(train, vocab, false);
    }
    auto log = train_stage(model, pre, stage_options(c, c.pretrain_epochs, 1), "pretrain", true);
    out.log.insert(out.log.end(), log.begin(), log.end());
  }

  auto meta = mc.to_metadata();
  meta.merge(vocab_metadata(vocab));
  meta["kind"] = "alwig";
  meta["seed"] = std::to_string(c.seed);

  std::function<void(std::size_t)> select;
  std::vector<Example> validation;
  double best = -1.0;
  if (!c.validation_data.empty()) {
    LoadOptions opts;
    opts.require_tags = true;
    validation = prepare_examples(load_dataset(c.validation_data, opts), vocab, true);
    select = [&](std::size_t epoch) {
      const double r1 = recall_at_k(similarity_matrix(model, validation), 1, RetrievalDirection::text_to_video);
      if (r1 > best) {
        best = r1;
        auto m = meta;
        m["selected_epoch"] = std::to_string(epoch);
        m["selected_validation_t2v_r1"] = real_str(r1);
        out.checkpoint = capture(model.parameters(), m);
      }
    };
  }
  auto log = train_stage(model, train_examples, stage_options(c, c.finetune_epochs, 2), "finetune", false, select);
  out.log.insert(out.log.end(), log.begin(), log.end());
  if (best < 0.0) out.checkpoint = capture(model.parameters(), meta);
  return out;
}

AlwigModel model_from_checkpoint(const Checkpoint& ckpt, const Vocabulary& vocab) {
  check_kind(ckpt, "alwig");
  check_vocab(ckpt, vocab);
  AlwigModel model(ModelConfig::from_metadata(ckpt.metadata), 0);
  restore(ckpt, model.parameters());
  return model;
}

TwoStreamModel scorer_from_checkpoint(const Checkpoint& ckpt, const Vocabulary& vocab) {
  check_kind(ckpt, "scorer");
  check_vocab(ckpt, vocab);
  TwoStreamModel model(ScorerConfig::from_metadata(ckpt.metadata), 0);
  restore(ckpt, model.parameters());
  return model;
}

std::string loss_log_to_tsv(const std::vector<LossRecord>& log) {
  std::ostringstream os;
  os << "stage\tepoch\talign\tgen\ttotal\n";
  for (const auto& r : log) {
    os << r.stage << '\t' << r.epoch << '\t' << real_str(r.align) << '\t' << real_str(r.gen) << '\t'
       << real_str(r.total) << '\n';
  }
  return os.str();
}

FilterSummary summarize_filter(const FilterResult& result, double threshold) {
  FilterSummary s;
  s.threshold = threshold;
  s.total = result.scored.size();
  s.kept = result.kept.size();
  for (const auto& p : result.scored) {
    const double pos = (std::clamp(p.score, -1.0, 1.0) + 1.0) / 2.0 * 20.0;
    const auto bin = std::min<std::size_t>(19, static_cast<std::size_t>(std::floor(pos)));
    ++s.histogram[bin];
  }
  return s;
}

std::string filter_summary_to_text(const FilterSummary& s) {
  std::ostringstream os;
  os << "threshold = " << real_str(s.threshold) << '\n'
     << "total = " << s.total << '\n'
     << "kept = " << s.kept << '\n'
     << "removed = " << (s.total - s.kept) << '\n'
     << "kept_fraction = " << fixed(s.kept_fraction(), 6) << '\n';
  for (std::size_t b = 0; b < s.histogram.size(); ++b) {
    const double lo = -1.0 + 0.1 * static_cast<double>(b);
    os << "bin[" << fixed(lo, 1) << "," << fixed(lo + 0.1, 1) << (b + 1 == s.histogram.size() ? "]" : ")")
       << " = " << s.histogram[b] << '\n';
  }
  return os.str();
}

std::string scored_pair_to_json(const ScoredPair& p) {
  char score[64];
  std::snprintf(score, sizeof score, "%.6f", p.score);
  return R"({"video_id":)" + nlohmann::json(p.video_id).dump() + R"(,"score":)" + score +
         R"(,"kept":)" + (p.kept ? "true" : "false") + "}";
}

// ---------------------------------------------------------------------------

CorpusStats corpus_stats(const std::vector<DatasetRecord>& records, const Lexicon& lexicon) {
  CorpusStats s;
  s.items = records.size();
  double title_words = 0.0;
  double caption_words = 0.0;
  double tags = 0.0;
  std::size_t captions = 0;
  for (const auto& r : records) {
    const Words tw = segment_words(r.title, lexicon);
    ++s.title_length_histogram[tw.size()];
    title_words += static_cast<double>(tw.size());
    s.unique_words.insert(tw.begin(), tw.end());
    for (const auto& c : r.captions) {
      const Words cw = segment_words(c, lexicon);
      ++s.caption_length_histogram[cw.size()];
      caption_words += static_cast<double>(cw.size());
      s.unique_words.insert(cw.begin(), cw.end());
      ++captions;
    }
    ++s.tag_count_histogram[r.tags.size()];
    tags += static_cast<double>(r.tags.size());
  }
  if (s.items) {
    s.mean_title_length = title_words / static_cast<double>(s.items);
    s.mean_tag_count = tags / static_cast<double>(s.items);
  }
  if (captions) s.mean_caption_length = caption_words / static_cast<double>(captions);
  return s;
}

StatsReport compare_corpora(const CorpusStats& first, const std::optional<CorpusStats>& second) {
  StatsReport r;
  r.first = first;
  r.second = second;
  if (second) {
    for (const auto& w : first.unique_words) r.overlap += second->unique_words.count(w);
    auto pct = [](std::size_t part, std::size_t whole) {
      return whole ? 100.0 * static_cast<double>(part) / static_cast<double>(whole) : 0.0;
    };
    r.coverage_first_in_second = pct(r.overlap, first.unique_words.size());
    r.coverage_second_in_first = pct(r.overlap, second->unique_words.size());
  }
  return r;
}

namespace {

void write_corpus_stats(std::ostream& os, const std::string& prefix, const CorpusStats& s) {
  os << prefix << "items = " << s.items << '\n'
     << prefix << "mean_title_length = " << fixed(s.mean_title_length, 4) << '\n'
     << prefix << "mean_caption_length = " << fixed(s.mean_caption_length, 4) << '\n'
     << prefix << "mean_tag_count = " << fixed(s.mean_tag_count, 4) << '\n'
     << prefix << "unique_words = " << s.unique_words.size() << '\n';
  for (const auto& [len, n] : s.title_length_histogram) os << prefix << "title_length." << len << " = " << n << '\n';
  for (const auto& [len, n] : s.caption_length_histogram) os << prefix << "caption_length." << len << " = " << n << '\n';
  for (const auto& [k, n] : s.tag_count_histogram) os << prefix << "tag_count." << k << " = " << n << '\n';
}

}  // namespace

std::string stats_to_text(const StatsReport& r) {
  std::ostringstream os;
  write_corpus_stats(os, r.second ? "a." : "", r.first);
  if (r.second) {
    write_corpus_stats(os, "b.", *r.second);
    os << "overlap = " << r.overlap << '\n'
       << "coverage_a_in_b = " << fixed(r.coverage_first_in_second, 2) << '\n'
       << "coverage_b_in_a = " << fixed(r.coverage_second_in_first, 2) << '\n';
  }
  return os.str();
}

}  // namespace alwig
