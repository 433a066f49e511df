#include "alwig/metrics.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>

#include <json.hpp>

#include "alwig/error.hpp"

namespace alwig {

double bleu4(const Words& hyp, const std::vector<Words>& refs) {
  if (refs.empty()) throw InputError("bleu4: no references");
  if (hyp.empty()) return 0.0;

  double log_sum = 0.0;
  for (std::size_t n = 1; n <= kBleuOrder; ++n) {
    const auto hyp_counts = ngrams(hyp, n);
    std::map<Ngram, std::size_t> max_ref;
    for (const auto& r : refs) {
      for (const auto& [g, c] : ngrams(r, n)) {
        auto& slot = max_ref[g];
        slot = std::max(slot, c);
      }
    }
    std::size_t clipped = 0;
    std::size_t total = 0;
    for (const auto& [g, c] : hyp_counts) {
      total += c;
      auto it = max_ref.find(g);
      if (it != max_ref.end()) clipped += std::min(c, it->second);
    }
    if (clipped == 0) return 0.0;
    log_sum += std::log(static_cast<double>(clipped) / static_cast<double>(total));
  }

  const auto c = static_cast<double>(hyp.size());
  std::size_t closest = refs[0].size();
  for (const auto& r : refs) {
    const auto d = std::abs(static_cast<double>(r.size()) - c);
    const auto best = std::abs(static_cast<double>(closest) - c);
    if (d < best || (d == best && r.size() < closest)) closest = r.size();
  }
  const auto r = static_cast<double>(closest);
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum / static_cast<double>(kBleuOrder));
}

// ---------------------------------------------------------------------------
// CIDEr-D

namespace {

struct NgramVectors {
  std::array<std::map<Ngram, double>, kBleuOrder> vec;
  std::array<double, kBleuOrder> norm{};
  std::size_t length = 0;
};

using CountsByOrder = std::array<NgramCounts, kBleuOrder>;

CountsByOrder count_all(const Words& w) {
  CountsByOrder c;
  for (std::size_t n = 1; n <= kBleuOrder; ++n) c[n - 1] = ngrams(w, n);
  return c;
}

NgramVectors to_vectors(const CountsByOrder& counts, std::size_t length, const std::map<Ngram, std::size_t>& df,
                        double log_items) {
  NgramVectors v;
  v.length = length;
  for (std::size_t n = 0; n < kBleuOrder; ++n) {
    for (const auto& [g, tf] : counts[n]) {
      auto it = df.find(g);
      const double d = std::log(std::max(1.0, it == df.end() ? 0.0 : static_cast<double>(it->second)));
      const double w = static_cast<double>(tf) * (log_items - d);
      v.vec[n][g] = w;
      v.norm[n] += w * w;
    }
    v.norm[n] = std::sqrt(v.norm[n]);
  }
  return v;
}

std::array<double, kBleuOrder> cider_sim(const NgramVectors& hyp, const NgramVectors& ref) {
  std::array<double, kBleuOrder> val{};
  const double delta = static_cast<double>(hyp.length) - static_cast<double>(ref.length);
  for (std::size_t n = 0; n < kBleuOrder; ++n) {
    for (const auto& [g, h] : hyp.vec[n]) {
      auto it = ref.vec[n].find(g);
      if (it != ref.vec[n].end()) val[n] += std::min(h, it->second) * it->second;
    }
    if (hyp.norm[n] != 0.0 && ref.norm[n] != 0.0) val[n] /= hyp.norm[n] * ref.norm[n];
    val[n] *= std::exp(-(delta * delta) / (2.0 * kCiderSigma * kCiderSigma));
  }
  return val;
}

}  // namespace

CiderResult cider(const std::vector<Words>& hyps, const ReferenceSet& refs) {
  if (refs.items.empty()) throw InputError("cider: empty reference corpus");
  if (hyps.size() != refs.items.size()) {
    throw InputError("cider: " + std::to_string(hyps.size()) + " hypotheses for " + std::to_string(refs.items.size()) +
                     " reference items");
  }
  std::vector<std::vector<CountsByOrder>> ref_counts(refs.items.size());
  std::map<Ngram, std::size_t> df;
  for (std::size_t i = 0; i < refs.items.size(); ++i) {
    if (refs.items[i].empty()) throw InputError("cider: item " + std::to_string(i) + " has no references");
    std::set<Ngram> seen;
    for (const auto& r : refs.items[i]) {
      ref_counts[i].push_back(count_all(r));
      for (const auto& order : ref_counts[i].back())
        for (const auto& [g, c] : order) seen.insert(g);
    }
    for (const auto& g : seen) ++df[g];
  }
  const double log_items = std::log(static_cast<double>(refs.items.size()));

  CiderResult result;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    const auto hv = to_vectors(count_all(hyps[i]), hyps[i].size(), df, log_items);
    std::array<double, kBleuOrder> acc{};
    for (std::size_t k = 0; k < refs.items[i].size(); ++k) {
      const auto rv = to_vectors(ref_counts[i][k], refs.items[i][k].size(), df, log_items);
      const auto s = cider_sim(hv, rv);
      for (std::size_t n = 0; n < kBleuOrder; ++n) acc[n] += s[n];
    }
    double mean_n = 0.0;
    for (double a : acc) mean_n += a;
    mean_n /= static_cast<double>(kBleuOrder);
    result.per_item.push_back(mean_n / static_cast<double>(refs.items[i].size()) * 10.0);
  }
  double total = 0.0;
  for (double s : result.per_item) total += s;
  result.corpus = total / static_cast<double>(result.per_item.size());
  return result;
}

// ---------------------------------------------------------------------------
// Rouge-L

std::size_t lcs_length(const Words& a, const Words& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(const Words& hyp, const std::vector<Words>& refs) {
  if (refs.empty()) throw InputError("rouge_l: no references");
  if (hyp.empty()) return 0.0;
  const double beta2 = kRougeBeta * kRougeBeta;
  double best = 0.0;
  for (const auto& r : refs) {
    if (r.empty()) continue;
    const auto lcs = static_cast<double>(lcs_length(hyp, r));
    if (lcs == 0.0) continue;
    const double p = lcs / static_cast<double>(hyp.size());
    const double rec = lcs / static_cast<double>(r.size());
    best = std::max(best, (1.0 + beta2) * p * rec / (rec + beta2 * p));
  }
  return best;
}

// ---------------------------------------------------------------------------
// Recall@K

void SimilarityMatrix::validate() const {
  if (texts == 0 || videos == 0) throw InputError("similarity matrix is empty");
  if (scores.size() != texts * videos) throw InputError("similarity matrix has wrong number of scores");
  if (text_to_video.size() != texts) throw InputError("similarity matrix: ground truth must cover every text");
  for (auto v : text_to_video) {
    if (v >= videos) throw InputError("similarity matrix: ground-truth video index out of range");
  }
  for (double s : scores) {
    if (!std::isfinite(s)) throw InputError("similarity matrix: non-finite score");
  }
}

namespace {

// Rank of candidate `target` among `scores` (0 = best); ties favour lower index.
template <class Score>
std::size_t rank_of(std::size_t count, std::size_t target, Score&& score) {
  const double t = score(target);
  std::size_t rank = 0;
  for (std::size_t c = 0; c < count; ++c) {
    const double s = score(c);
    if (s > t || (s == t && c < target)) ++rank;
  }
  return rank;
}

}  // namespace

double recall_at_k(const SimilarityMatrix& sim, std::size_t k, RetrievalDirection dir) {
  sim.validate();
  if (k == 0) throw ArgumentError("recall_at_k: k must be at least 1");
  std::size_t hits = 0;
  std::size_t queries = 0;
  if (dir == RetrievalDirection::text_to_video) {
    const std::size_t kk = std::min(k, sim.videos);
    for (std::size_t t = 0; t < sim.texts; ++t) {
      ++queries;
      const auto r = rank_of(sim.videos, sim.text_to_video[t], [&](std::size_t v) { return sim.at(t, v); });
      if (r < kk) ++hits;
    }
  } else {
    const std::size_t kk = std::min(k, sim.texts);
    for (std::size_t v = 0; v < sim.videos; ++v) {
      ++queries;
      for (std::size_t t = 0; t < sim.texts; ++t) {
        if (sim.text_to_video[t] != v) continue;
        const auto r = rank_of(sim.texts, t, [&](std::size_t c) { return sim.at(c, v); });
        if (r < kk) {
          ++hits;
          break;
        }
      }
    }
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(queries);
}

bool has_target_ties(const SimilarityMatrix& sim) {
  sim.validate();
  for (std::size_t t = 0; t < sim.texts; ++t) {
    const auto gt = sim.text_to_video[t];
    for (std::size_t v = 0; v < sim.videos; ++v) {
      if (v != gt && sim.at(t, v) == sim.at(t, gt)) return true;
    }
    for (std::size_t o = 0; o < sim.texts; ++o) {
      if (o != t && sim.text_to_video[o] != gt && sim.at(o, gt) == sim.at(t, gt)) return true;
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// Report

GenerationScores score_generation(const std::vector<Words>& hyps, const ReferenceSet& refs) {
  if (hyps.empty()) throw InputError("generation scoring needs at least one hypothesis");
  if (hyps.size() != refs.size()) {
    throw InputError("generation scoring: " + std::to_string(hyps.size()) + " hypotheses for " +
                     std::to_string(refs.size()) + " reference items");
  }
  GenerationScores s;
  s.cider = cider(hyps, refs).corpus;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    s.bleu4 += bleu4(hyps[i], refs.items[i]);
    s.rouge_l += rouge_l(hyps[i], refs.items[i]);
  }
  s.bleu4 /= static_cast<double>(hyps.size());
  s.rouge_l /= static_cast<double>(hyps.size());
  return s;
}

EvalReport evaluate_split(const ModelOutputs& outputs, const GoldReferences& gold, const SimilarityMatrix& sim,
                          const ProtocolConstants& protocol) {
  if (outputs.titles.empty() || outputs.captions.empty()) throw InputError("evaluate_split: empty hypothesis set");
  sim.validate();
  const std::size_t n = sim.videos;
  if (outputs.titles.size() != n || outputs.captions.size() != n || gold.titles.size() != n ||
      gold.captions.size() != n) {
    throw InputError("evaluate_split: item counts disagree (videos " + std::to_string(n) + ", title hyps " +
                     std::to_string(outputs.titles.size()) + ", caption hyps " +
                     std::to_string(outputs.captions.size()) + ", title refs " + std::to_string(gold.titles.size()) +
                     ", caption refs " + std::to_string(gold.captions.size()) + ")");
  }
  EvalReport r;
  r.protocol = protocol;
  r.videos = sim.videos;
  r.texts = sim.texts;
  r.t2v_r1 = recall_at_k(sim, 1, RetrievalDirection::text_to_video);
  r.t2v_r5 = recall_at_k(sim, 5, RetrievalDirection::text_to_video);
  r.t2v_r10 = recall_at_k(sim, 10, RetrievalDirection::text_to_video);
  r.v2t_r1 = recall_at_k(sim, 1, RetrievalDirection::video_to_text);
  r.v2t_r5 = recall_at_k(sim, 5, RetrievalDirection::video_to_text);
  r.v2t_r10 = recall_at_k(sim, 10, RetrievalDirection::video_to_text);
  r.degenerate_ties = has_target_ties(sim);
  r.title = score_generation(outputs.titles, gold.titles);
  r.caption = score_generation(outputs.captions, gold.captions);
  return r;
}

namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

// Shortest form that reads back to the same double.
std::string real(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace

std::string protocol_header(const ProtocolConstants& p) {
  std::string s;
  s += "# filter_threshold = " + real(p.filter_threshold) + "\n";
  s += "# beam_size = " + std::to_string(p.beam_size) + "\n";
  s += "# ngram_order = " + std::to_string(p.ngram_order) + "\n";
  s += "# weight_decay = " + real(p.weight_decay) + "\n";
  s += "# lr_schedule = linear warmup 0 -> " + real(p.peak_lr) + " over " + real(p.warmup_epochs) +
       " epochs, cosine to " + real(p.final_lr) + " at epoch " + real(p.total_epochs) + "\n";
  s += std::string("# meteor = ") + (p.meteor ? "present" : "absent") + "\n";
  return s;
}

std::string report_to_text(const EvalReport& r) {
  std::string s = protocol_header(r.protocol);
  auto line = [&](const std::string& k, const std::string& v) { s += k + " = " + v + "\n"; };
  line("videos", std::to_string(r.videos));
  line("texts", std::to_string(r.texts));
  line("t2v_recall@1", fixed(r.t2v_r1, 1));
  line("t2v_recall@5", fixed(r.t2v_r5, 1));
  line("t2v_recall@10", fixed(r.t2v_r10, 1));
  line("v2t_recall@1", fixed(r.v2t_r1, 1));
  line("v2t_recall@5", fixed(r.v2t_r5, 1));
  line("v2t_recall@10", fixed(r.v2t_r10, 1));
  line("degenerate_ties", r.degenerate_ties ? "true" : "false");
  for (const auto& [task, g] : {std::pair{"title", r.title}, std::pair{"caption", r.caption}}) {
    const std::string t = task;
    line(t + "_cider", fixed(g.cider, 1));
    line(t + "_bleu4", fixed(g.bleu4, 1));
    line(t + "_rouge_l", fixed(g.rouge_l, 1));
    line(t + "_cider_x100", fixed(g.cider * 100.0, 1));
    line(t + "_bleu4_x100", fixed(g.bleu4 * 100.0, 1));
    line(t + "_rouge_l_x100", fixed(g.rouge_l * 100.0, 1));
  }
  return s;
}

std::string report_to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  const auto& p = r.protocol;
  j["protocol"] = {{"filter_threshold", p.filter_threshold}, {"beam_size", p.beam_size},
                   {"ngram_order", p.ngram_order},           {"weight_decay", p.weight_decay},
                   {"warmup_epochs", p.warmup_epochs},       {"peak_lr", p.peak_lr},
                   {"final_lr", p.final_lr},                 {"total_epochs", p.total_epochs},
                   {"meteor", p.meteor}};
  j["videos"] = r.videos;
  j["texts"] = r.texts;
  j["t2v_recall"] = {r.t2v_r1, r.t2v_r5, r.t2v_r10};
  j["v2t_recall"] = {r.v2t_r1, r.v2t_r5, r.v2t_r10};
  j["degenerate_ties"] = r.degenerate_ties;
  for (const auto& [task, g] : {std::pair{"title", r.title}, std::pair{"caption", r.caption}}) {
    j[task] = {{"cider", g.cider},
               {"bleu4", g.bleu4},
               {"rouge_l", g.rouge_l},
               {"cider_x100", g.cider * 100.0},
               {"bleu4_x100", g.bleu4 * 100.0},
               {"rouge_l_x100", g.rouge_l * 100.0}};
  }
  return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    EvalReport r;
    const auto& p = j.at("protocol");
    r.protocol.filter_threshold = p.at("filter_threshold").get<double>();
    r.protocol.beam_size = p.at("beam_size").get<int>();
    r.protocol.ngram_order = p.at("ngram_order").get<int>();
    r.protocol.weight_decay = p.at("weight_decay").get<double>();
    r.protocol.warmup_epochs = p.at("warmup_epochs").get<double>();
    r.protocol.peak_lr = p.at("peak_lr").get<double>();
    r.protocol.final_lr = p.at("final_lr").get<double>();
    r.protocol.total_epochs = p.at("total_epochs").get<double>();
    r.protocol.meteor = p.at("meteor").get<bool>();
    r.videos = j.at("videos").get<std::size_t>();
    r.texts = j.at("texts").get<std::size_t>();
    const auto t2v = j.at("t2v_recall").get<std::vector<double>>();
    const auto v2t = j.at("v2t_recall").get<std::vector<double>>();
    if (t2v.size() != 3 || v2t.size() != 3) throw DataError("report: recall arrays must have three entries");
    r.t2v_r1 = t2v[0];
    r.t2v_r5 = t2v[1];
    r.t2v_r10 = t2v[2];
    r.v2t_r1 = v2t[0];
    r.v2t_r5 = v2t[1];
    r.v2t_r10 = v2t[2];
    r.degenerate_ties = j.at("degenerate_ties").get<bool>();
    for (auto [task, g] : {std::pair{"title", &r.title}, std::pair{"caption", &r.caption}}) {
      const auto& t = j.at(task);
      g->cider = t.at("cider").get<double>();
      g->bleu4 = t.at("bleu4").get<double>();
      g->rouge_l = t.at("rouge_l").get<double>();
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("report: ") + e.what());
  }
}

}  // namespace alwig
