#pragma once

// Retrieval and generation metrics over segmented word lists. Meteor is not
// provided: it relies on an English synonym table with no Chinese counterpart.

#include <cstddef>
#include <string>
#include <vector>

#include "alwig/text.hpp"

namespace alwig {

inline constexpr std::size_t kBleuOrder = 4;
inline constexpr double kCiderSigma = 6.0;
inline constexpr double kRougeBeta = 1.2;

// Per item, one or more reference word lists.
struct ReferenceSet {
  std::vector<std::vector<Words>> items;

  std::size_t size() const noexcept { return items.size(); }
};

// Single-segment BLEU-4: clipped n-gram precisions (n = 1..4, clip against the
// per-n-gram max over references), geometric mean, brevity penalty against
// the closest reference length (ties prefer the shorter). No smoothing, so a
// missing order yields 0. An empty hypothesis scores 0.
double bleu4(const Words& hyp, const std::vector<Words>& refs);

// CIDEr-D: TF-IDF n-gram vectors (n = 1..4, IDF over the references of the
// evaluated items), clipped cosine, Gaussian length penalty sigma = 6, x10.
struct CiderResult {
  double corpus = 0.0;
  std::vector<double> per_item;
};
CiderResult cider(const std::vector<Words>& hyps, const ReferenceSet& refs);

// LCS F-measure with beta = 1.2, maximized over references.
double rouge_l(const Words& hyp, const std::vector<Words>& refs);

std::size_t lcs_length(const Words& a, const Words& b);

// Rows are text queries, columns are videos. Each text owns exactly one video;
// a video may own several texts.
struct SimilarityMatrix {
  std::size_t texts = 0;
  std::size_t videos = 0;
  std::vector<double> scores;              // texts x videos, row-major
  std::vector<std::size_t> text_to_video;  // ground truth per text row

  double at(std::size_t text, std::size_t video) const { return scores[text * videos + video]; }
  void validate() const;
};

enum class RetrievalDirection { text_to_video, video_to_text };

// Percentage of queries whose target lands in the top k (ties go to the lower
// index). Video-to-text scores a hit if any of the video's texts is in its top
// k. k larger than the candidate count is clamped.
double recall_at_k(const SimilarityMatrix& sim, std::size_t k, RetrievalDirection dir);

// True if some query's ground-truth score ties a competing candidate, which
// makes the recall depend on the index tie-break.
bool has_target_ties(const SimilarityMatrix& sim);

// Constants the evaluation protocol pins; echoed in every report.
struct ProtocolConstants {
  double filter_threshold = 0.3;
  int beam_size = 3;
  int ngram_order = 4;
  double weight_decay = 0.02;
  double warmup_epochs = 10;
  double peak_lr = 1e-5;
  double final_lr = 1e-6;
  double total_epochs = 30;
  bool meteor = false;

  bool operator==(const ProtocolConstants&) const = default;
};

struct GenerationScores {
  double cider = 0.0;
  double bleu4 = 0.0;
  double rouge_l = 0.0;

  bool operator==(const GenerationScores&) const = default;
};

struct EvalReport {
  ProtocolConstants protocol;
  std::size_t videos = 0;
  std::size_t texts = 0;
  double t2v_r1 = 0, t2v_r5 = 0, t2v_r10 = 0;
  double v2t_r1 = 0, v2t_r5 = 0, v2t_r10 = 0;
  bool degenerate_ties = false;
  GenerationScores title;
  GenerationScores caption;

  bool operator==(const EvalReport&) const = default;
};

struct ModelOutputs {
  std::vector<Words> titles;    // one hypothesis per video
  std::vector<Words> captions;  // one hypothesis per video
};

struct GoldReferences {
  ReferenceSet titles;
  ReferenceSet captions;
};

GenerationScores score_generation(const std::vector<Words>& hyps, const ReferenceSet& refs);

// Throws InputError on count mismatches or an empty hypothesis set.
EvalReport evaluate_split(const ModelOutputs& outputs, const GoldReferences& gold, const SimilarityMatrix& sim,
                          const ProtocolConstants& protocol = {});

// Flat key = value text at table precision (one decimal); generation metrics
// are given raw and x100.
std::string report_to_text(const EvalReport& report);
// Full-precision machine-readable form; parses back to an equal report.
std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& json);

// Header lines "# key = value" naming the protocol constants.
std::string protocol_header(const ProtocolConstants& protocol);

}  // namespace alwig
