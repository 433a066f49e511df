#include "alwig/decode.hpp"

#include <algorithm>
#include <cmath>

#include "alwig/error.hpp"

namespace alwig {

double normalized_score(double log_prob, std::size_t length) {
  return length == 0 ? 0.0 : log_prob / static_cast<double>(length);
}

double Hypothesis::score() const { return normalized_score(log_prob, tokens.size()); }

bool better_hypothesis(const Hypothesis& a, const Hypothesis& b) {
  const double sa = a.score();
  const double sb = b.score();
  if (sa != sb) return sa > sb;
  return a.tokens < b.tokens;
}

Hypothesis beam_search(const NextTokenLogProbs& next, const BeamOptions& options) {
  if (options.beam == 0) throw ArgumentError("beam_search: beam must be at least 1");
  if (options.max_len == 0) throw ArgumentError("beam_search: max_len must be at least 1");

  std::vector<Hypothesis> live{Hypothesis{}};
  std::vector<Hypothesis> finalized;

  for (std::size_t step = 0; step < options.max_len && !live.empty(); ++step) {
    std::vector<Hypothesis> candidates;
    for (const auto& h : live) {
      const auto lp = next(h.tokens);
      for (std::size_t t = 0; t < lp.size(); ++t) {
        const auto id = static_cast<TokenId>(t);
        if (std::find(options.banned.begin(), options.banned.end(), id) != options.banned.end()) continue;
        if (!std::isfinite(lp[t])) continue;
        Hypothesis c = h;
        c.tokens.push_back(id);
        c.log_prob += lp[t];
        c.finished = id == options.eos;
        candidates.push_back(std::move(c));
      }
    }
    std::sort(candidates.begin(), candidates.end(), better_hypothesis);

    std::vector<Hypothesis> next_live;
    for (std::size_t rank = 0; rank < candidates.size(); ++rank) {
      auto& c = candidates[rank];
      if (c.finished) {
        if (rank < options.beam) finalized.push_back(std::move(c));
      } else if (next_live.size() < options.beam) {
        next_live.push_back(std::move(c));
      }
      if (next_live.size() == options.beam && rank + 1 >= options.beam) break;
    }
    live = std::move(next_live);
    if (finalized.size() >= options.beam) break;
  }

  const auto& pool = finalized.empty() ? live : finalized;
  if (pool.empty()) throw ArgumentError("beam_search: every token is banned");
  return *std::min_element(pool.begin(), pool.end(), better_hypothesis);
}

}  // namespace alwig
