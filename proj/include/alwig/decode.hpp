#pragma once

// Beam search over an abstract next-token distribution.
//
// Hypotheses are ranked by length-normalized log-probability (sum of token
// log-probs divided by the number of emitted tokens); equal scores go to the
// lexicographically smaller token sequence, so the lower token id wins. At
// each step every live hypothesis is expanded by every allowed token and the
// candidates are ranked. Candidates ending in EOS that rank inside the top
// `beam` are finalized; the best non-EOS candidates refill the live set up to
// `beam`. Search stops once `beam` hypotheses are finalized, the live set is
// empty, or `max_len` tokens have been emitted. The result is the best
// finalized hypothesis, or the best live one if nothing finalized.

#include <cstddef>
#include <functional>
#include <vector>

#include "alwig/text.hpp"

namespace alwig {

// Log-probabilities over the vocabulary for the token following `generated`.
using NextTokenLogProbs = std::function<std::vector<double>(const TokenSequence& generated)>;

struct BeamOptions {
  std::size_t beam = 3;
  std::size_t max_len = 32;
  TokenId eos = special::kEos;
  std::vector<TokenId> banned;  // never emitted
};

struct Hypothesis {
  TokenSequence tokens;  // emitted tokens, EOS included when finished
  double log_prob = 0.0;
  bool finished = false;

  double score() const;
};

double normalized_score(double log_prob, std::size_t length);

// Strict weak order used for ranking: higher score first, then lexicographic.
bool better_hypothesis(const Hypothesis& a, const Hypothesis& b);

Hypothesis beam_search(const NextTokenLogProbs& next, const BeamOptions& options);

}  // namespace alwig
