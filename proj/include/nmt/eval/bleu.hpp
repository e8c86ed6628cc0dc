#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace nmt::eval {

using Tokens = std::vector<std::string>;

struct NgramMatches {
  std::size_t clipped = 0;
  std::size_t total = 0;
};

/// Corpus-wide clipped n-gram matches: each hypothesis n-gram counts at most
/// as often as it appears in the most generous of its references.
/// Throws std::invalid_argument on a count mismatch or n == 0.
NgramMatches modified_precision(const std::vector<Tokens>& hypotheses, const std::vector<Tokens>& references,
                                std::size_t n);
NgramMatches modified_precision(const std::vector<Tokens>& hypotheses,
                                const std::vector<std::vector<Tokens>>& references, std::size_t n);

// 1 when hyp_len >= ref_len, exp(1 - ref_len / hyp_len) otherwise, 0 for
// an empty hypothesis side.
double brevity_penalty(std::size_t hyp_len, std::size_t ref_len);

enum class Smoothing { kNone, kAddOne };

Smoothing parse_smoothing(const std::string& s);
std::string to_string(Smoothing s);

struct BleuReport {
  std::vector<double> precisions;  // p_1 .. p_max_n
  std::vector<NgramMatches> matches;
  double brevity_penalty = 0.0;
  double score = 0.0;  // in [0, 1]
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;

  double percent() const { return 100.0 * score; }
  nlohmann::json to_json() const;
};

// Recomputes the score from stored precisions and brevity penalty.
double score_from(const std::vector<double>& precisions, double brevity_penalty);

/// Corpus BLEU with uniform weights over orders 1..max_n. With
/// Smoothing::kNone any zero precision gives 0; kAddOne adds one to the
/// numerator and denominator of orders with no matches.
/// Reference length is the closest reference length per hypothesis.
BleuReport corpus_bleu(const std::vector<Tokens>& hypotheses, const std::vector<Tokens>& references,
                       std::size_t max_n = 4, Smoothing smoothing = Smoothing::kNone);
BleuReport corpus_bleu(const std::vector<Tokens>& hypotheses, const std::vector<std::vector<Tokens>>& references,
                       std::size_t max_n = 4, Smoothing smoothing = Smoothing::kNone);

// Whitespace tokenization of each line, optionally lowercased.
std::vector<Tokens> tokenize_lines(const std::vector<std::string>& lines, bool lowercase);

}  // namespace nmt::eval
