#include "nmt/eval/bleu.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <unicode/locid.h>
#include <unicode/unistr.h>

#include "nmt/corpus/tokenize.hpp"

namespace nmt::eval {
namespace {

using Counts = std::map<std::vector<std::string>, std::size_t>;

Counts ngrams(const Tokens& t, std::size_t n) {
  Counts out;
  if (t.size() < n) return out;
  for (std::size_t i = 0; i + n <= t.size(); ++i) ++out[Tokens(t.begin() + i, t.begin() + i + n)];
  return out;
}

std::vector<std::vector<Tokens>> wrap(const std::vector<Tokens>& refs) {
  std::vector<std::vector<Tokens>> out;
  out.reserve(refs.size());
  for (const auto& r : refs) out.push_back({r});
  return out;
}

std::size_t closest_ref_len(std::size_t hyp_len, const std::vector<Tokens>& refs) {
  std::size_t best = refs.front().size();
  for (const auto& r : refs) {
    const auto d = [&](std::size_t len) { return len > hyp_len ? len - hyp_len : hyp_len - len; };
    if (d(r.size()) < d(best) || (d(r.size()) == d(best) && r.size() < best)) best = r.size();
  }
  return best;
}

}  // namespace

NgramMatches modified_precision(const std::vector<Tokens>& hypotheses,
                                const std::vector<std::vector<Tokens>>& references, std::size_t n) {
  if (n == 0) throw std::invalid_argument("n-gram order must be at least 1");
  if (hypotheses.size() != references.size()) {
    throw std::invalid_argument("got " + std::to_string(hypotheses.size()) + " hypotheses but " +
                                std::to_string(references.size()) + " references");
  }
  NgramMatches m;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    if (references[i].empty()) throw std::invalid_argument("hypothesis " + std::to_string(i) + " has no reference");
    Counts max_ref;
    for (const auto& ref : references[i]) {
      for (const auto& [gram, count] : ngrams(ref, n)) max_ref[gram] = std::max(max_ref[gram], count);
    }
    for (const auto& [gram, count] : ngrams(hypotheses[i], n)) {
      m.total += count;
      const auto it = max_ref.find(gram);
      if (it != max_ref.end()) m.clipped += std::min(count, it->second);
    }
  }
  return m;
}

NgramMatches modified_precision(const std::vector<Tokens>& hypotheses, const std::vector<Tokens>& references,
                                std::size_t n) {
  if (hypotheses.size() != references.size()) {
    throw std::invalid_argument("got " + std::to_string(hypotheses.size()) + " hypotheses but " +
                                std::to_string(references.size()) + " references");
  }
  return modified_precision(hypotheses, wrap(references), n);
}

double brevity_penalty(std::size_t hyp_len, std::size_t ref_len) {
  if (hyp_len == 0) return 0.0;
  if (hyp_len >= ref_len) return 1.0;
  return std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
}

Smoothing parse_smoothing(const std::string& s) {
  if (s == "none") return Smoothing::kNone;
  if (s == "add-one") return Smoothing::kAddOne;
  throw std::invalid_argument("unknown smoothing '" + s + "' (expected none or add-one)");
}

std::string to_string(Smoothing s) { return s == Smoothing::kNone ? "none" : "add-one"; }

double score_from(const std::vector<double>& precisions, double brevity_penalty) {
  if (precisions.empty()) return 0.0;
  double log_sum = 0.0;
  for (const double p : precisions) {
    if (!(p > 0.0)) return 0.0;
    log_sum += std::log(p);
  }
  return brevity_penalty * std::exp(log_sum / static_cast<double>(precisions.size()));
}

BleuReport corpus_bleu(const std::vector<Tokens>& hypotheses, const std::vector<std::vector<Tokens>>& references,
                       std::size_t max_n, Smoothing smoothing) {
  if (hypotheses.empty()) throw std::invalid_argument("corpus_bleu: empty corpus");
  if (hypotheses.size() != references.size()) {
    throw std::invalid_argument("got " + std::to_string(hypotheses.size()) + " hypotheses but " +
                                std::to_string(references.size()) + " references");
  }
  if (max_n == 0) throw std::invalid_argument("corpus_bleu: max_n must be at least 1");
  BleuReport r;
  for (std::size_t n = 1; n <= max_n; ++n) {
    const auto m = modified_precision(hypotheses, references, n);
    r.matches.push_back(m);
    double p = m.total == 0 ? 0.0 : static_cast<double>(m.clipped) / static_cast<double>(m.total);
    if (smoothing == Smoothing::kAddOne && m.clipped == 0) {
      p = 1.0 / static_cast<double>(m.total + 1);
    }
    r.precisions.push_back(p);
  }
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    if (references[i].empty()) throw std::invalid_argument("hypothesis " + std::to_string(i) + " has no reference");
    r.hyp_len += hypotheses[i].size();
    r.ref_len += closest_ref_len(hypotheses[i].size(), references[i]);
  }
  r.brevity_penalty = brevity_penalty(r.hyp_len, r.ref_len);
  r.score = score_from(r.precisions, r.brevity_penalty);
  return r;
}

BleuReport corpus_bleu(const std::vector<Tokens>& hypotheses, const std::vector<Tokens>& references,
                       std::size_t max_n, Smoothing smoothing) {
  if (hypotheses.size() != references.size()) {
    throw std::invalid_argument("got " + std::to_string(hypotheses.size()) + " hypotheses but " +
                                std::to_string(references.size()) + " references");
  }
  return corpus_bleu(hypotheses, wrap(references), max_n, smoothing);
}

nlohmann::json BleuReport::to_json() const {
  nlohmann::json j;
  j["bleu"] = percent();
  j["score"] = score;
  j["precisions"] = precisions;
  nlohmann::json counts = nlohmann::json::array();
  for (const auto& m : matches) counts.push_back({{"clipped", m.clipped}, {"total", m.total}});
  j["matches"] = counts;
  j["brevity_penalty"] = brevity_penalty;
  j["hyp_len"] = hyp_len;
  j["ref_len"] = ref_len;
  return j;
}

std::vector<Tokens> tokenize_lines(const std::vector<std::string>& lines, bool lowercase) {
  std::vector<Tokens> out;
  out.reserve(lines.size());
  for (auto line : lines) {
    if (lowercase) {
      std::string lowered;
      icu::UnicodeString::fromUTF8(line).toLower(icu::Locale::getRoot()).toUTF8String(lowered);
      line = std::move(lowered);
    }
    out.push_back(corpus::split_whitespace(line));
  }
  return out;
}

}  // namespace nmt::eval
