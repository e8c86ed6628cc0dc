#include "nmt/bpe/bpe.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "nmt/common/error.hpp"
#include "nmt/common/unicode.hpp"
#include "nmt/corpus/tokenize.hpp"

namespace nmt::bpe {
namespace {

std::string rank_key(std::string_view left, std::string_view right) {
  std::string key;
  key.reserve(left.size() + right.size() + 1);
  key += left;
  key += '\x1f';
  key += right;
  return key;
}

using PairKey = std::uint64_t;

PairKey pair_key(std::uint32_t a, std::uint32_t b) { return (static_cast<PairKey>(a) << 32) | b; }
std::uint32_t key_left(PairKey k) { return static_cast<std::uint32_t>(k >> 32); }
std::uint32_t key_right(PairKey k) { return static_cast<std::uint32_t>(k & 0xffffffffu); }

// Replaces each non-overlapping occurrence of (a, b), scanning left to right.
template <typename Sym>
std::vector<Sym> merge_pair(const std::vector<Sym>& syms, const Sym& a, const Sym& b, const Sym& ab) {
  std::vector<Sym> out;
  out.reserve(syms.size());
  for (std::size_t i = 0; i < syms.size();) {
    if (i + 1 < syms.size() && syms[i] == a && syms[i + 1] == b) {
      out.push_back(ab);
      i += 2;
    } else {
      out.push_back(syms[i]);
      ++i;
    }
  }
  return out;
}

class Learner {
 public:
  Learner(const WordCounts& words, const std::string& end_marker) {
    for (const auto& [word, freq] : words) {
      if (word.empty() || freq == 0) continue;
      Word w;
      for (const auto& s : split_word(word, end_marker)) w.syms.push_back(intern(s));
      w.freq = static_cast<std::int64_t>(freq);
      words_.push_back(std::move(w));
    }
    for (std::uint32_t i = 0; i < words_.size(); ++i) add_pairs(i, +1, counts_);
    for (const auto& [k, c] : counts_) {
      if (c > 0) queue_.insert(k);
    }
  }

  std::vector<Merge> run(std::size_t num_merges) {
    std::vector<Merge> merges;
    std::set<Merge> emitted;
    while (merges.size() < num_merges && !queue_.empty()) {
      const PairKey best = *queue_.begin();
      if (counts_.at(best) < 2) break;
      const std::uint32_t a = key_left(best);
      const std::uint32_t b = key_right(best);
      Merge m{symbols_[a], symbols_[b]};
      const std::uint32_t ab = intern(m.joined());
      apply(best, a, b, ab);
      // A symbol reachable through two merge paths can bring an already
      // merged pair back; the corpus is merged again but the table keeps
      // its first rank.
      if (emitted.insert(m).second) merges.push_back(std::move(m));
    }
    return merges;
  }

 private:
  struct Word {
    std::vector<std::uint32_t> syms;
    std::int64_t freq = 0;
  };

  // Count descending, then (left, right) ascending by string.
  struct Order {
    const Learner* self;
    bool operator()(PairKey x, PairKey y) const {
      const auto cx = self->counts_.at(x);
      const auto cy = self->counts_.at(y);
      if (cx != cy) return cx > cy;
      const auto& lx = self->symbols_[key_left(x)];
      const auto& ly = self->symbols_[key_left(y)];
      if (lx != ly) return lx < ly;
      return self->symbols_[key_right(x)] < self->symbols_[key_right(y)];
    }
  };

  std::uint32_t intern(const std::string& s) {
    auto [it, inserted] = ids_.try_emplace(s, static_cast<std::uint32_t>(symbols_.size()));
    if (inserted) symbols_.push_back(s);
    return it->second;
  }

  void add_pairs(std::uint32_t word, std::int64_t sign, std::unordered_map<PairKey, std::int64_t>& into) {
    const auto& w = words_[word];
    for (std::size_t i = 0; i + 1 < w.syms.size(); ++i) {
      const PairKey k = pair_key(w.syms[i], w.syms[i + 1]);
      into[k] += sign * w.freq;
      if (sign > 0) where_[k].push_back(word);
    }
  }

  void apply(PairKey best, std::uint32_t a, std::uint32_t b, std::uint32_t ab) {
    auto occurrences = std::move(where_[best]);
    where_.erase(best);
    std::sort(occurrences.begin(), occurrences.end());
    occurrences.erase(std::unique(occurrences.begin(), occurrences.end()), occurrences.end());

    std::unordered_map<PairKey, std::int64_t> delta;
    for (const std::uint32_t i : occurrences) {
      auto& w = words_[i];
      bool present = false;
      for (std::size_t j = 0; j + 1 < w.syms.size(); ++j) {
        if (w.syms[j] == a && w.syms[j + 1] == b) {
          present = true;
          break;
        }
      }
      if (!present) continue;
      add_pairs(i, -1, delta);
      w.syms = merge_pair(w.syms, a, b, ab);
      add_pairs(i, +1, delta);
    }

    // Ordering depends on counts_, so entries leave the queue before their
    // count changes and re-enter afterwards.
    std::vector<PairKey> changed;
    for (const auto& [k, d] : delta) {
      if (d != 0) changed.push_back(k);
    }
    for (const PairKey k : changed) {
      auto it = counts_.find(k);
      if (it != counts_.end() && it->second > 0) queue_.erase(k);
    }
    for (const PairKey k : changed) {
      auto& c = counts_[k];
      c += delta[k];
      if (c > 0) queue_.insert(k);
    }
  }

  std::vector<std::string> symbols_;
  std::unordered_map<std::string, std::uint32_t> ids_;
  std::vector<Word> words_;
  std::unordered_map<PairKey, std::int64_t> counts_;
  std::unordered_map<PairKey, std::vector<std::uint32_t>> where_;
  std::set<PairKey, Order> queue_{Order{this}};
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

BpeModel::BpeModel(std::vector<Merge> merges, std::string end_marker, std::vector<std::string> languages,
                   std::size_t target_vocab_size)
    : merges_(std::move(merges)),
      end_marker_(std::move(end_marker)),
      languages_(std::move(languages)),
      target_vocab_size_(target_vocab_size) {
  for (std::size_t r = 0; r < merges_.size(); ++r) {
    const auto [it, inserted] = rank_.try_emplace(rank_key(merges_[r].left, merges_[r].right), r);
    if (!inserted) {
      throw FormatError("duplicate merge '" + merges_[r].left + " " + merges_[r].right + "' at rank " +
                        std::to_string(r));
    }
  }
}

std::vector<std::string> split_word(std::string_view word, std::string_view end_marker) {
  auto syms = unicode::split_code_points(word);
  if (!syms.empty()) syms.back() += end_marker;
  return syms;
}

std::vector<std::string> BpeModel::encode_word(std::string_view word) const {
  auto syms = split_word(word, end_marker_);
  while (syms.size() > 1) {
    std::size_t best_rank = std::numeric_limits<std::size_t>::max();
    std::size_t best_at = 0;
    for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
      const auto it = rank_.find(rank_key(syms[i], syms[i + 1]));
      if (it != rank_.end() && it->second < best_rank) {
        best_rank = it->second;
        best_at = i;
      }
    }
    if (best_rank == std::numeric_limits<std::size_t>::max()) break;
    const std::string a = syms[best_at];
    const std::string b = syms[best_at + 1];
    syms = merge_pair(syms, a, b, a + b);
  }
  return syms;
}

std::vector<std::string> BpeModel::encode_tokens(const std::vector<std::string>& words) const {
  std::vector<std::string> out;
  for (const auto& w : words) {
    auto pieces = encode_word(w);
    out.insert(out.end(), std::make_move_iterator(pieces.begin()), std::make_move_iterator(pieces.end()));
  }
  return out;
}

std::string BpeModel::join_subwords(const std::vector<std::string>& subwords) const {
  std::string out;
  for (const auto& piece : subwords) {
    if (piece.size() >= end_marker_.size() && !end_marker_.empty() &&
        piece.compare(piece.size() - end_marker_.size(), end_marker_.size(), end_marker_) == 0) {
      out.append(piece, 0, piece.size() - end_marker_.size());
      out += ' ';
    } else {
      out += piece;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

std::string BpeModel::to_text() const {
  std::ostringstream out;
  out << "#bpe end_marker=" << end_marker_ << " languages=" << corpus::join(languages_, ",")
      << " merges=" << merges_.size() << " vocab=" << target_vocab_size_ << '\n';
  for (const auto& m : merges_) out << m.left << ' ' << m.right << '\n';
  return out.str();
}

void BpeModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_text();
  if (!out) throw IoError("write failed for " + path.string());
}

BpeModel BpeModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return read(in, path.string());
}

BpeModel BpeModel::from_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  return read(in, origin);
}

BpeModel BpeModel::read(std::istream& in, const std::string& origin) {
  std::string line;
  std::string end_marker(kDefaultEndMarker);
  std::vector<std::string> languages;
  std::size_t vocab = 0;
  std::size_t declared = std::numeric_limits<std::size_t>::max();
  std::vector<Merge> merges;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("#bpe", 0) == 0) {
      std::istringstream fields(line.substr(4));
      std::string field;
      while (fields >> field) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) continue;
        const auto key = field.substr(0, eq);
        const auto value = field.substr(eq + 1);
        try {
          if (key == "end_marker") end_marker = value;
          else if (key == "languages") languages = split_list(value);
          else if (key == "merges") declared = std::stoull(value);
          else if (key == "vocab") vocab = std::stoull(value);
        } catch (const std::exception&) {
          throw FormatError(origin + ":1: bad header field '" + field + "'");
        }
      }
      continue;
    }
    if (line[0] == '#') continue;
    const auto space = line.find(' ');
    if (space == std::string::npos || space == 0 || space + 1 >= line.size() ||
        line.find(' ', space + 1) != std::string::npos) {
      throw FormatError(origin + ":" + std::to_string(line_no) + ": expected 'left right'");
    }
    merges.push_back({line.substr(0, space), line.substr(space + 1)});
  }
  if (declared != std::numeric_limits<std::size_t>::max() && declared != merges.size()) {
    throw FormatError(origin + ": header declares " + std::to_string(declared) + " merges, file has " +
                      std::to_string(merges.size()));
  }
  return BpeModel(std::move(merges), std::move(end_marker), std::move(languages), vocab);
}

WordCounts count_words(const std::vector<std::string>& sentences) {
  WordCounts counts;
  for (const auto& s : sentences) {
    for (auto& w : corpus::split_whitespace(s)) ++counts[std::move(w)];
  }
  return counts;
}

BpeModel learn_bpe(const WordCounts& words, std::size_t num_merges, std::string end_marker,
                   std::vector<std::string> languages) {
  Learner learner(words, end_marker);
  auto merges = learner.run(num_merges);
  return BpeModel(std::move(merges), std::move(end_marker), std::move(languages));
}

BpeModel learn_multibpe(const std::map<std::string, WordCounts>& corpora, std::size_t num_merges,
                        std::string end_marker) {
  if (corpora.size() < 2) {
    std::cerr << "warning: joint BPE over " << corpora.size() << " language(s) is plain BPE\n";
  }
  WordCounts joint;
  std::vector<std::string> languages;
  for (const auto& [lang, counts] : corpora) {
    languages.push_back(lang);
    for (const auto& [w, f] : counts) joint[w] += f;
  }
  return learn_bpe(joint, num_merges, std::move(end_marker), std::move(languages));
}

std::size_t symbol_inventory_size(const WordCounts& words, const BpeModel& model) {
  std::unordered_set<std::string> inventory;
  for (const auto& [w, f] : words) {
    for (auto& s : split_word(w, model.end_marker())) inventory.insert(std::move(s));
  }
  for (const auto& m : model.merges()) inventory.insert(m.joined());
  return inventory.size();
}

}  // namespace nmt::bpe
