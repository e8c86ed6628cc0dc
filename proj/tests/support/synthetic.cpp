#include "synthetic.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "nmt/common/random.hpp"

namespace nmt::synth {
namespace {

// Consonant-vowel syllables in Tamil script, combined into pseudo-stems.
const std::vector<std::string> kTamilSyllables = {"க",  "கா", "கி", "கு", "ட",  "டு", "த",  "தா", "தி", "ப",
                                                  "பா", "பு", "ம",  "மா", "மு", "ர",  "ரா", "ரு", "ல",  "லா",
                                                  "வ",  "வா", "வி", "ந",  "நா", "ச",  "சா", "சு", "ய",  "யா"};
const std::vector<std::string> kLatinSyllables = {"ka", "lo", "mi", "ru", "te", "sa", "po", "ne", "di", "fu",
                                                  "ga", "be", "zo", "vi", "ha", "ju", "ke", "ro", "ta", "wi"};

// Two syllables, distinct for every index below inventory size squared.
std::string stem(const std::vector<std::string>& inventory, std::size_t index) {
  const std::size_t n = inventory.size();
  const std::size_t a = index % n;
  const std::size_t b = (index / n + 7 * a) % n;
  return inventory[a] + inventory[b];
}

struct Lexicon {
  std::vector<std::string> noun_en, noun_ta, verb_en, verb_ta;
};

Lexicon make_lexicon(std::size_t nouns, std::size_t verbs) {
  Lexicon lex;
  for (std::size_t i = 0; i < nouns; ++i) {
    lex.noun_en.push_back(stem(kLatinSyllables, i) + "n");
    lex.noun_ta.push_back(stem(kTamilSyllables, i) + "ம்");
  }
  for (std::size_t i = 0; i < verbs; ++i) {
    lex.verb_en.push_back(stem(kLatinSyllables, i) + "v");
    lex.verb_ta.push_back(stem(kTamilSyllables, i + 17));
  }
  return lex;
}

// Zipf-like: index k with weight 1/(k+1).
std::size_t zipf(Rng& rng, std::size_t n) {
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) total += 1.0 / static_cast<double>(k + 1);
  double u = rng.uniform01() * total;
  for (std::size_t k = 0; k < n; ++k) {
    u -= 1.0 / static_cast<double>(k + 1);
    if (u <= 0.0) return k;
  }
  return n - 1;
}

struct Case {
  const char* en_prep;
  const char* ta_suffix;
};
const Case kCases[] = {{"in", "இல்"}, {"to", "க்கு"}, {"with", "உடன்"}, {"from", "இலிருந்து"}};

struct Person {
  const char* en;
  const char* ta;
  const char* suffix;
  bool third_singular;
};
const Person kPersons[] = {{"i", "நான்", "ஏன்", false},      {"you", "நீ", "ஆய்", false},
                           {"he", "அவன்", "ஆன்", true},      {"we", "நாங்கள்", "ஓம்", false},
                           {"they", "அவர்கள்", "ஆர்கள்", false}};

const char* const kTenseTa[] = {"த்த்", "கிற்", "ப்ப்"};

std::string noun_phrase_en(const Lexicon& lex, std::size_t n, bool plural) {
  return "the " + lex.noun_en[n] + (plural ? "s" : "");
}

std::string noun_ta(const Lexicon& lex, std::size_t n, bool plural) { return lex.noun_ta[n] + (plural ? "கள்" : ""); }

}  // namespace

ParallelLines agglutinative_corpus(const AgglutinativeOptions& o) {
  if (o.nouns == 0 || o.verbs == 0) throw std::invalid_argument("empty lexicon");
  if (o.nouns > 400 || o.verbs > 400) throw std::invalid_argument("lexicon too large for unique stems");
  const Lexicon lex = make_lexicon(o.nouns, o.verbs);
  Rng rng(o.seed);
  ParallelLines out;
  for (std::size_t i = 0; i < o.pairs; ++i) {
    std::string en;
    std::string ta;
    // Subject: a pronoun or a noun phrase (third person).
    const bool pronoun = rng.below(2) == 0;
    const Person* person = nullptr;
    std::string subj_en;
    std::string subj_ta;
    if (pronoun) {
      person = &kPersons[rng.below(5)];
      subj_en = person->en;
      subj_ta = person->ta;
    } else {
      const auto n = zipf(rng, lex.noun_en.size());
      const bool plural = rng.below(2) == 0;
      person = plural ? &kPersons[4] : &kPersons[2];
      subj_en = noun_phrase_en(lex, n, plural);
      subj_ta = noun_ta(lex, n, plural);
    }
    const auto v = zipf(rng, lex.verb_en.size());
    const auto tense = rng.below(3);
    std::string verb_en;
    if (tense == 0) verb_en = lex.verb_en[v] + "ed";
    else if (tense == 1) verb_en = lex.verb_en[v] + (person->third_singular ? "s" : "");
    else verb_en = "will " + lex.verb_en[v];
    const std::string verb_ta = lex.verb_ta[v] + kTenseTa[tense] + person->suffix;

    const auto obj = zipf(rng, lex.noun_en.size());
    const bool obj_plural = rng.below(3) == 0;
    en = subj_en + " " + verb_en + " " + noun_phrase_en(lex, obj, obj_plural);
    ta = subj_ta + " " + noun_ta(lex, obj, obj_plural) + "ஐ";

    if (rng.below(2) == 0) {
      const auto adj = zipf(rng, lex.noun_en.size());
      const bool adj_plural = rng.below(3) == 0;
      const Case& c = kCases[rng.below(4)];
      en += std::string(" ") + c.en_prep + " " + noun_phrase_en(lex, adj, adj_plural);
      ta += " " + noun_ta(lex, adj, adj_plural) + c.ta_suffix;
    }
    en += " .";
    ta += " " + verb_ta + " .";
    out.source.push_back(std::move(en));
    out.target.push_back(std::move(ta));
  }
  return out;
}

void write_parallel_lines(const ParallelLines& lines, const std::filesystem::path& source,
                          const std::filesystem::path& target) {
  std::ofstream s(source, std::ios::binary);
  std::ofstream t(target, std::ios::binary);
  for (const auto& l : lines.source) s << l << '\n';
  for (const auto& l : lines.target) t << l << '\n';
  if (!s || !t) throw std::runtime_error("cannot write synthetic corpus");
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("nmt-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace nmt::synth
