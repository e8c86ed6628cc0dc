#include "nmt/corpus/noise.hpp"

#include <fstream>
#include <sstream>

#include "nmt/common/error.hpp"

namespace nmt::corpus {
namespace {

constexpr std::string_view kDefaultRules = R"(# Default noise rules.
# Collapse runs of a repeated punctuation mark (and the spaces before it).
replace both "\s*([!?.,;:])(\s*\1)+" "$1"
# Drop pairs whose text is mostly in the wrong script for its language.
script source 0.5
script target 0.5
)";

std::vector<std::string> split_args(std::string_view line, std::size_t line_no) {
  std::vector<std::string> args;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i >= line.size() || line[i] == '#') break;
    std::string arg;
    if (line[i] == '"') {
      ++i;
      bool closed = false;
      while (i < line.size()) {
        const char c = line[i];
        if (c == '\\' && i + 1 < line.size() && (line[i + 1] == '"' || line[i + 1] == '\\')) {
          arg += line[i + 1];
          i += 2;
        } else if (c == '"') {
          closed = true;
          ++i;
          break;
        } else {
          arg += c;
          ++i;
        }
      }
      if (!closed) throw ConfigError("noise rules line " + std::to_string(line_no) + ": unterminated quote");
    } else {
      while (i < line.size() && line[i] != ' ' && line[i] != '\t') arg += line[i++];
    }
    args.push_back(std::move(arg));
  }
  return args;
}

Side parse_side(const std::string& s, std::size_t line_no) {
  if (s == "source") return Side::kSource;
  if (s == "target") return Side::kTarget;
  if (s == "both") return Side::kBoth;
  throw ConfigError("noise rules line " + std::to_string(line_no) + ": unknown side '" + s + "'");
}

std::regex compile(const std::string& pattern, std::size_t line_no) {
  try {
    return std::regex(pattern, std::regex::ECMAScript);
  } catch (const std::regex_error& e) {
    throw ConfigError("noise rules line " + std::to_string(line_no) + ": bad pattern '" + pattern + "': " + e.what());
  }
}

}  // namespace

std::string_view NoiseRuleSet::default_text() { return kDefaultRules; }

NoiseRuleSet NoiseRuleSet::defaults() { return parse(kDefaultRules); }

NoiseRuleSet NoiseRuleSet::parse(std::string_view text) {
  NoiseRuleSet set;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto args = split_args(line, line_no);
    if (args.empty()) continue;
    const auto fail = [&](const std::string& msg) {
      throw ConfigError("noise rules line " + std::to_string(line_no) + ": " + msg);
    };
    NoiseRule rule;
    const std::string& kind = args[0];
    if (kind == "replace") {
      if (args.size() != 4) fail("replace takes SIDE PATTERN REPLACEMENT");
      rule.kind = NoiseRule::Kind::kReplace;
      rule.side = parse_side(args[1], line_no);
      rule.pattern = args[2];
      rule.replacement = args[3];
      rule.regex = compile(rule.pattern, line_no);
    } else if (kind == "drop") {
      if (args.size() != 3) fail("drop takes SIDE PATTERN");
      rule.kind = NoiseRule::Kind::kDrop;
      rule.side = parse_side(args[1], line_no);
      rule.pattern = args[2];
      rule.regex = compile(rule.pattern, line_no);
    } else if (kind == "script") {
      if (args.size() != 3) fail("script takes SIDE THRESHOLD");
      rule.kind = NoiseRule::Kind::kScript;
      rule.side = parse_side(args[1], line_no);
      try {
        std::size_t used = 0;
        rule.threshold = std::stod(args[2], &used);
        if (used != args[2].size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        fail("bad threshold '" + args[2] + "'");
      }
      if (rule.threshold < 0.0 || rule.threshold > 1.0) fail("threshold must lie in [0, 1]");
    } else {
      fail("unknown rule kind '" + kind + "'");
    }
    set.rules_.push_back(std::move(rule));
  }
  return set;
}

NoiseRuleSet NoiseRuleSet::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read noise rules " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

}  // namespace nmt::corpus
