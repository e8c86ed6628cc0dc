#pragma once

#include <filesystem>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

namespace nmt::corpus {

enum class Side { kSource, kTarget, kBoth };

/// One line of a noise rule file.
///
///   replace SIDE PATTERN REPLACEMENT   regex substitution (ECMAScript, $1 refs)
///   drop    SIDE PATTERN               remove the pair when the side matches
///   script  SIDE THRESHOLD             remove the pair when the fraction of
///                                      letters outside the side's language
///                                      script exceeds THRESHOLD
///
/// SIDE is one of source, target, both. Arguments may be double-quoted;
/// inside quotes a backslash escapes only '"' and '\'. '#' starts a comment.
struct NoiseRule {
  enum class Kind { kReplace, kDrop, kScript };

  Kind kind = Kind::kReplace;
  Side side = Side::kBoth;
  std::string pattern;
  std::string replacement;
  double threshold = 0.5;
  std::regex regex;
};

class NoiseRuleSet {
 public:
  NoiseRuleSet() = default;

  // Script-mismatch on both sides plus punctuation-run collapsing.
  static NoiseRuleSet defaults();
  static NoiseRuleSet parse(std::string_view text);
  static NoiseRuleSet load(const std::filesystem::path& path);

  const std::vector<NoiseRule>& rules() const { return rules_; }
  bool empty() const { return rules_.empty(); }

  // Source text of the default rule file.
  static std::string_view default_text();

 private:
  std::vector<NoiseRule> rules_;
};

}  // namespace nmt::corpus
