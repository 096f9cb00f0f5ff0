// Porter (1980) suffix stripper, original rule set.
#include <array>
#include <string>
#include <string_view>
#include <utility>

#include "selfevo/metrics.hpp"

namespace selfevo::metrics {
namespace {

class Stemmer {
 public:
  explicit Stemmer(std::string word) : w_(std::move(word)) {}

  std::string run() {
    if (w_.size() <= 2) return w_;
    step1a();
    step1b();
    step1c();
    step2();
    step3();
    step4();
    step5a();
    step5b();
    return w_;
  }

 private:
  using Rule = std::pair<std::string_view, std::string_view>;

  bool consonant(std::size_t i, const std::string& s) const {
    switch (s[i]) {
      case 'a': case 'e': case 'i': case 'o': case 'u': return false;
      case 'y': return i == 0 || !consonant(i - 1, s);
      default: return true;
    }
  }

  /// Number of VC sequences in `s`.
  int measure(const std::string& s) const {
    int m = 0;
    std::size_t i = 0;
    const std::size_t n = s.size();
    while (i < n && consonant(i, s)) ++i;
    while (i < n) {
      while (i < n && !consonant(i, s)) ++i;
      if (i >= n) break;
      while (i < n && consonant(i, s)) ++i;
      ++m;
    }
    return m;
  }

  bool has_vowel(const std::string& s) const {
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!consonant(i, s)) return true;
    }
    return false;
  }

  bool double_consonant(const std::string& s) const {
    const std::size_t n = s.size();
    return n >= 2 && s[n - 1] == s[n - 2] && consonant(n - 1, s);
  }

  bool cvc(const std::string& s) const {
    const std::size_t n = s.size();
    if (n < 3) return false;
    if (!consonant(n - 3, s) || consonant(n - 2, s) || !consonant(n - 1, s)) return false;
    const char c = s[n - 1];
    return c != 'w' && c != 'x' && c != 'y';
  }

  bool ends(std::string_view suffix) const {
    return w_.size() >= suffix.size() && std::string_view(w_).substr(w_.size() - suffix.size()) == suffix;
  }

  std::string stem_without(std::string_view suffix) const { return w_.substr(0, w_.size() - suffix.size()); }

  /// First rule whose suffix matches decides; it applies when the stem has
  /// measure > `min_m`.
  template <std::size_t N>
  void apply_first(const std::array<Rule, N>& rules, int min_m) {
    for (const auto& [suffix, replacement] : rules) {
      if (!ends(suffix)) continue;
      std::string stem = stem_without(suffix);
      if (measure(stem) > min_m) w_ = stem + std::string(replacement);
      return;
    }
  }

  void step1a() {
    if (ends("sses")) {
      w_.resize(w_.size() - 2);
    } else if (ends("ies")) {
      w_.resize(w_.size() - 2);
    } else if (ends("ss")) {
    } else if (ends("s")) {
      w_.pop_back();
    }
  }

  void step1b() {
    if (ends("eed")) {
      if (measure(stem_without("eed")) > 0) w_.pop_back();
      return;
    }
    std::string stem;
    if (ends("ed") && has_vowel(stem_without("ed"))) {
      stem = stem_without("ed");
    } else if (ends("ing") && has_vowel(stem_without("ing"))) {
      stem = stem_without("ing");
    } else {
      return;
    }
    w_ = stem;
    if (ends("at") || ends("bl") || ends("iz")) {
      w_ += 'e';
    } else if (double_consonant(w_) && !ends("l") && !ends("s") && !ends("z")) {
      w_.pop_back();
    } else if (measure(w_) == 1 && cvc(w_)) {
      w_ += 'e';
    }
  }

  void step1c() {
    if (ends("y") && has_vowel(stem_without("y"))) w_.back() = 'i';
  }

  void step2() {
    static constexpr std::array<Rule, 20> rules = {{
        {"ational", "ate"}, {"tional", "tion"}, {"enci", "ence"}, {"anci", "ance"}, {"izer", "ize"},
        {"abli", "able"},   {"alli", "al"},     {"entli", "ent"}, {"eli", "e"},     {"ousli", "ous"},
        {"ization", "ize"}, {"ation", "ate"},   {"ator", "ate"},  {"alism", "al"},  {"iveness", "ive"},
        {"fulness", "ful"}, {"ousness", "ous"}, {"aliti", "al"},  {"iviti", "ive"}, {"biliti", "ble"},
    }};
    apply_first(rules, 0);
  }

  void step3() {
    static constexpr std::array<Rule, 7> rules = {{
        {"icate", "ic"}, {"ative", ""}, {"alize", "al"}, {"iciti", "ic"}, {"ical", "ic"}, {"ful", ""}, {"ness", ""},
    }};
    apply_first(rules, 0);
  }

  void step4() {
    static constexpr std::array<std::string_view, 19> suffixes = {
        "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement", "ment",
        "ent", "ion", "ou", "ism", "ate", "iti", "ous", "ive", "ize",
    };
    for (auto suffix : suffixes) {
      if (!ends(suffix)) continue;
      std::string stem = stem_without(suffix);
      if (measure(stem) <= 1) return;
      if (suffix == "ion" && (stem.empty() || (stem.back() != 's' && stem.back() != 't'))) return;
      w_ = stem;
      return;
    }
  }

  void step5a() {
    if (!ends("e")) return;
    std::string stem = stem_without("e");
    const int m = measure(stem);
    if (m > 1 || (m == 1 && !cvc(stem))) w_ = stem;
  }

  void step5b() {
    if (measure(w_) > 1 && double_consonant(w_) && ends("l")) w_.pop_back();
  }

  std::string w_;
};

}  // namespace

std::string porter_stem(std::string_view word) { return Stemmer(std::string(word)).run(); }

}  // namespace selfevo::metrics
