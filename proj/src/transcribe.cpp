#include "s2st/transcribe.hpp"

#include <algorithm>

#include "s2st/tokenizer.hpp"

namespace s2st {

std::optional<LabelSequence> oracle_asr(const UnitSequence& units, const SyntheticWorld& world, Language language) {
  const auto& lex = world.lexicon(language);
  const UnitSequence collapsed = collapse(units);
  const int maxLen = world.config.maxWordUnits;
  LabelSequence text;
  std::size_t i = 0;
  while (i < collapsed.size()) {
    std::optional<int> found;
    std::size_t foundLen = 0;
    const std::size_t longest = std::min<std::size_t>(static_cast<std::size_t>(maxLen), collapsed.size() - i);
    for (std::size_t len = longest; len >= 1 && !found; --len) {
      UnitSequence piece(collapsed.begin() + static_cast<std::ptrdiff_t>(i),
                         collapsed.begin() + static_cast<std::ptrdiff_t>(i + len));
      if (auto w = lex.index_of_spelling(piece)) {
        found = w;
        foundLen = len;
      }
    }
    if (!found) return std::nullopt;
    text.push_back(lex.labels[static_cast<std::size_t>(*found)]);
    i += foundLen;
  }
  return text;
}

std::optional<UnitSequence> oracle_tts(const LabelSequence& text, const SyntheticWorld& world, Language language,
                                       Rng& rng) {
  const auto& lex = world.lexicon(language);
  for (const auto& w : text)
    if (!lex.index_of_label(w)) return std::nullopt;
  return world.render(text, language, rng);
}

}  // namespace s2st
