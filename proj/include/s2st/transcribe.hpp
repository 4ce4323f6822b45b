#pragma once

#include <optional>

#include "s2st/rng.hpp"
#include "s2st/world.hpp"

namespace s2st {

/// Exact recognizer of the synthetic world: collapse repeated units, then segment
/// greedily into the longest matching inventory words. Empty when segmentation fails.
std::optional<LabelSequence> oracle_asr(const UnitSequence& units, const SyntheticWorld& world, Language language);

/// Exact synthesizer: concatenated spellings with random per-unit durations.
/// Empty when a label is not in the language's inventory.
std::optional<UnitSequence> oracle_tts(const LabelSequence& text, const SyntheticWorld& world, Language language,
                                       Rng& rng);

}  // namespace s2st
