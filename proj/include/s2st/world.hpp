#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "s2st/rng.hpp"
#include "s2st/types.hpp"

namespace s2st {

struct WorldConfig {
  int alphabetA = 8;
  int alphabetB = 8;
  int inventorySize = 20;
  int featureDim = 8;
  int minWordUnits = 2;
  int maxWordUnits = 4;
  int minDuration = 1;
  int maxDuration = 3;
  int minSentenceWords = 3;
  int maxSentenceWords = 8;
  double minSeparation = 1.0;

  void validate() const;
};

/// Number of distinct words constructible over an alphabet of size `alphabet`.
///
/// Words start with a unit from the lower half of the alphabet, end with a unit
/// from the upper half, use only lower-half units in between and never repeat a
/// unit back to back. The upper-half unit marks the word end, so the inventory
/// is prefix-free and concatenations survive duplicate collapse.
std::int64_t constructible_word_count(int alphabet, int minUnits, int maxUnits);

/// Word inventory of one language.
struct Lexicon {
  int alphabet = 0;
  std::vector<UnitSequence> words;
  std::vector<std::string> labels;
  Eigen::MatrixXd centroids;  // alphabet x featureDim

  std::optional<int> index_of_label(std::string_view label) const;
  std::optional<int> index_of_spelling(const UnitSequence& spelling) const;
  void rebuild_index();

 private:
  std::unordered_map<std::string, int> byLabel_;
  std::unordered_map<std::string, int> bySpelling_;
};

/// Two unit languages linked by a bijective word dictionary plus full word-order reversal.
struct SyntheticWorld {
  std::uint64_t seed = 0;
  WorldConfig config;
  Lexicon lexiconA;
  Lexicon lexiconB;
  std::vector<int> translation;         // A word index -> B word index
  std::vector<int> inverseTranslation;  // B word index -> A word index

  const Lexicon& lexicon(Language l) const { return l == Language::A ? lexiconA : lexiconB; }

  /// Applies the translation rule (dictionary substitution, then reversal).
  LabelSequence translate(const LabelSequence& text, Direction direction) const;
  /// Concatenated word spellings without duration expansion.
  UnitSequence spell(const LabelSequence& text, Language language) const;
  /// Spelling with every unit repeated a uniform number of times within the duration range.
  UnitSequence render(const LabelSequence& text, Language language, Rng& rng) const;
};

SyntheticWorld generate_world(std::uint64_t seed, const WorldConfig& cfg);

struct Utterance {
  UnitSequence units;
  LabelSequence transcript;
  Language language = Language::A;
};

struct ParallelSample {
  UnitSequence sourceSpeech;
  LabelSequence sourceText;
  UnitSequence targetSpeech;
  LabelSequence targetText;
  Direction direction = Direction::A2B;

  Utterance source() const { return {sourceSpeech, sourceText, source_language(direction)}; }
};

enum class Task { ASR, S2T, S2ST };
std::string_view to_string(Task t);

struct TaskExample {
  Task task = Task::S2ST;
  UnitSequence input;
  Language inputLanguage = Language::A;
  UnitSequence outputUnits;  // S2ST only
  LabelSequence outputText;  // ASR and S2T only
  Language outputLanguage = Language::A;
};

std::vector<ParallelSample> generate_parallel_corpus(const SyntheticWorld& world, std::size_t n,
                                                     Direction direction, std::uint64_t seed);

/// ASR x2, S2T x2, S2ST x1 derived from one parallel sample.
std::vector<TaskExample> derive_tri_task(const ParallelSample& sample);

std::vector<Utterance> generate_monolingual_corpus(const SyntheticWorld& world, Language language,
                                                   std::size_t n, std::uint64_t seed);

struct SplitSizes {
  std::size_t train = 2000;
  std::size_t dev = 200;
  std::size_t test = 500;
};

struct CorpusSplits {
  std::vector<ParallelSample> train;
  std::vector<ParallelSample> dev;
  std::vector<ParallelSample> test;
};

/// Per-direction splits drawn from disjoint seed streams.
CorpusSplits generate_splits(const SyntheticWorld& world, Direction direction, const SplitSizes& sizes,
                             std::uint64_t seed);

// Serialization: the world is a single JSON document, corpora are JSON lines.
std::string serialize_world(const SyntheticWorld& world);
SyntheticWorld parse_world(std::string_view text);

std::string serialize_parallel(const std::vector<ParallelSample>& samples);
std::vector<ParallelSample> parse_parallel(std::string_view text);
std::string serialize_utterances(const std::vector<Utterance>& utterances);
/// Accepts monolingual files and parallel files (the source side is taken).
std::vector<Utterance> parse_utterances(std::string_view text);

}  // namespace s2st
