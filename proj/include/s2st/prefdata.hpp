#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "s2st/checkpoint.hpp"
#include "s2st/metrics.hpp"
#include "s2st/sft.hpp"
#include "s2st/world.hpp"

namespace s2st {

/// Per-metric margin in oriented-score units: 0.1 for WER and METEOR, 2 BLEU points, 0.5 dB MCD.
double default_delta(Metric metric);

struct PreferenceBuildConfig {
  Metric metric = Metric::METEOR;
  std::optional<double> delta;
  int candidateCount = 2;
  double temperature = 1.0;
  int topK = 20;
  int maxNewTokens = 128;
  int maxRetries = 3;
  std::uint64_t seed = 0;
  /// Stop once this many pairs have been emitted.
  std::optional<std::size_t> maxPairs;

  double effective_delta() const { return delta.value_or(default_delta(metric)); }
  void validate() const;
};

/// One sampled translation of a source utterance.
struct CandidateSample {
  UnitSequence units;
  LabelSequence text;  // chain variant only
  std::uint64_t seed = 0;
  bool truncated = false;
  int attempts = 1;
};

struct CandidateDraw {
  std::vector<CandidateSample> candidates;
  std::string failure;  // set when a candidate stayed malformed through every retry
};

struct BackTranslation {
  bool ok = false;
  UnitSequence units;
  std::string error;
};

struct CandidateRecord {
  CandidateSample candidate;
  BackTranslation backTranslation;
  MetricScore score;
};

struct PreferencePair {
  UnitSequence source;
  Language sourceLanguage = Language::A;
  UnitSequence preferred;
  UnitSequence rejected;
  LabelSequence preferredText;
  LabelSequence rejectedText;
  double ePreferred = 0.0;
  double eRejected = 0.0;
  Metric metric = Metric::METEOR;
  double delta = 0.1;
};

struct PreferenceProvenance {
  std::string checkpointHash;
  std::string sourceCorpusId;
  std::string direction;
  PromptVariant variant = PromptVariant::Vanilla;
  Metric metric = Metric::METEOR;
  double delta = 0.1;
  std::uint64_t seed = 0;
  int candidateCount = 2;
  double temperature = 1.0;
  int topK = 20;
  std::size_t sourcesOffered = 0;
  std::size_t sourcesConsumed = 0;
};

struct SkippedSource {
  std::size_t index = 0;
  std::string reason;  // "malformed", "identical" or "margin"
  std::string detail;
};

struct PreferenceDataset {
  std::vector<PreferencePair> pairs;
  PreferenceProvenance provenance;
  std::vector<SkippedSource> skipped;

  std::map<std::string, std::size_t> skip_counts() const;
};

/// Worst possible oriented score, given to malformed or untranscribable back-translations.
inline constexpr double kWorstScore = -std::numeric_limits<double>::infinity();

/// `count` sampled decodes with per-candidate derived seeds; malformed outputs are
/// resampled up to cfg.maxRetries times.
CandidateDraw sample_candidates(const ModelCheckpoint& model, const PromptFormatter& formatter, const Utterance& source,
                                const PreferenceBuildConfig& cfg, std::uint64_t sourceSeed);

/// Greedy decode of the reverse S2ST task on a candidate already in model form.
BackTranslation back_translate(const ModelCheckpoint& model, const PromptFormatter& formatter,
                               const UnitSequence& candidate, Language candidateLanguage, int maxNewTokens = 128);

/// Compares the source with its back-translation under `metric`; failures give kWorstScore.
MetricScore score_candidate(const UnitSequence& source, const BackTranslation& backTranslation, Metric metric,
                            const SyntheticWorld& world, Language sourceLanguage);

PreferenceDataset build_preference_pairs(const ModelCheckpoint& model, const PromptFormatter& formatter,
                                         const SyntheticWorld& world, const std::vector<Utterance>& sources,
                                         const PreferenceBuildConfig& cfg);

/// One JSON object per line.
std::string serialize_pairs(const std::vector<PreferencePair>& pairs);
std::vector<PreferencePair> parse_pairs(std::string_view text);
std::string serialize_provenance(const PreferenceProvenance& provenance, const std::vector<SkippedSource>& skipped);
PreferenceProvenance parse_provenance(std::string_view text);

}  // namespace s2st
