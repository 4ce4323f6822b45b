#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "s2st/types.hpp"

namespace s2st {

enum class Metric { WER, BLEU, METEOR, MCD };
std::string_view to_string(Metric m);
Metric parse_metric(std::string_view s);

/// Raw metric value and its higher-is-better orientation.
struct MetricScore {
  Metric metric = Metric::BLEU;
  double rawValue = 0.0;
  double orientedScore = 0.0;
};

/// Identity for BLEU/METEOR, negation for WER/MCD.
double orient(Metric metric, double rawValue);
MetricScore make_score(Metric metric, double rawValue);

/// Unit-cost Levenshtein distance.
std::size_t edit_distance(const LabelSequence& a, const LabelSequence& b);

/// Edit distance divided by reference length.
double wer(const LabelSequence& reference, const LabelSequence& hypothesis);

/// Clipped n-gram matches and totals for one hypothesis, plus the closest reference length.
struct BleuStats {
  std::vector<long> matches;
  std::vector<long> totals;
  long hypothesisLength = 0;
  long referenceLength = 0;

  explicit BleuStats(int maxN = 4) : matches(static_cast<std::size_t>(maxN), 0), totals(static_cast<std::size_t>(maxN), 0) {}
  BleuStats& operator+=(const BleuStats& other);
};

BleuStats bleu_stats(const std::vector<LabelSequence>& references, const LabelSequence& hypothesis, int maxN = 4);

/// BLEU in [0, 100] from aggregated statistics. Smoothing adds one to the
/// numerator and denominator of every n >= 2 precision.
double bleu_from_stats(const BleuStats& stats, bool smooth);

/// Sentence-level BLEU (add-one smoothing on n >= 2 by default).
double bleu(const std::vector<LabelSequence>& references, const LabelSequence& hypothesis, int maxN = 4,
            bool smooth = true);

/// Unsmoothed corpus BLEU over aligned hypothesis/reference lists (one reference each).
double corpus_bleu(const std::vector<LabelSequence>& references, const std::vector<LabelSequence>& hypotheses,
                   int maxN = 4);

/// Exact-match METEOR: alignment maximizing matches, then minimizing chunks.
struct MeteorDetail {
  double score = 0.0;
  int matches = 0;
  int chunks = 0;
};
MeteorDetail meteor_detail(const LabelSequence& reference, const LabelSequence& hypothesis);
double meteor_lite(const LabelSequence& reference, const LabelSequence& hypothesis);

/// Mel-cepstral distortion along the DTW path: mean of (10 / ln 10) * sqrt(2 * squared distance).
double mcd(const FeatureFrames& reference, const FeatureFrames& hypothesis);

}  // namespace s2st
