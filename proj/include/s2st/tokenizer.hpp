#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "s2st/types.hpp"

namespace s2st {

struct SyntheticWorld;

/// K cluster centroids (rows) of dimension d.
struct Codebook {
  Eigen::MatrixXd centroids;
  Language language = Language::A;
  double trainingInertia = 0.0;

  int size() const { return static_cast<int>(centroids.rows()); }
  int dim() const { return static_cast<int>(centroids.cols()); }
};

/// Ground-truth codebook of one language of a synthetic world.
Codebook world_codebook(const SyntheticWorld& world, Language language);

struct KMeansResult {
  Codebook codebook;
  std::vector<double> inertiaHistory;  // one entry per Lloyd iteration, after assignment
  int iterations = 0;
};

/// Lloyd's algorithm with k-means++ seeding. Empty clusters are re-seeded from the
/// point farthest from its current centroid.
KMeansResult train_kmeans(const FeatureFrames& frames, int k, int maxIters, std::uint64_t seed,
                          Language language = Language::A);

/// Nearest centroid per frame (ties go to the lower index).
std::vector<int> assign_nearest(const FeatureFrames& frames, const Eigen::MatrixXd& centroids);

UnitSequence tokenize(const FeatureFrames& features, const Codebook& codebook, bool dedup = true);
FeatureFrames detokenize(const UnitSequence& units, const Codebook& codebook);

/// Collapses runs of identical consecutive units.
UnitSequence collapse(const UnitSequence& units);

/// Raw unit runs -> feature frames -> nearest-centroid units, per language.
struct SpeechFrontend {
  Codebook codebookA;
  Codebook codebookB;
  bool dedup = true;

  const Codebook& codebook(Language l) const { return l == Language::A ? codebookA : codebookB; }
  UnitSequence encode(const UnitSequence& raw, Language language) const;
  FeatureFrames render(const UnitSequence& units, Language language) const;

  static SpeechFrontend from_world(const SyntheticWorld& world, bool dedup = true);
};

std::string serialize_codebook(const Codebook& codebook);
Codebook parse_codebook(std::string_view text);

}  // namespace s2st
