#include "s2st/tokenizer.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include <json.hpp>

#include "s2st/rng.hpp"
#include "s2st/world.hpp"

namespace s2st {

namespace {

double squared_distance(const FeatureFrames& frames, Eigen::Index i, const Eigen::MatrixXd& centroids,
                        Eigen::Index k) {
  return (frames.row(i) - centroids.row(k)).squaredNorm();
}

std::size_t distinct_rows(const FeatureFrames& frames) {
  std::set<std::vector<double>> seen;
  std::vector<double> row(static_cast<std::size_t>(frames.cols()));
  for (Eigen::Index i = 0; i < frames.rows(); ++i) {
    for (Eigen::Index j = 0; j < frames.cols(); ++j) row[static_cast<std::size_t>(j)] = frames(i, j);
    seen.insert(row);
  }
  return seen.size();
}

Eigen::MatrixXd kmeans_plus_plus(const FeatureFrames& frames, int k, Rng& rng) {
  const Eigen::Index n = frames.rows();
  Eigen::MatrixXd centroids(k, frames.cols());
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  centroids.row(0) = frames.row(pick(rng));
  std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      auto& d = d2[static_cast<std::size_t>(i)];
      d = std::min(d, squared_distance(frames, i, centroids, c - 1));
      total += d;
    }
    // total > 0 because there are at least k distinct frames.
    double r = uniform_real(rng) * total;
    Eigen::Index chosen = n - 1;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = d2[static_cast<std::size_t>(i)];
      if (d <= 0.0) continue;
      if (r < d) {
        chosen = i;
        break;
      }
      r -= d;
    }
    while (d2[static_cast<std::size_t>(chosen)] <= 0.0) --chosen;
    centroids.row(c) = frames.row(chosen);
  }
  return centroids;
}

}  // namespace

Codebook world_codebook(const SyntheticWorld& world, Language language) {
  return Codebook{world.lexicon(language).centroids, language, 0.0};
}

std::vector<int> assign_nearest(const FeatureFrames& frames, const Eigen::MatrixXd& centroids) {
  std::vector<int> out(static_cast<std::size_t>(frames.rows()));
  for (Eigen::Index i = 0; i < frames.rows(); ++i) {
    int best = 0;
    double bestD = squared_distance(frames, i, centroids, 0);
    for (Eigen::Index k = 1; k < centroids.rows(); ++k) {
      const double d = squared_distance(frames, i, centroids, k);
      if (d < bestD) {
        bestD = d;
        best = static_cast<int>(k);
      }
    }
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

KMeansResult train_kmeans(const FeatureFrames& frames, int k, int maxIters, std::uint64_t seed, Language language) {
  if (k < 2) fail_usage("k-means needs K >= 2");
  if (maxIters < 1) fail_usage("k-means needs maxIters >= 1");
  if (distinct_rows(frames) < static_cast<std::size_t>(k))
    fail_data("k-means needs at least K=" + std::to_string(k) + " distinct frames, got " +
              std::to_string(distinct_rows(frames)));

  Rng rng(derive_seed(seed, {0x4b4d4e53}));
  Eigen::MatrixXd centroids = kmeans_plus_plus(frames, k, rng);
  const Eigen::Index n = frames.rows();

  KMeansResult result;
  std::vector<int> assignment;
  for (int iter = 0; iter < maxIters; ++iter) {
    auto next = assign_nearest(frames, centroids);
    double inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) inertia += squared_distance(frames, i, centroids, next[static_cast<std::size_t>(i)]);
    result.inertiaHistory.push_back(inertia);
    result.iterations = iter + 1;
    const bool stable = next == assignment;
    assignment = std::move(next);
    if (stable) break;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, frames.cols());
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int a = assignment[static_cast<std::size_t>(i)];
      sums.row(a) += frames.row(i);
      ++counts[static_cast<std::size_t>(a)];
    }
    std::vector<bool> taken(static_cast<std::size_t>(n), false);
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        centroids.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
        continue;
      }
      // Re-seed from the point farthest from its own centroid.
      Eigen::Index far = -1;
      double farD = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (taken[static_cast<std::size_t>(i)]) continue;
        const double d = squared_distance(frames, i, centroids, assignment[static_cast<std::size_t>(i)]);
        if (d > farD) {
          farD = d;
          far = i;
        }
      }
      taken[static_cast<std::size_t>(far)] = true;
      centroids.row(c) = frames.row(far);
    }
  }

  double inertia = 0.0;
  const auto finalAssign = assign_nearest(frames, centroids);
  for (Eigen::Index i = 0; i < n; ++i) inertia += squared_distance(frames, i, centroids, finalAssign[static_cast<std::size_t>(i)]);
  result.codebook = Codebook{centroids, language, inertia};
  return result;
}

UnitSequence collapse(const UnitSequence& units) {
  UnitSequence out;
  out.reserve(units.size());
  for (auto u : units)
    if (out.empty() || out.back() != u) out.push_back(u);
  return out;
}

UnitSequence tokenize(const FeatureFrames& features, const Codebook& codebook, bool dedup) {
  if (features.rows() > 0 && features.cols() != codebook.centroids.cols())
    fail_data("feature dimension " + std::to_string(features.cols()) + " does not match codebook dimension " +
              std::to_string(codebook.centroids.cols()));
  auto assignment = assign_nearest(features, codebook.centroids);
  UnitSequence units(assignment.begin(), assignment.end());
  return dedup ? collapse(units) : units;
}

FeatureFrames detokenize(const UnitSequence& units, const Codebook& codebook) {
  FeatureFrames frames(static_cast<Eigen::Index>(units.size()), codebook.centroids.cols());
  for (std::size_t i = 0; i < units.size(); ++i) {
    const auto u = units[i];
    if (u < 0 || u >= codebook.size())
      fail_data("unit id " + std::to_string(u) + " out of range for codebook of size " + std::to_string(codebook.size()));
    frames.row(static_cast<Eigen::Index>(i)) = codebook.centroids.row(u);
  }
  return frames;
}

UnitSequence SpeechFrontend::encode(const UnitSequence& raw, Language language) const {
  return tokenize(detokenize(raw, codebook(language)), codebook(language), dedup);
}

FeatureFrames SpeechFrontend::render(const UnitSequence& units, Language language) const {
  return detokenize(units, codebook(language));
}

SpeechFrontend SpeechFrontend::from_world(const SyntheticWorld& world, bool dedup) {
  return SpeechFrontend{world_codebook(world, Language::A), world_codebook(world, Language::B), dedup};
}

std::string serialize_codebook(const Codebook& codebook) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(codebook.centroids.size()));
  for (Eigen::Index r = 0; r < codebook.centroids.rows(); ++r)
    for (Eigen::Index c = 0; c < codebook.centroids.cols(); ++c) flat.push_back(codebook.centroids(r, c));
  nlohmann::json doc = {{"format", "s2st-codebook/1"},
                        {"language", std::string(to_string(codebook.language))},
                        {"k", codebook.size()},
                        {"d", codebook.dim()},
                        {"inertia", codebook.trainingInertia},
                        {"centroids", flat}};
  return doc.dump() + "\n";
}

Codebook parse_codebook(std::string_view text) {
  try {
    const auto doc = nlohmann::json::parse(text);
    const int k = doc.at("k");
    const int d = doc.at("d");
    const auto flat = doc.at("centroids").get<std::vector<double>>();
    if (flat.size() != static_cast<std::size_t>(k) * static_cast<std::size_t>(d))
      fail_data("codebook centroid count does not match K x d");
    Codebook cb;
    cb.language = parse_language(doc.at("language").get<std::string>());
    cb.trainingInertia = doc.value("inertia", 0.0);
    cb.centroids.resize(k, d);
    for (int r = 0; r < k; ++r)
      for (int c = 0; c < d; ++c) cb.centroids(r, c) = flat[static_cast<std::size_t>(r * d + c)];
    return cb;
  } catch (const nlohmann::json::exception& e) {
    fail_data(std::string("malformed codebook document: ") + e.what());
  }
}

}  // namespace s2st
