#include <doctest.h>

#include "fixtures.hpp"
#include "s2st/tokenizer.hpp"

using namespace s2st;

namespace {

FeatureFrames blobs(int clusters, int perCluster, int dim, Rng& rng) {
  FeatureFrames x(clusters * perCluster, dim);
  for (int c = 0; c < clusters; ++c) {
    Eigen::RowVectorXd centre(dim);
    for (int j = 0; j < dim; ++j) centre[j] = normal(rng, 3.0);
    for (int i = 0; i < perCluster; ++i)
      for (int j = 0; j < dim; ++j) x(c * perCluster + i, j) = centre[j] + normal(rng, 0.7);
  }
  return x;
}

}  // namespace

TEST_CASE("k-means inertia never increases") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const int k = uniform_int(rng, 2, 8);
    const auto data = blobs(k + uniform_int(rng, 0, 3), 30, uniform_int(rng, 2, 6), rng);
    const auto r = train_kmeans(data, k, 50, seed);
    REQUIRE(!r.inertiaHistory.empty());
    for (std::size_t i = 1; i < r.inertiaHistory.size(); ++i)
      CHECK(r.inertiaHistory[i] <= r.inertiaHistory[i - 1] + 1e-9 * r.inertiaHistory[i - 1]);
    CHECK(r.codebook.size() == k);
    CHECK(r.codebook.trainingInertia == doctest::Approx(r.inertiaHistory.back()));
  }
}

TEST_CASE("k-means is deterministic and recovers separated clusters") {
  Rng rng(4);
  FeatureFrames data(60, 2);
  for (int i = 0; i < 60; ++i) {
    const double cx = (i % 3) * 100.0;
    data(i, 0) = cx + normal(rng, 0.1);
    data(i, 1) = normal(rng, 0.1);
  }
  const auto a = train_kmeans(data, 3, 30, 8);
  const auto b = train_kmeans(data, 3, 30, 8);
  CHECK(a.codebook.centroids == b.codebook.centroids);
  const auto labels = assign_nearest(data, a.codebook.centroids);
  for (int i = 3; i < 60; ++i) CHECK(labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(i % 3)]);
  CHECK_THROWS_AS(train_kmeans(data.topRows(2), 3, 10, 1), Error);
}

TEST_CASE("nearest-centroid ties go to the lower index") {
  Eigen::MatrixXd centroids(2, 1);
  centroids << -1, 1;
  FeatureFrames x(1, 1);
  x << 0;
  CHECK(assign_nearest(x, centroids) == std::vector<int>{0});
}

TEST_CASE("tokenize after detokenize is duplicate collapse with ground-truth centroids") {
  const auto& w = testing::small_world();
  const auto cb = world_codebook(w, Language::B);
  Rng rng(12);
  for (int trial = 0; trial < 1000; ++trial) {
    UnitSequence units(static_cast<std::size_t>(uniform_int(rng, 0, 30)));
    for (auto& u : units) u = uniform_int(rng, 0, cb.size() - 1);
    CHECK(tokenize(detokenize(units, cb), cb) == collapse(units));
    CHECK(tokenize(detokenize(units, cb), cb, false) == units);
  }
}

TEST_CASE("collapse") {
  CHECK(collapse({}) == UnitSequence{});
  CHECK(collapse({3, 3, 1, 1, 1, 3}) == UnitSequence{3, 1, 3});
}

TEST_CASE("speech frontend and codebook serialization") {
  const auto& w = testing::small_world();
  const auto fe = SpeechFrontend::from_world(w);
  CHECK(fe.encode({2, 2, 5, 5, 5, 2}, Language::A) == UnitSequence{2, 5, 2});
  CHECK(fe.render({1, 4}, Language::A).rows() == 2);
  const auto cb = fe.codebookA;
  const auto back = parse_codebook(serialize_codebook(cb));
  CHECK(back.centroids == cb.centroids);
  CHECK(back.language == cb.language);
  CHECK_THROWS_AS(detokenize({0, cb.size()}, cb), Error);
}
