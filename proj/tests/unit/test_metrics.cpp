#include <doctest.h>

#include <cmath>

#include "s2st/metrics.hpp"

using namespace s2st;

namespace {
LabelSequence words(std::initializer_list<const char*> w) { return {w.begin(), w.end()}; }
constexpr double kMcdConst = 10.0 / 2.302585092994046 * 1.4142135623730951;
}  // namespace

TEST_CASE("edit distance and WER") {
  CHECK(edit_distance(words({"k", "i", "t", "t", "e", "n"}), words({"s", "i", "t", "t", "i", "n", "g"})) == 3);
  CHECK(edit_distance({}, words({"a", "b"})) == 2);
  CHECK(wer(words({"a", "b", "c"}), words({"a", "x", "c"})) == 1.0 / 3.0);
  CHECK(wer(words({"a", "b", "c", "d"}), words({"a", "b", "c", "d"})) == 0.0);
  CHECK(wer(words({"a", "b"}), words({"a", "b", "c", "d"})) == 1.0);
  CHECK_THROWS_AS(wer({}, words({"a"})), Error);
}

TEST_CASE("sentence BLEU") {
  const auto ref = words({"a", "b", "c", "d", "e"});
  CHECK(bleu({ref}, ref) == 100.0);
  // Four-word prefix: every n-gram matches, brevity penalty exp(1 - 5/4).
  CHECK(bleu({ref}, words({"a", "b", "c", "d"})) == doctest::Approx(100.0 * std::exp(-0.25)).epsilon(1e-12));
  CHECK(bleu({ref}, {}) == 0.0);
  CHECK(bleu({ref}, words({"x", "y", "z", "w", "v"})) == 0.0);
  // Unigram 4/5; smoothed 2-,3-,4-gram precisions (2+1)/(4+1), (1+1)/(3+1), (0+1)/(2+1).
  const double expected = 100.0 * std::pow(0.8 * 0.6 * 0.5 * (1.0 / 3.0), 0.25);
  CHECK(bleu({ref}, words({"a", "b", "c", "x", "e"})) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("BLEU clipping and multiple references") {
  // "the the the" against "the cat": unigram matches clip at 1.
  const auto stats = bleu_stats({words({"the", "cat"})}, words({"the", "the", "the"}));
  CHECK(stats.matches[0] == 1);
  CHECK(stats.totals[0] == 3);
  // Closest reference length wins, ties go to the shorter one.
  CHECK(bleu_stats({words({"a", "b"}), words({"a", "b", "c", "d"})}, words({"a", "b", "c"})).referenceLength == 2);
  CHECK(bleu({words({"x"}), words({"a", "b", "c"})}, words({"a", "b", "c"})) == 100.0);
}

TEST_CASE("corpus BLEU is unsmoothed and aggregates statistics") {
  const std::vector<LabelSequence> refs = {words({"a", "b", "c", "d"}), words({"e", "f", "g", "h"})};
  CHECK(corpus_bleu(refs, refs) == 100.0);
  // No 4-gram match anywhere: unsmoothed corpus BLEU is zero.
  CHECK(corpus_bleu(refs, {words({"a", "b", "x", "d"}), words({"e", "f", "y", "h"})}) == 0.0);
  CHECK_THROWS_AS(corpus_bleu(refs, {refs[0]}), Error);
}

TEST_CASE("METEOR") {
  const auto ref = words({"a", "b", "c", "d"});
  CHECK(meteor_lite(ref, ref) == doctest::Approx(0.9921875).epsilon(1e-15));
  // Swapping the first two words gives three chunks: 1 - 0.5 * (3/4)^3.
  const auto swapped = meteor_detail(ref, words({"b", "a", "c", "d"}));
  CHECK(swapped.matches == 4);
  CHECK(swapped.chunks == 3);
  CHECK(swapped.score == doctest::Approx(0.7890625).epsilon(1e-15));
  // Two of four words, one chunk: P = R = 0.5, F = 0.5, penalty 0.5 * (1/2)^3.
  CHECK(meteor_lite(ref, words({"a", "b", "x", "y"})) == doctest::Approx(0.5 * (1 - 0.0625)).epsilon(1e-15));
  CHECK(meteor_lite(ref, words({"x", "y"})) == 0.0);
  // Repeated words: the aligner prefers the assignment with the fewest chunks.
  CHECK(meteor_detail(words({"a", "b", "a", "b"}), words({"a", "b", "a", "b"})).chunks == 1);
}

TEST_CASE("MCD") {
  FeatureFrames a = FeatureFrames::Zero(1, 4);
  FeatureFrames b = FeatureFrames::Zero(1, 4);
  b(0, 0) = 1.0;
  CHECK(mcd(a, b) == doctest::Approx(kMcdConst).epsilon(1e-15));
  CHECK(mcd(a, a) == 0.0);

  FeatureFrames seq(3, 2);
  seq << 0, 0, 1, 1, 2, 0;
  FeatureFrames stretched(5, 2);
  stretched << 0, 0, 0, 0, 1, 1, 2, 0, 2, 0;
  CHECK(mcd(seq, stretched) == 0.0);
  CHECK(mcd(stretched, seq) == 0.0);
  CHECK_THROWS_AS(mcd(seq, FeatureFrames::Zero(2, 3)), Error);
}

TEST_CASE("score orientation") {
  CHECK(make_score(Metric::WER, 0.25).orientedScore == -0.25);
  CHECK(make_score(Metric::MCD, 3.0).orientedScore == -3.0);
  CHECK(make_score(Metric::BLEU, 40.0).orientedScore == 40.0);
  CHECK(parse_metric("meteor") == Metric::METEOR);
  CHECK_THROWS_AS(parse_metric("chrf"), Error);
}
