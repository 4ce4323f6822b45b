#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "s2st/prefdata.hpp"

using namespace s2st;

namespace {

PreferenceBuildConfig build_config(double delta) {
  PreferenceBuildConfig cfg;
  cfg.delta = delta;
  cfg.maxNewTokens = 60;
  cfg.seed = 4;
  return cfg;
}

}  // namespace

TEST_CASE("default margins and config validation") {
  CHECK(default_delta(Metric::METEOR) == 0.1);
  CHECK(default_delta(Metric::WER) == 0.1);
  CHECK(default_delta(Metric::BLEU) == 2.0);
  CHECK(default_delta(Metric::MCD) == 0.5);
  PreferenceBuildConfig cfg;
  CHECK(cfg.effective_delta() == 0.1);
  cfg.candidateCount = 1;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = PreferenceBuildConfig{};
  cfg.delta = -0.1;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("candidate scoring compares the source with its back-translation") {
  const auto& w = testing::small_world();
  const auto s = generate_parallel_corpus(w, 1, Direction::A2B, 5).front();
  BackTranslation perfect{true, collapse(s.sourceSpeech), ""};
  CHECK(score_candidate(s.sourceSpeech, perfect, Metric::WER, w, Language::A).orientedScore == 0.0);
  CHECK(score_candidate(s.sourceSpeech, perfect, Metric::BLEU, w, Language::A).orientedScore == 100.0);
  CHECK(score_candidate(s.sourceSpeech, perfect, Metric::MCD, w, Language::A).orientedScore == 0.0);
  CHECK(score_candidate(s.sourceSpeech, perfect, Metric::METEOR, w, Language::A).orientedScore > 0.9);

  const BackTranslation failed{false, {}, "missing end token"};
  CHECK(score_candidate(s.sourceSpeech, failed, Metric::METEOR, w, Language::A).orientedScore == kWorstScore);
  // An unsegmentable back-translation cannot be transcribed.
  const BackTranslation garbled{true, {w.config.alphabetA - 1}, ""};
  CHECK(score_candidate(s.sourceSpeech, garbled, Metric::WER, w, Language::A).orientedScore == kWorstScore);
}

TEST_CASE("an untrained base checkpoint is rejected") {
  const auto base = testing::tiny_checkpoint(PromptVariant::Vanilla, Role::Base);
  CHECK_THROWS_AS(build_preference_pairs(base, testing::small_formatter(), testing::small_world(),
                                         testing::source_utterances(2, Direction::A2B, 1), build_config(0.1)),
                  Error);
}

TEST_CASE("preference pairs respect the margin, shrink with delta and reproduce exactly") {
  const auto& model = testing::lightly_trained(PromptVariant::Vanilla);
  const auto fmt = testing::small_formatter();
  const auto sources = testing::source_utterances(60, Direction::A2B, 31);

  std::size_t previous = std::numeric_limits<std::size_t>::max();
  std::string firstBytes;
  for (double delta : {0.05, 0.1, 0.2}) {
    const auto ds = build_preference_pairs(model, fmt, testing::small_world(), sources, build_config(delta));
    for (const auto& p : ds.pairs) {
      CHECK(std::isfinite(p.ePreferred));
      CHECK(p.ePreferred - p.eRejected > delta);
      CHECK(p.preferred != p.rejected);
      CHECK(p.delta == delta);
    }
    CHECK(ds.pairs.size() <= previous);
    previous = ds.pairs.size();
    CHECK(ds.pairs.size() + ds.skipped.size() == ds.provenance.sourcesConsumed);
    CHECK(ds.provenance.sourcesOffered == 60);
    CHECK(ds.provenance.direction == "A2B");
    if (delta == 0.05) {
      CHECK(!ds.pairs.empty());
      firstBytes = serialize_pairs(ds.pairs) + serialize_provenance(ds.provenance, ds.skipped);
    }
  }
  const auto again = build_preference_pairs(model, fmt, testing::small_world(), sources, build_config(0.05));
  CHECK(serialize_pairs(again.pairs) + serialize_provenance(again.provenance, again.skipped) == firstBytes);
}

TEST_CASE("max pairs stops early and records consumption") {
  const auto& model = testing::lightly_trained(PromptVariant::Vanilla);
  auto cfg = build_config(0.01);
  cfg.maxPairs = 3;
  const auto ds = build_preference_pairs(model, testing::small_formatter(), testing::small_world(),
                                         testing::source_utterances(60, Direction::B2A, 32), cfg);
  CHECK(ds.pairs.size() <= 3);
  if (ds.pairs.size() == 3) CHECK(ds.provenance.sourcesConsumed < 60);
  std::size_t counted = 0;
  for (const auto& [reason, n] : ds.skip_counts()) {
    CHECK((reason == "malformed" || reason == "identical" || reason == "margin"));
    counted += n;
  }
  CHECK(counted == ds.skipped.size());
}

TEST_CASE("chain candidates carry their text") {
  const auto& model = testing::lightly_trained(PromptVariant::Chain);
  const auto fmt = testing::small_formatter();
  const auto src = testing::source_utterances(1, Direction::A2B, 33).front();
  const auto draw = sample_candidates(model, fmt, src, build_config(0.1), 77);
  if (draw.failure.empty()) {
    REQUIRE(draw.candidates.size() == 2);
    for (const auto& c : draw.candidates) CHECK(c.attempts >= 1);
    const auto again = sample_candidates(model, fmt, src, build_config(0.1), 77);
    CHECK(again.candidates[0].units == draw.candidates[0].units);
    CHECK(again.candidates[1].text == draw.candidates[1].text);
  }
}

TEST_CASE("pair files round-trip, including the worst-score sentinel") {
  PreferencePair p;
  p.source = {1, 2, 3};
  p.sourceLanguage = Language::B;
  p.preferred = {4, 5};
  p.rejected = {6};
  p.preferredText = {"a1", "a2"};
  p.ePreferred = 0.75;
  p.eRejected = kWorstScore;
  p.metric = Metric::METEOR;
  p.delta = 0.1;
  const auto text = serialize_pairs({p, p});
  const auto back = parse_pairs(text);
  REQUIRE(back.size() == 2);
  CHECK(back[0].eRejected == kWorstScore);
  CHECK(back[0].preferredText == p.preferredText);
  CHECK(back[1].sourceLanguage == Language::B);
  CHECK(serialize_pairs(back) == text);
  CHECK(text.find("null") != std::string::npos);

  auto bad = p;
  bad.eRejected = 0.7;
  CHECK_THROWS_AS(parse_pairs(serialize_pairs({bad})), Error);

  PreferenceProvenance prov;
  prov.checkpointHash = "abc";
  prov.direction = "both";
  prov.sourcesOffered = 9;
  const auto provText = serialize_provenance(prov, {{2, "margin", "0.05"}});
  const auto provBack = parse_provenance(provText);
  CHECK(provBack.direction == "both");
  CHECK(provBack.sourcesOffered == 9);
}
