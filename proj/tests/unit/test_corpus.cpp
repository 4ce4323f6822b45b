#include <doctest.h>

#include <algorithm>

#include "fixtures.hpp"
#include "s2st/transcribe.hpp"

using namespace s2st;

TEST_CASE("world generation is deterministic and serializes losslessly") {
  const auto a = generate_world(7, WorldConfig{});
  const auto b = generate_world(7, WorldConfig{});
  CHECK(serialize_world(a) == serialize_world(b));
  CHECK(serialize_world(parse_world(serialize_world(a))) == serialize_world(a));
  CHECK(serialize_world(generate_world(8, WorldConfig{})) != serialize_world(a));
}

TEST_CASE("world invariants") {
  const auto& w = testing::small_world();
  const int n = w.config.inventorySize;
  for (int i = 0; i < n; ++i) CHECK(w.inverseTranslation[static_cast<std::size_t>(w.translation[static_cast<std::size_t>(i)])] == i);
  for (Language l : {Language::A, Language::B}) {
    const auto& lex = w.lexicon(l);
    std::vector<UnitSequence> words = lex.words;
    std::sort(words.begin(), words.end());
    CHECK(std::adjacent_find(words.begin(), words.end()) == words.end());
    for (const auto& word : lex.words) {
      CHECK(word.size() >= 2);
      CHECK(word.size() <= 4);
      for (auto u : word) CHECK(u < lex.centroids.rows());
    }
    double minDist = 1e9;
    for (Eigen::Index i = 0; i < lex.centroids.rows(); ++i)
      for (Eigen::Index j = i + 1; j < lex.centroids.rows(); ++j)
        minDist = std::min(minDist, (lex.centroids.row(i) - lex.centroids.row(j)).norm());
    CHECK(minDist >= w.config.minSeparation);
  }
}

TEST_CASE("config validation") {
  WorldConfig cfg;
  cfg.alphabetA = 6;
  CHECK_THROWS_AS(generate_world(1, cfg), Error);
  cfg = WorldConfig{};
  cfg.maxDuration = 5;
  CHECK_THROWS_AS(generate_world(1, cfg), Error);
  cfg = WorldConfig{};
  cfg.inventorySize = static_cast<int>(constructible_word_count(8, 2, 4)) + 1;
  CHECK_THROWS_AS(generate_world(1, cfg), Error);
  // Four onsets, four codas, three interior choices per extra unit.
  CHECK(constructible_word_count(8, 2, 4) == 16 + 48 + 144);
}

TEST_CASE("translation rule: dictionary substitution then reversal") {
  const auto& w = testing::small_world();
  const auto& la = w.lexiconA.labels;
  const auto& lb = w.lexiconB.labels;
  auto dict = [&](int i) { return lb[static_cast<std::size_t>(w.translation[static_cast<std::size_t>(i)])]; };
  CHECK(w.translate({la[3], la[1]}, Direction::A2B) == LabelSequence{dict(1), dict(3)});
  CHECK(w.translate({la[5]}, Direction::A2B) == LabelSequence{dict(5)});
  const LabelSequence text = {la[0], la[4], la[9]};
  CHECK(w.translate(w.translate(text, Direction::A2B), Direction::B2A) == text);
}

TEST_CASE("parallel corpora satisfy the oracle and translation invariants") {
  const auto& w = testing::small_world();
  for (Direction d : {Direction::A2B, Direction::B2A}) {
    const auto corpus = generate_parallel_corpus(w, 300, d, 3);
    REQUIRE(corpus.size() == 300);
    for (const auto& s : corpus) {
      CHECK(s.direction == d);
      CHECK(w.translate(s.sourceText, d) == s.targetText);
      CHECK(oracle_asr(s.sourceSpeech, w, source_language(d)) == s.sourceText);
      CHECK(oracle_asr(s.targetSpeech, w, target_language(d)) == s.targetText);
      CHECK(s.sourceText.size() >= 3);
      CHECK(s.sourceText.size() <= 5);
    }
  }
}

TEST_CASE("unit runs stay inside the duration range") {
  const auto& w = testing::small_world();
  bool sawRepeat = false;
  for (const auto& s : generate_parallel_corpus(w, 200, Direction::A2B, 4)) {
    std::size_t run = 1;
    for (std::size_t i = 1; i <= s.sourceSpeech.size(); ++i) {
      if (i < s.sourceSpeech.size() && s.sourceSpeech[i] == s.sourceSpeech[i - 1]) {
        ++run;
        continue;
      }
      CHECK(run >= 1);
      CHECK(run <= 3);
      sawRepeat = sawRepeat || run > 1;
      run = 1;
    }
  }
  CHECK(sawRepeat);
}

TEST_CASE("tri-task derivation") {
  const auto& w = testing::small_world();
  const auto s = generate_parallel_corpus(w, 1, Direction::A2B, 9).front();
  const auto ex = derive_tri_task(s);
  REQUIRE(ex.size() == 5);
  CHECK(ex[0].task == Task::ASR);
  CHECK(ex[0].input == s.sourceSpeech);
  CHECK(ex[0].outputText == s.sourceText);
  CHECK(ex[1].task == Task::ASR);
  CHECK(ex[1].outputText == s.targetText);
  CHECK(ex[2].task == Task::S2T);
  CHECK(ex[2].outputText == s.targetText);
  CHECK(ex[3].task == Task::S2T);
  CHECK(ex[3].input == s.targetSpeech);
  CHECK(ex[3].outputText == w.translate(s.targetText, Direction::B2A));
  CHECK(ex[4].task == Task::S2ST);
  CHECK(ex[4].outputUnits == s.targetSpeech);
}

TEST_CASE("monolingual corpora and splits") {
  const auto& w = testing::small_world();
  CHECK(generate_monolingual_corpus(w, Language::B, 0, 1).empty());
  const auto mono = generate_monolingual_corpus(w, Language::B, 50, 1);
  CHECK(serialize_utterances(mono) == serialize_utterances(generate_monolingual_corpus(w, Language::B, 50, 1)));
  for (const auto& u : mono) CHECK(oracle_asr(u.units, w, Language::B) == u.transcript);
  CHECK(serialize_utterances(parse_utterances(serialize_utterances(mono))) == serialize_utterances(mono));

  const auto splits = generate_splits(w, Direction::A2B, {40, 10, 20}, 5);
  CHECK(splits.train.size() == 40);
  CHECK(splits.dev.size() == 10);
  CHECK(splits.test.size() == 20);
  CHECK(serialize_parallel(parse_parallel(serialize_parallel(splits.test))) == serialize_parallel(splits.test));
  // Parallel files read as source utterances.
  CHECK(parse_utterances(serialize_parallel(splits.test)).front().units == splits.test.front().sourceSpeech);
}

TEST_CASE("malformed corpus lines are data errors naming the line") {
  try {
    parse_parallel("{\"source_units\": [1]}\nnot json\n");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Data);
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }
}

TEST_CASE("oracle ASR and TTS") {
  const auto& w = testing::small_world();
  CHECK(oracle_asr({}, w, Language::A) == LabelSequence{});
  CHECK_FALSE(oracle_asr({w.config.alphabetA - 1}, w, Language::A).has_value());
  Rng rng(3);
  const LabelSequence text = {w.lexiconB.labels[2], w.lexiconB.labels[7], w.lexiconB.labels[2]};
  const auto speech = oracle_tts(text, w, Language::B, rng);
  REQUIRE(speech.has_value());
  CHECK(oracle_asr(*speech, w, Language::B) == text);
  CHECK_FALSE(oracle_tts({"zz"}, w, Language::B, rng).has_value());
}
