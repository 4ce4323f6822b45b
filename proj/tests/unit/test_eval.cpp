#include <doctest.h>

#include "fixtures.hpp"
#include "s2st/eval.hpp"

using namespace s2st;

namespace {

std::vector<ParallelSample> test_set(Direction d = Direction::A2B) {
  return generate_parallel_corpus(testing::small_world(), 30, d, 81);
}

}  // namespace

TEST_CASE("replaying references scores 100") {
  const auto fmt = testing::small_formatter();
  const auto& w = testing::small_world();
  for (Direction d : {Direction::A2B, Direction::B2A}) {
    const auto test = test_set(d);
    for (PromptVariant v : {PromptVariant::Vanilla, PromptVariant::TriTask, PromptVariant::Chain}) {
      const auto r = eval_s2st(replay_responder(fmt, v, test), v, fmt, w, test);
      CHECK(r.corpusBleu == 100.0);
      CHECK(r.sentenceCount == 30);
      CHECK(r.parseFailures == 0);
      CHECK(r.direction == std::string(to_string(d)));
    }
    CHECK(eval_s2t(replay_responder(fmt, PromptVariant::TriTask, test), PromptVariant::TriTask, fmt, test).corpusBleu == 100.0);
    CHECK(eval_s2t(replay_responder(fmt, PromptVariant::Chain, test), PromptVariant::Chain, fmt, test).corpusBleu == 100.0);
  }
}

TEST_CASE("vanilla models have no S2T output") {
  const auto fmt = testing::small_formatter();
  try {
    eval_s2t(replay_responder(fmt, PromptVariant::Vanilla, test_set()), PromptVariant::Vanilla, fmt, test_set());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Usage);
    CHECK(std::string(e.what()).find("unsupported") != std::string::npos);
  }
}

TEST_CASE("cascaded baseline on replayed text is exact and tagged") {
  const auto fmt = testing::small_formatter();
  const auto test = test_set(Direction::B2A);
  const auto r = cascaded_baseline(replay_responder(fmt, PromptVariant::TriTask, test), PromptVariant::TriTask, fmt,
                                   testing::small_world(), test, 3);
  CHECK(r.system == "cascaded");
  CHECK(r.task == Task::S2ST);
  CHECK(r.corpusBleu == 100.0);
  REQUIRE(r.textBleu.has_value());
  CHECK(*r.textBleu == 100.0);
}

TEST_CASE("malformed responses count as empty hypotheses") {
  const auto fmt = testing::small_formatter();
  const auto test = test_set();
  const auto replay = replay_responder(fmt, PromptVariant::Vanilla, test);
  const Responder broken = [&](std::size_t i, Task t, const std::vector<TokenId>& prompt) {
    auto r = replay(i, t, prompt);
    if (i % 2 == 0) r.pop_back();
    if (i % 3 == 0) r.insert(r.begin(), fmt.vocab().unit_token(Language::B, testing::small_world().config.alphabetB - 1));
    return r;
  };
  const auto r = eval_s2st(broken, PromptVariant::Vanilla, fmt, testing::small_world(), test);
  CHECK(r.parseFailures == 15);
  CHECK(r.transcriptionFailures > 0);
  CHECK(r.corpusBleu < 100.0);
  for (std::size_t i = 0; i < test.size(); i += 2) CHECK(r.records[i].hypothesis.empty());
}

TEST_CASE("reports rescore from their records and round-trip") {
  const auto& model = testing::lightly_trained(PromptVariant::Chain);
  const auto fmt = testing::small_formatter();
  const auto r = eval_s2st(model, fmt, testing::small_world(), test_set(), 60);
  CHECK(r.checkpointHash == checkpoint_hash(model));
  CHECK(r.variant == PromptVariant::Chain);
  CHECK(rescore(r) == r.corpusBleu);
  const auto back = parse_report(serialize_report(r));
  CHECK(serialize_report(back) == serialize_report(r));
  CHECK(rescore(back) == r.corpusBleu);
  // Evaluation is deterministic.
  CHECK(eval_s2st(model, fmt, testing::small_world(), test_set(), 60).corpusBleu == r.corpusBleu);

  const auto table = render_table({r});
  CHECK(table.find("end-to-end") != std::string::npos);
  CHECK(table.find("chain") != std::string::npos);
  CHECK_THROWS_AS(parse_report("{}"), Error);
}
