#include <doctest.h>

#include "fixtures.hpp"

using namespace s2st;

namespace {

std::size_t prompt_length(const PromptExample& ex) {
  return static_cast<std::size_t>(std::find(ex.lossMask.begin(), ex.lossMask.end(), 1) - ex.lossMask.begin());
}

ParallelSample one_sample(Direction d = Direction::A2B, std::uint64_t seed = 2) {
  return generate_parallel_corpus(testing::small_world(), 1, d, seed).front();
}

}  // namespace

TEST_CASE("vocabulary layout and serialization") {
  const auto vocab = world_vocabulary(testing::small_world());
  const auto& w = testing::small_world();
  CHECK(vocab.size() == static_cast<int>(vocab.entries().size()));
  CHECK(vocab.unit_token(Language::A, 0) + w.config.alphabetA == vocab.unit_token(Language::B, 0));
  CHECK(vocab.unit_token(Language::B, w.config.alphabetB - 1) == vocab.size() - 1);
  CHECK(vocab.unit_of(vocab.unit_token(Language::B, 3)) == std::make_pair(Language::B, 3));
  CHECK_FALSE(vocab.unit_of(vocab.end()).has_value());
  CHECK(vocab.is_text(vocab.text_token(Language::A, w.lexiconA.labels[0]), Language::A));
  CHECK_FALSE(vocab.is_text(vocab.text_token(Language::A, w.lexiconA.labels[0]), Language::B));
  const auto back = parse_vocabulary(serialize_vocabulary(vocab));
  CHECK(serialize_vocabulary(back) == serialize_vocabulary(vocab));
  CHECK(vocabulary_hash(back) == vocabulary_hash(vocab));
}

TEST_CASE("vanilla layout: marker, source units, response marker, target units, end") {
  const auto fmt = testing::small_formatter();
  const auto& v = fmt.vocab();
  const auto s = one_sample();
  const auto ex = fmt.format(s, PromptVariant::Vanilla);
  REQUIRE(ex.size() == 1);
  const auto src = collapse(s.sourceSpeech);
  const auto tgt = collapse(s.targetSpeech);
  std::vector<TokenId> expected = {v.s2st()};
  for (auto u : src) expected.push_back(v.unit_token(Language::A, u));
  expected.push_back(v.response());
  for (auto u : tgt) expected.push_back(v.unit_token(Language::B, u));
  expected.push_back(v.end());
  CHECK(ex[0].tokens == expected);
  CHECK(prompt_length(ex[0]) == src.size() + 2);
  CHECK(std::count(ex[0].lossMask.begin(), ex[0].lossMask.end(), 1) == static_cast<long>(tgt.size() + 1));
}

TEST_CASE("chain layout puts target text and a separator before the units") {
  const auto fmt = testing::small_formatter();
  const auto& v = fmt.vocab();
  const auto s = one_sample(Direction::B2A);
  const auto ex = fmt.format(s, PromptVariant::Chain).front();
  const auto start = prompt_length(ex);
  CHECK(ex.tokens[start - 1] == v.response());
  for (std::size_t i = 0; i < s.targetText.size(); ++i)
    CHECK(ex.tokens[start + i] == v.text_token(Language::A, s.targetText[i]));
  CHECK(ex.tokens[start + s.targetText.size()] == v.modality_sep());
  CHECK(ex.tokens.size() == start + s.targetText.size() + 1 + collapse(s.targetSpeech).size() + 1);
  // Text tokens are supervised too.
  CHECK(ex.lossMask[start] == 1);

  const std::span<const TokenId> response(ex.tokens.begin() + static_cast<std::ptrdiff_t>(start), ex.tokens.end());
  const auto parsed = fmt.parse_s2st(response, PromptVariant::Chain, Language::A);
  REQUIRE(parsed.ok);
  CHECK(parsed.text == s.targetText);
  CHECK(parsed.units == collapse(s.targetSpeech));
}

TEST_CASE("tri-task formats five examples with their own markers") {
  const auto fmt = testing::small_formatter();
  const auto ex = fmt.format(one_sample(), PromptVariant::TriTask);
  REQUIRE(ex.size() == 5);
  const std::vector<Task> tasks = {Task::ASR, Task::ASR, Task::S2T, Task::S2T, Task::S2ST};
  for (std::size_t i = 0; i < 5; ++i) CHECK(ex[i].task == tasks[i]);
  CHECK(ex[0].tokens.front() == fmt.vocab().asr());
  CHECK(ex[2].tokens.front() == fmt.vocab().s2t());
  CHECK(ex[4].tokens.front() == fmt.vocab().s2st());
  CHECK(ex[3].inputLanguage == Language::B);
  CHECK(ex[3].outputLanguage == Language::A);
  CHECK(build_sft_dataset(fmt, generate_parallel_corpus(testing::small_world(), 4, Direction::A2B, 1),
                          PromptVariant::TriTask)
            .size() == 20);
}

TEST_CASE("formatting rejects examples the variant does not train on") {
  const auto fmt = testing::small_formatter();
  const auto tri = derive_tri_task(one_sample());
  CHECK_THROWS_AS(fmt.format(tri[0], PromptVariant::Vanilla), Error);
  CHECK_THROWS_AS(fmt.format(tri[4], PromptVariant::Chain), Error);
  CHECK_NOTHROW(fmt.format(tri[4], PromptVariant::Vanilla));
}

TEST_CASE("response parsing errors") {
  const auto fmt = testing::small_formatter();
  const auto& v = fmt.vocab();
  const TokenId a0 = v.unit_token(Language::A, 0);
  const TokenId b0 = v.unit_token(Language::B, 0);
  const TokenId word = v.text_token(Language::B, testing::small_world().lexiconB.labels[0]);
  using R = std::vector<TokenId>;
  auto parse = [&](const R& r, PromptVariant var) { return fmt.parse_s2st(std::span<const TokenId>(r), var, Language::B); };

  CHECK(parse(R{b0, v.end()}, PromptVariant::Vanilla).ok);
  CHECK(parse(R{v.end()}, PromptVariant::Vanilla).ok);
  CHECK(parse(R{b0}, PromptVariant::Vanilla).error == "missing end token");
  CHECK_FALSE(parse(R{a0, v.end()}, PromptVariant::Vanilla).ok);
  CHECK_FALSE(parse(R{word, b0, v.end()}, PromptVariant::Vanilla).ok);
  CHECK(parse(R{word, v.modality_sep(), b0, v.end()}, PromptVariant::Chain).ok);
  CHECK(parse(R{word, b0, v.end()}, PromptVariant::Chain).error.find("text segment") != std::string::npos);
  CHECK(parse(R{word, v.end()}, PromptVariant::Chain).error == "missing modality separator");

  CHECK(fmt.parse_text(std::span<const TokenId>(R{word, v.end()}), Language::B).ok);
  CHECK_FALSE(fmt.parse_text(std::span<const TokenId>(R{word, b0, v.end()}), Language::B).ok);
}

TEST_CASE("zero epochs return the start checkpoint unchanged") {
  const auto start = testing::tiny_checkpoint(PromptVariant::Vanilla, Role::Base);
  const auto fmt = testing::small_formatter();
  const auto ds = build_sft_dataset(fmt, generate_parallel_corpus(testing::small_world(), 4, Direction::A2B, 1),
                                    PromptVariant::Vanilla);
  SftConfig cfg;
  cfg.epochs = 0;
  const auto r = run_sft(start, ds, cfg);
  CHECK(serialize_checkpoint(r.checkpoint) == serialize_checkpoint(start));
  CHECK(r.epochLosses.empty());
}

TEST_CASE("SFT reduces the loss, is reproducible and rejects overlong samples") {
  const auto start = testing::tiny_checkpoint(PromptVariant::Chain, Role::Base);
  const auto fmt = testing::small_formatter();
  const auto ds = build_sft_dataset(fmt, generate_parallel_corpus(testing::small_world(), 24, Direction::A2B, 1),
                                    PromptVariant::Chain);
  SftConfig cfg;
  cfg.epochs = 4;
  cfg.batchSize = 8;
  cfg.learningRate = 3e-3;
  cfg.seed = 2;
  int calls = 0;
  cfg.onEpoch = [&](int, double, const ModelCheckpoint&) { ++calls; };
  const auto a = run_sft(start, ds, cfg);
  CHECK(calls == 4);
  REQUIRE(a.epochLosses.size() == 4);
  CHECK(a.epochLosses.back() < a.epochLosses.front());
  CHECK(a.checkpoint.role == Role::SFT);
  cfg.onEpoch = nullptr;
  CHECK(checkpoint_hash(run_sft(start, ds, cfg).checkpoint) == checkpoint_hash(a.checkpoint));

  auto overlong = ds;
  overlong[0].tokens.resize(200, fmt.vocab().end());
  overlong[0].lossMask.resize(200, 1);
  try {
    run_sft(start, overlong, cfg);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Data);
  }
}
