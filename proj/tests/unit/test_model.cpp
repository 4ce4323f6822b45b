#include <doctest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "s2st/decode.hpp"
#include "s2st/lora.hpp"

using namespace s2st;

namespace {

std::vector<TokenId> random_tokens(int vocab, int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TokenId> t(static_cast<std::size_t>(n));
  for (auto& x : t) x = uniform_int(rng, 0, vocab - 1);
  return t;
}

Transformer<double> tiny_double(int vocab = 40) {
  auto m = Transformer<double>(testing::tiny_config(vocab));
  testing::jitter(m, 0.02, 17);
  return m;
}

}  // namespace

TEST_CASE("parameter count matches the layout") {
  for (int layers : {1, 2, 3}) {
    const auto cfg = testing::tiny_config(50, layers, 16);
    CHECK(parameter_count(cfg) == ParameterLayout::for_config(cfg).total);
    CHECK(Transformer<float>(cfg).parameters().size() == parameter_count(cfg));
  }
  auto bad = testing::tiny_config(50);
  bad.numHeads = 5;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("initialization is deterministic in the seed") {
  auto cfg = testing::tiny_config(30);
  CHECK(Transformer<float>(cfg).parameters() == Transformer<float>(cfg).parameters());
  cfg.seed = 6;
  CHECK(Transformer<float>(cfg).parameters() != Transformer<float>(testing::tiny_config(30)).parameters());
}

TEST_CASE("attention is causal") {
  const auto model = tiny_double();
  auto tokens = random_tokens(40, 20, 1);
  const auto before = forward_logits(model, std::span<const TokenId>(tokens));
  tokens[12] = (tokens[12] + 1) % 40;
  tokens[19] = (tokens[19] + 3) % 40;
  const auto after = forward_logits(model, std::span<const TokenId>(tokens));
  CHECK((before.topRows(12) - after.topRows(12)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((before.row(12) - after.row(12)).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("forward rejects out-of-range input") {
  const auto model = tiny_double();
  std::vector<TokenId> bad = {1, 40};
  CHECK_THROWS_AS(forward_logits(model, std::span<const TokenId>(bad)), Error);
  const auto tooLong = random_tokens(40, 97, 2);
  CHECK_THROWS_AS(forward_logits(model, std::span<const TokenId>(tooLong)), Error);
}

TEST_CASE("batched and incremental evaluation agree with the full forward pass") {
  const auto model = tiny_double();
  const std::vector<std::vector<TokenId>> batch = {random_tokens(40, 9, 3), random_tokens(40, 15, 4)};
  const auto logits = forward_logits_batch(model, batch);
  for (std::size_t i = 0; i < batch.size(); ++i)
    CHECK(logits[i] == forward_logits(model, std::span<const TokenId>(batch[i])));

  IncrementalDecoder<double> dec(model);
  const auto& seq = batch[1];
  const auto full = forward_logits(model, std::span<const TokenId>(seq));
  double worst = 0;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const auto row = dec.push(seq[t]);
    worst = std::max(worst, (row.transpose() - full.row(static_cast<Eigen::Index>(t))).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("log-softmax rows normalize") {
  Eigen::MatrixXd logits(2, 3);
  logits << 1000, 1001, 999, -3, 0, 2;
  const auto ls = log_softmax_rows(logits);
  for (int r = 0; r < 2; ++r) CHECK(ls.row(r).array().exp().sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ls(0, 1) == doctest::Approx(-std::log(1 + std::exp(-1.0) + std::exp(-2.0))));
}

TEST_CASE("sequence log-probability obeys the chain rule") {
  const auto model = tiny_double();
  const auto prompt = random_tokens(40, 6, 5);
  const auto c1 = random_tokens(40, 4, 6);
  const auto c2 = random_tokens(40, 5, 7);
  auto both = c1;
  both.insert(both.end(), c2.begin(), c2.end());
  auto longer = prompt;
  longer.insert(longer.end(), c1.begin(), c1.end());
  const double whole = sequence_logprob(model, std::span<const TokenId>(prompt), std::span<const TokenId>(both));
  const double split = sequence_logprob(model, std::span<const TokenId>(prompt), std::span<const TokenId>(c1)) +
                       sequence_logprob(model, std::span<const TokenId>(longer), std::span<const TokenId>(c2));
  CHECK(whole == doctest::Approx(split).epsilon(1e-12));
  CHECK(whole < 0);
}

TEST_CASE("masked cross-entropy value and gradient") {
  auto model = tiny_double();
  MaskedSequence seq;
  seq.tokens = random_tokens(40, 18, 8);
  seq.lossMask.assign(seq.tokens.size(), 0);
  for (std::size_t t = 7; t < seq.tokens.size(); ++t) seq.lossMask[t] = 1;

  // The masked sum equals the completion log-probability of the masked suffix.
  const std::span<const TokenId> all(seq.tokens);
  const auto ce = masked_cross_entropy(model, seq);
  CHECK(ce.targets == 11);
  CHECK(ce.nll == doctest::Approx(-sequence_logprob(model, all.first(7), all.subspan(7))).epsilon(1e-12));

  auto grads = Gradients<double>::zeros_like(model);
  masked_cross_entropy(model, seq, &grads);
  const auto check = testing::finite_difference_check(
      model, grads, [&](const Transformer<double>& m) { return masked_cross_entropy(m, seq).nll; }, 300, 9);
  CHECK(check.relError < 1e-3);
}

TEST_CASE("log-probability gradient respects the weight") {
  auto model = tiny_double();
  const auto prompt = random_tokens(40, 5, 10);
  const auto completion = random_tokens(40, 6, 11);
  auto g1 = Gradients<double>::zeros_like(model);
  auto g2 = Gradients<double>::zeros_like(model);
  accumulate_logprob_gradient(model, std::span<const TokenId>(prompt), std::span<const TokenId>(completion), 1.0, g1);
  accumulate_logprob_gradient(model, std::span<const TokenId>(prompt), std::span<const TokenId>(completion), -2.5, g2);
  CHECK((g2.base + 2.5 * g1.base).cwiseAbs().maxCoeff() < 1e-12);
  const auto check = testing::finite_difference_check(
      model, g1,
      [&](const Transformer<double>& m) {
        return sequence_logprob(m, std::span<const TokenId>(prompt), std::span<const TokenId>(completion));
      },
      200, 12);
  CHECK(check.relError < 1e-3);
}

TEST_CASE("LoRA starts as the identity, merges exactly and trains only the adapter") {
  auto model = tiny_double();
  const auto tokens = random_tokens(40, 12, 13);
  const auto base = forward_logits(model, std::span<const TokenId>(tokens));
  const auto baseParams = model.parameters();

  auto adapted = model;
  apply_lora(adapted, 4, 8.0, 21);
  CHECK(adapted.adapter().scale() == 2.0);
  CHECK((forward_logits(adapted, std::span<const TokenId>(tokens)) - base).cwiseAbs().maxCoeff() == 0.0);

  Rng rng(22);
  for (Eigen::Index i = 0; i < adapted.adapter().params.size(); ++i) adapted.adapter().params[i] = normal(rng, 0.05);
  const auto withAdapter = forward_logits(adapted, std::span<const TokenId>(tokens));
  CHECK((withAdapter - base).cwiseAbs().maxCoeff() > 1e-6);
  const auto merged = merge_lora(adapted);
  CHECK_FALSE(merged.has_adapter());
  CHECK((forward_logits(merged, std::span<const TokenId>(tokens)) - withAdapter).cwiseAbs().maxCoeff() < 1e-10);

  const auto delta = lora_delta(adapted, 1, LinearSlot::FeedIn);
  CHECK((delta - 2.0 * adapted.lora_down(1, LinearSlot::FeedIn) * adapted.lora_up(1, LinearSlot::FeedIn))
            .cwiseAbs()
            .maxCoeff() == 0.0);

  MaskedSequence seq{tokens, std::vector<std::uint8_t>(tokens.size(), 1)};
  seq.lossMask[0] = 0;
  auto grads = Gradients<double>::zeros_like(adapted, false);
  masked_cross_entropy(adapted, seq, &grads);
  CHECK((grads.base.size() == 0 || grads.base.isZero(0.0)));
  const auto check = testing::finite_difference_check(
      adapted, grads, [&](const Transformer<double>& m) { return masked_cross_entropy(m, seq).nll; }, 300, 23);
  CHECK(check.relError < 1e-3);
  CHECK(adapted.parameters() == baseParams);
}

TEST_CASE("Adam minimizes a quadratic and clips large gradients") {
  Eigen::VectorXd x = Eigen::VectorXd::Constant(3, 5.0);
  Adam<double> opt(3);
  for (int i = 0; i < 2000; ++i) opt.step(x, 2.0 * x, 0.05);
  CHECK(x.norm() < 1e-2);

  // With clipping the first update is still lr per coordinate (sign of the gradient).
  Eigen::VectorXd y = Eigen::VectorXd::Zero(2);
  Adam<double> clipped(2);
  Eigen::VectorXd g(2);
  g << 1e6, -1e6;
  clipped.step(y, g, 0.1);
  CHECK(y[0] == doctest::Approx(-0.1));
  CHECK(y[1] == doctest::Approx(0.1));
}

TEST_CASE("decoding is deterministic and greedy equals top-1 sampling") {
  const auto ckpt = testing::tiny_checkpoint(PromptVariant::Vanilla);
  const auto prompt = random_tokens(ckpt.vocab.size(), 8, 14);
  DecodeConfig cfg;
  cfg.maxNewTokens = 10;
  cfg.seed = 3;
  const auto a = sample(ckpt.model, std::span<const TokenId>(prompt), cfg);
  const auto b = sample(ckpt.model, std::span<const TokenId>(prompt), cfg);
  CHECK(a.tokens == b.tokens);
  CHECK(a.tokens.size() <= 10);

  DecodeConfig greedy = cfg;
  greedy.greedy = true;
  DecodeConfig top1 = cfg;
  top1.topK = 1;
  top1.seed = 99;
  CHECK(sample(ckpt.model, std::span<const TokenId>(prompt), greedy).tokens ==
        sample(ckpt.model, std::span<const TokenId>(prompt), top1).tokens);

  // Greedy tokens are the argmax of the full forward pass.
  const auto g = sample(ckpt.model, std::span<const TokenId>(prompt), greedy);
  auto seq = prompt;
  for (TokenId t : g.tokens) {
    const auto logits = forward_logits(ckpt.model, std::span<const TokenId>(seq));
    Eigen::Index best;
    logits.row(logits.rows() - 1).maxCoeff(&best);
    CHECK(static_cast<TokenId>(best) == t);
    seq.push_back(t);
  }
}

TEST_CASE("checkpoints round-trip byte for byte") {
  auto ckpt = testing::tiny_checkpoint(PromptVariant::Chain);
  const auto bytes = serialize_checkpoint(ckpt);
  const auto back = parse_checkpoint(bytes);
  CHECK(serialize_checkpoint(back) == bytes);
  CHECK(back.role == Role::SFT);
  CHECK(back.variant == PromptVariant::Chain);
  CHECK(back.model.parameters() == ckpt.model.parameters());
  CHECK(checkpoint_hash(back) == checkpoint_hash(ckpt));
  CHECK(checkpoint_hash(back).size() == 64);

  apply_lora(ckpt.model, 2, 4.0, 1);
  const auto withAdapter = parse_checkpoint(serialize_checkpoint(ckpt));
  REQUIRE(withAdapter.model.has_adapter());
  CHECK(withAdapter.model.adapter().params == ckpt.model.adapter().params);

  CHECK_THROWS_AS(parse_checkpoint(bytes.substr(0, bytes.size() - 3)), Error);
  CHECK_THROWS_AS(parse_checkpoint("not a checkpoint"), Error);
}

TEST_CASE("single-token completions are normalized and match log-softmax") {
  const auto model = tiny_double();
  const auto prompt = random_tokens(40, 7, 31);
  const auto logits = forward_logits(model, std::span<const TokenId>(prompt));
  const auto ls = log_softmax_rows<double>(logits);
  double total = 0;
  for (TokenId t = 0; t < 40; ++t) {
    const std::vector<TokenId> c = {t};
    const double lp = sequence_logprob(model, std::span<const TokenId>(prompt), std::span<const TokenId>(c));
    CHECK(lp == doctest::Approx(ls(6, t)).epsilon(1e-12));
    total += std::exp(lp);
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(logits.allFinite());
  const std::vector<TokenId> empty;
  CHECK_THROWS_AS(sequence_logprob(model, std::span<const TokenId>(prompt), std::span<const TokenId>(empty)), Error);
}

TEST_CASE("training steps: zero learning rate is a no-op and one batch can be overfit") {
  auto model = Transformer<float>(testing::tiny_config(40));
  MaskedSequence seq{random_tokens(40, 16, 32), std::vector<std::uint8_t>(16, 1)};
  seq.lossMask[0] = 0;
  const std::vector<MaskedSequence> batch = {seq};
  Adam<float> adam(model.parameters().size());
  const auto before = model.parameters();
  train_step_ce<float>(model, adam, batch, 0.0);
  CHECK(model.parameters() == before);

  double loss = 0;
  for (int i = 0; i < 300; ++i) loss = train_step_ce<float>(model, adam, batch, 3e-3);
  CHECK(mean_masked_cross_entropy(model, std::span<const MaskedSequence>(batch)) < 0.01);
  CHECK(loss < 0.05);

  MaskedSequence masked{seq.tokens, std::vector<std::uint8_t>(16, 0)};
  const std::vector<MaskedSequence> none = {masked};
  CHECK_THROWS_AS(train_step_ce<float>(model, adam, none, 1e-3), Error);
}

TEST_CASE("LoRA rank is bounded by the smallest target dimension") {
  auto model = Transformer<double>(testing::tiny_config(40));
  CHECK_THROWS_AS(apply_lora(model, 33, 1.0, 1), Error);
  CHECK_THROWS_AS(apply_lora(model, 0, 1.0, 1), Error);
}
