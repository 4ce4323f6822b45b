#include "s2st/po.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "s2st/lora.hpp"
#include "s2st/objectives.hpp"
#include "s2st/rng.hpp"

namespace s2st {

namespace {

constexpr std::uint64_t kShuffleStream = 0x504f5348;  // "POSH"
constexpr std::uint64_t kIterStream = 0x49544552;     // "ITER"

/// -log sigmoid(z), stable for large |z|.
double neg_log_sigmoid(double z) { return std::log1p(std::exp(-std::abs(z))) + std::max(-z, 0.0); }
double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

template <class Scalar>
double logprob(const Transformer<Scalar>& m, const std::vector<TokenId>& prompt, const std::vector<TokenId>& completion) {
  return static_cast<double>(sequence_logprob<Scalar>(m, prompt, completion));
}

void check_vocabularies(const ModelCheckpoint& a, const ModelCheckpoint& b) {
  if (a.vocab.entries().size() != b.vocab.entries().size() || vocabulary_hash(a.vocab) != vocabulary_hash(b.vocab))
    fail_data("policy and reference checkpoints use different vocabularies");
}

}  // namespace

std::string_view to_string(PoAlgorithm a) { return a == PoAlgorithm::DPO ? "DPO" : "SimPO"; }

PoAlgorithm parse_algorithm(std::string_view s) {
  std::string low(s);
  std::transform(low.begin(), low.end(), low.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (low == "dpo") return PoAlgorithm::DPO;
  if (low == "simpo") return PoAlgorithm::SimPO;
  fail_usage("unknown preference algorithm '" + std::string(s) + "' (expected DPO or SimPO)");
}

void PoConfig::validate() const {
  if (!(beta > 0.0)) fail_usage("beta must be > 0");
  if (algorithm == PoAlgorithm::SimPO && !(gamma >= 0.0)) fail_usage("SimPO gamma must be >= 0");
  if (epochs < 0) fail_usage("epochs must be >= 0");
  if (batchSize < 1) fail_usage("batch size must be >= 1");
  if (!(learningRate > 0.0)) fail_usage("learning rate must be > 0");
  if (useLora && (loraRank < 1 || !(loraAlpha > 0.0))) fail_usage("LoRA needs rank >= 1 and alpha > 0");
}

PreferenceExample to_preference_example(const PromptFormatter& formatter, PromptVariant variant,
                                        const PreferencePair& pair) {
  const Language tgt = other(pair.sourceLanguage);
  PreferenceExample ex;
  ex.prompt = formatter.speech_prompt(Task::S2ST, pair.source, pair.sourceLanguage);
  ex.preferred = formatter.s2st_response(variant, pair.preferredText, pair.preferred, tgt);
  ex.rejected = formatter.s2st_response(variant, pair.rejectedText, pair.rejected, tgt);
  return ex;
}

double dpo_objective(double policyPreferred, double policyRejected, double refPreferred, double refRejected,
                     double beta) {
  return neg_log_sigmoid(beta * ((policyPreferred - refPreferred) - (policyRejected - refRejected)));
}

double simpo_objective(double logpPreferred, std::size_t lenPreferred, double logpRejected, std::size_t lenRejected,
                       double beta, double gamma) {
  if (lenPreferred == 0 || lenRejected == 0) fail_data("SimPO needs non-empty completions");
  return neg_log_sigmoid(beta * logpPreferred / static_cast<double>(lenPreferred) -
                         beta * logpRejected / static_cast<double>(lenRejected) - gamma);
}

template <class Scalar>
double dpo_loss(const Transformer<Scalar>& policy, const PreferenceExample& ex, double refPreferred,
                double refRejected, double beta, Gradients<Scalar>* grads, double weight) {
  const double lp = logprob(policy, ex.prompt, ex.preferred);
  const double lr = logprob(policy, ex.prompt, ex.rejected);
  const double z = beta * ((lp - refPreferred) - (lr - refRejected));
  if (grads != nullptr) {
    // dL/dz = sigmoid(z) - 1
    const double g = weight * beta * (sigmoid(z) - 1.0);
    accumulate_logprob_gradient<Scalar>(policy, ex.prompt, ex.preferred, static_cast<Scalar>(g), *grads);
    accumulate_logprob_gradient<Scalar>(policy, ex.prompt, ex.rejected, static_cast<Scalar>(-g), *grads);
  }
  return neg_log_sigmoid(z);
}

template <class Scalar>
double simpo_loss(const Transformer<Scalar>& policy, const PreferenceExample& ex, double beta, double gamma,
                  Gradients<Scalar>* grads, double weight) {
  if (ex.preferred.empty() || ex.rejected.empty()) fail_data("SimPO needs non-empty completions");
  const double np = static_cast<double>(ex.preferred.size());
  const double nr = static_cast<double>(ex.rejected.size());
  const double lp = logprob(policy, ex.prompt, ex.preferred);
  const double lr = logprob(policy, ex.prompt, ex.rejected);
  const double z = beta * lp / np - beta * lr / nr - gamma;
  if (grads != nullptr) {
    const double g = weight * (sigmoid(z) - 1.0);
    accumulate_logprob_gradient<Scalar>(policy, ex.prompt, ex.preferred, static_cast<Scalar>(g * beta / np), *grads);
    accumulate_logprob_gradient<Scalar>(policy, ex.prompt, ex.rejected, static_cast<Scalar>(-g * beta / nr), *grads);
  }
  return neg_log_sigmoid(z);
}

double dpo_loss(const ModelCheckpoint& policy, const ModelCheckpoint& reference, const PromptFormatter& formatter,
                const PreferencePair& pair, double beta) {
  check_vocabularies(policy, reference);
  const auto ex = to_preference_example(formatter, policy.variant, pair);
  return dpo_loss<float>(policy.model, ex, logprob(reference.model, ex.prompt, ex.preferred),
                         logprob(reference.model, ex.prompt, ex.rejected), beta);
}

double simpo_loss(const ModelCheckpoint& policy, const PromptFormatter& formatter, const PreferencePair& pair,
                  double beta, double gamma) {
  return simpo_loss<float>(policy.model, to_preference_example(formatter, policy.variant, pair), beta, gamma);
}

double mean_reward_margin(const ModelCheckpoint& policy, const ModelCheckpoint& reference,
                          const PromptFormatter& formatter, const std::vector<PreferencePair>& pairs, double beta) {
  check_vocabularies(policy, reference);
  if (pairs.empty()) fail_data("reward margin of an empty preference set");
  double total = 0.0;
  for (const auto& p : pairs) {
    const auto ex = to_preference_example(formatter, policy.variant, p);
    total += beta * ((logprob(policy.model, ex.prompt, ex.preferred) - logprob(reference.model, ex.prompt, ex.preferred)) -
                     (logprob(policy.model, ex.prompt, ex.rejected) - logprob(reference.model, ex.prompt, ex.rejected)));
  }
  return total / static_cast<double>(pairs.size());
}

double mean_preference_loss(const ModelCheckpoint& policy, const ModelCheckpoint& reference,
                            const PromptFormatter& formatter, const std::vector<PreferencePair>& pairs,
                            const PoConfig& cfg) {
  if (pairs.empty()) fail_data("preference loss of an empty preference set");
  double total = 0.0;
  for (const auto& p : pairs)
    total += cfg.algorithm == PoAlgorithm::DPO ? dpo_loss(policy, reference, formatter, p, cfg.beta)
                                               : simpo_loss(policy, formatter, p, cfg.beta, cfg.gamma);
  return total / static_cast<double>(pairs.size());
}

PoResult run_po(const ModelCheckpoint& start, const std::vector<PreferencePair>& pairs,
                const PromptFormatter& formatter, const PoConfig& cfg) {
  cfg.validate();
  if (start.role == Role::Base) fail_usage("preference optimization starts from a fine-tuned checkpoint");
  PoResult result{start, {}};
  result.checkpoint.role = Role::PO;
  if (cfg.epochs == 0) return result;
  if (pairs.empty()) fail_data("preference dataset is empty");

  const int context = start.model.config().contextLength;
  std::vector<PreferenceExample> examples;
  examples.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto ex = to_preference_example(formatter, start.variant, pairs[i]);
    const auto longest = ex.prompt.size() + std::max(ex.preferred.size(), ex.rejected.size()) - 1;
    if (static_cast<int>(longest) > context)
      fail_data("preference pair " + std::to_string(i) + " exceeds the context length " + std::to_string(context));
    examples.push_back(std::move(ex));
  }

  std::vector<double> refP(examples.size(), 0.0), refR(examples.size(), 0.0);
  if (cfg.algorithm == PoAlgorithm::DPO) {
    for (std::size_t i = 0; i < examples.size(); ++i) {
      refP[i] = logprob(start.model, examples[i].prompt, examples[i].preferred);
      refR[i] = logprob(start.model, examples[i].prompt, examples[i].rejected);
    }
  }

  Transformer<float> policy = start.model;
  policy.clear_adapter();
  if (cfg.useLora) apply_lora(policy, cfg.loraRank, cfg.loraAlpha, cfg.seed);
  auto grads = Gradients<float>::zeros_like(policy, !cfg.useLora);
  Adam<float> adam(cfg.useLora ? policy.adapter().params.size() : policy.parameters().size(), cfg.adam);

  const auto batchSize = static_cast<std::size_t>(cfg.batchSize);
  std::vector<std::size_t> order(examples.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(cfg.seed, {kShuffleStream, static_cast<std::uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), rng);
    double epochLoss = 0.0;
    for (std::size_t b = 0; b < order.size(); b += batchSize) {
      const std::size_t e = std::min(order.size(), b + batchSize);
      const double w = 1.0 / static_cast<double>(e - b);
      grads.set_zero();
      for (std::size_t k = b; k < e; ++k) {
        const auto i = order[k];
        epochLoss += cfg.algorithm == PoAlgorithm::DPO
                         ? dpo_loss<float>(policy, examples[i], refP[i], refR[i], cfg.beta, &grads, w)
                         : simpo_loss<float>(policy, examples[i], cfg.beta, cfg.gamma, &grads, w);
      }
      if (cfg.useLora)
        adam.step(policy.adapter().params, grads.adapter, cfg.learningRate);
      else
        adam.step(policy.parameters(), grads.base, cfg.learningRate);
    }
    result.epochLosses.push_back(epochLoss / static_cast<double>(examples.size()));
  }
  result.checkpoint.model = cfg.useLora ? merge_lora(policy) : std::move(policy);
  return result;
}

IterationResult run_iterations(const ModelCheckpoint& start, const PromptFormatter& formatter,
                               const SyntheticWorld& world, const std::vector<Utterance>& sources,
                               const PreferenceBuildConfig& build, const PoConfig& po, int iterations,
                               std::size_t samplesPerIteration, const CheckpointEvaluator& evaluate) {
  if (iterations < 1) fail_usage("iterations must be >= 1");
  if (samplesPerIteration < 1) fail_usage("samples per iteration must be >= 1");
  IterationResult result{start, {}};
  std::size_t cursor = 0;
  for (int it = 0; it < iterations; ++it) {
    IterationReport report;
    report.iteration = it + 1;
    report.inputHash = checkpoint_hash(result.checkpoint);
    if (cursor >= sources.size()) {
      report.outputHash = report.inputHash;
      report.note = "source pool exhausted";
      result.reports.push_back(std::move(report));
      break;
    }
    const auto end = std::min(sources.size(), cursor + samplesPerIteration);
    const std::vector<Utterance> slice(sources.begin() + static_cast<std::ptrdiff_t>(cursor),
                                       sources.begin() + static_cast<std::ptrdiff_t>(end));
    auto iterBuild = build;
    iterBuild.seed = derive_seed(build.seed, {kIterStream, static_cast<std::uint64_t>(it)});
    const auto ds = build_preference_pairs(result.checkpoint, formatter, world, slice, iterBuild);
    cursor += ds.provenance.sourcesConsumed;
    report.pairs = ds.pairs.size();
    report.sourcesConsumed = ds.provenance.sourcesConsumed;
    report.skipCounts = ds.skip_counts();
    if (ds.pairs.empty()) {
      report.outputHash = report.inputHash;
      report.note = "no preference pairs; stopping";
      result.reports.push_back(std::move(report));
      break;
    }
    auto iterPo = po;
    iterPo.seed = derive_seed(po.seed, {kIterStream, static_cast<std::uint64_t>(it)});
    auto trained = run_po(result.checkpoint, ds.pairs, formatter, iterPo);
    result.checkpoint = std::move(trained.checkpoint);
    report.epochLosses = std::move(trained.epochLosses);
    report.outputHash = checkpoint_hash(result.checkpoint);
    if (evaluate) report.evaluation = evaluate(result.checkpoint);
    result.reports.push_back(std::move(report));
  }
  return result;
}

template double dpo_loss(const Transformer<float>&, const PreferenceExample&, double, double, double,
                         Gradients<float>*, double);
template double dpo_loss(const Transformer<double>&, const PreferenceExample&, double, double, double,
                         Gradients<double>*, double);
template double simpo_loss(const Transformer<float>&, const PreferenceExample&, double, double, Gradients<float>*,
                           double);
template double simpo_loss(const Transformer<double>&, const PreferenceExample&, double, double, Gradients<double>*,
                           double);

}  // namespace s2st
