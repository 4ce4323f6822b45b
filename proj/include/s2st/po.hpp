#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "s2st/checkpoint.hpp"
#include "s2st/optim.hpp"
#include "s2st/prefdata.hpp"
#include "s2st/sft.hpp"

namespace s2st {

enum class PoAlgorithm { DPO, SimPO };
std::string_view to_string(PoAlgorithm a);
PoAlgorithm parse_algorithm(std::string_view s);

struct PoConfig {
  PoAlgorithm algorithm = PoAlgorithm::DPO;
  double beta = 0.1;
  double gamma = 0.5;  // SimPO only
  int epochs = 3;
  int batchSize = 16;
  double learningRate = 2e-4;
  bool useLora = true;
  int loraRank = 8;
  double loraAlpha = 16.0;
  std::uint64_t seed = 0;
  AdamConfig adam;

  void validate() const;
};

/// Prompt and the two full responses, tokenized exactly as in SFT.
struct PreferenceExample {
  std::vector<TokenId> prompt;
  std::vector<TokenId> preferred;
  std::vector<TokenId> rejected;
};

PreferenceExample to_preference_example(const PromptFormatter& formatter, PromptVariant variant,
                                        const PreferencePair& pair);

/// -log sigmoid(beta * ((policyP - refP) - (policyR - refR))).
double dpo_objective(double policyPreferred, double policyRejected, double refPreferred, double refRejected,
                     double beta);
/// -log sigmoid(beta * lp / |p| - beta * lr / |r| - gamma).
double simpo_objective(double logpPreferred, std::size_t lenPreferred, double logpRejected, std::size_t lenRejected,
                       double beta, double gamma);

/// DPO loss of one example against cached reference log-probabilities; with grads,
/// adds weight * dloss/dparameters.
template <class Scalar>
double dpo_loss(const Transformer<Scalar>& policy, const PreferenceExample& ex, double refPreferred,
                double refRejected, double beta, Gradients<Scalar>* grads = nullptr, double weight = 1.0);

template <class Scalar>
double simpo_loss(const Transformer<Scalar>& policy, const PreferenceExample& ex, double beta, double gamma,
                  Gradients<Scalar>* grads = nullptr, double weight = 1.0);

/// Checkpoint-level losses; the vocabularies of policy and reference must match.
double dpo_loss(const ModelCheckpoint& policy, const ModelCheckpoint& reference, const PromptFormatter& formatter,
                const PreferencePair& pair, double beta);
double simpo_loss(const ModelCheckpoint& policy, const PromptFormatter& formatter, const PreferencePair& pair,
                  double beta, double gamma);

/// Mean implicit reward margin beta * ((policyP - refP) - (policyR - refR)) over the pairs.
double mean_reward_margin(const ModelCheckpoint& policy, const ModelCheckpoint& reference,
                          const PromptFormatter& formatter, const std::vector<PreferencePair>& pairs, double beta);
/// Mean configured loss (DPO or SimPO) over the pairs.
double mean_preference_loss(const ModelCheckpoint& policy, const ModelCheckpoint& reference,
                            const PromptFormatter& formatter, const std::vector<PreferencePair>& pairs,
                            const PoConfig& cfg);

struct PoResult {
  ModelCheckpoint checkpoint;  // role PO, adapter merged
  std::vector<double> epochLosses;
};

/// Optimizes `start` on the pairs. The reference is `start` itself, frozen.
PoResult run_po(const ModelCheckpoint& start, const std::vector<PreferencePair>& pairs,
                const PromptFormatter& formatter, const PoConfig& cfg);

struct IterationReport {
  int iteration = 0;
  std::string inputHash;
  std::string outputHash;
  std::size_t pairs = 0;
  std::size_t sourcesConsumed = 0;
  std::map<std::string, std::size_t> skipCounts;
  std::vector<double> epochLosses;
  std::optional<double> evaluation;
  std::string note;
};

struct IterationResult {
  ModelCheckpoint checkpoint;
  std::vector<IterationReport> reports;
};

using CheckpointEvaluator = std::function<double(const ModelCheckpoint&)>;

/// Alternates preference building and PO; each iteration reads a fresh slice of `sources`
/// starting where the previous one stopped and uses the latest checkpoint as policy and reference.
IterationResult run_iterations(const ModelCheckpoint& start, const PromptFormatter& formatter,
                               const SyntheticWorld& world, const std::vector<Utterance>& sources,
                               const PreferenceBuildConfig& build, const PoConfig& po, int iterations,
                               std::size_t samplesPerIteration, const CheckpointEvaluator& evaluate = {});

}  // namespace s2st
