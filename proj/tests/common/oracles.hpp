#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "s2st/model.hpp"
#include "s2st/po.hpp"
#include "s2st/rng.hpp"
#include "s2st/sft.hpp"

namespace s2st::testing {

struct GradCheck {
  double relError = 0.0;
  std::size_t checked = 0;
};

/// Central differences on a sample of coordinates: half uniformly drawn, half the
/// largest analytic entries. Base coordinates are skipped when the gradient is adapter-only.
template <class Loss>
GradCheck finite_difference_check(Transformer<double>& model, const Gradients<double>& analytic, Loss loss,
                                  std::size_t samples, std::uint64_t seed, double step = 1e-4) {
  struct Coord {
    Eigen::VectorXd* params;
    const Eigen::VectorXd* grad;
    Eigen::Index index;
  };
  std::vector<Coord> pool;
  auto add_all = [&](Eigen::VectorXd& p, const Eigen::VectorXd& g) {
    for (Eigen::Index i = 0; i < p.size(); ++i) pool.push_back({&p, &g, i});
  };
  if (analytic.trainBase) add_all(model.parameters(), analytic.base);
  if (model.has_adapter()) add_all(model.adapter().params, analytic.adapter);

  Rng rng(seed);
  std::vector<Coord> picked;
  std::shuffle(pool.begin(), pool.end(), rng);
  const std::size_t half = std::min(samples / 2, pool.size());
  picked.insert(picked.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(half));
  std::partial_sort(pool.begin() + static_cast<std::ptrdiff_t>(half),
                    pool.begin() + static_cast<std::ptrdiff_t>(std::min(samples, pool.size())), pool.end(),
                    [](const Coord& a, const Coord& b) { return std::abs((*a.grad)[a.index]) > std::abs((*b.grad)[b.index]); });
  picked.insert(picked.end(), pool.begin() + static_cast<std::ptrdiff_t>(half),
                pool.begin() + static_cast<std::ptrdiff_t>(std::min(samples, pool.size())));

  double diff2 = 0, a2 = 0, n2 = 0;
  for (const auto& c : picked) {
    double& x = (*c.params)[c.index];
    const double saved = x;
    x = saved + step;
    const double up = loss(model);
    x = saved - step;
    const double down = loss(model);
    x = saved;
    const double numeric = (up - down) / (2 * step);
    const double exact = (*c.grad)[c.index];
    diff2 += (numeric - exact) * (numeric - exact);
    a2 += exact * exact;
    n2 += numeric * numeric;
  }
  GradCheck out;
  out.checked = picked.size();
  out.relError = std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(n2), 1e-12});
  return out;
}

/// Preference example whose preferred response answers the prompt and whose rejected
/// response answers a different source.
inline PreferenceExample mismatched_example(const PromptFormatter& formatter, PromptVariant variant,
                                            const ParallelSample& answered, const ParallelSample& other) {
  const Direction d = answered.direction;
  PreferenceExample ex;
  ex.prompt = formatter.speech_prompt(Task::S2ST, answered.sourceSpeech, source_language(d));
  ex.preferred = formatter.s2st_response(variant, answered.targetText,
                                         formatter.frontend().encode(answered.targetSpeech, target_language(d)),
                                         target_language(d));
  ex.rejected = formatter.s2st_response(variant, other.targetText,
                                        formatter.frontend().encode(other.targetSpeech, target_language(d)),
                                        target_language(d));
  return ex;
}

/// Gaussian noise on every parameter, so that gradients are not dominated by initialization symmetry.
inline void jitter(Transformer<double>& model, double stddev, std::uint64_t seed) {
  Rng rng(seed);
  for (Eigen::Index i = 0; i < model.parameters().size(); ++i) model.parameters()[i] += normal(rng, stddev);
  if (model.has_adapter())
    for (Eigen::Index i = 0; i < model.adapter().params.size(); ++i) model.adapter().params[i] = normal(rng, 0.05);
}

}  // namespace s2st::testing
