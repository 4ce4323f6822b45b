#include "s2st/lora.hpp"

#include <cmath>

#include "s2st/rng.hpp"

namespace s2st {

template <class Scalar>
LoraAdapter<Scalar> zero_adapter(const ParameterLayout& layout, int rank, double alpha) {
  LoraAdapter<Scalar> a;
  a.rank = rank;
  a.alpha = alpha;
  Eigen::Index total = 0;
  for (const auto& blk : layout.blocks) {
    std::array<Eigen::Index, kLinearSlots> down{}, up{};
    for (std::size_t s = 0; s < kLinearSlots; ++s) {
      const auto& w = layout[blk.weight[s]];
      down[s] = total;
      total += w.rows * rank;
      up[s] = total;
      total += rank * w.cols;
    }
    a.downOffset.push_back(down);
    a.upOffset.push_back(up);
  }
  a.params = Vector<Scalar>::Zero(total);
  return a;
}

template <class Scalar>
void apply_lora(Transformer<Scalar>& model, int rank, double alpha, std::uint64_t seed) {
  const auto& layout = model.layout();
  if (rank < 1) fail_usage("LoRA rank must be >= 1");
  for (const auto& blk : layout.blocks)
    for (auto w : blk.weight)
      if (rank > std::min(layout[w].rows, layout[w].cols))
        fail_usage("LoRA rank " + std::to_string(rank) + " exceeds the smallest dimension of " + layout[w].name);

  LoraAdapter<Scalar> a = zero_adapter<Scalar>(layout, rank, alpha);
  Rng rng(derive_seed(seed, {0x4c4f5241}));
  for (std::size_t b = 0; b < layout.blocks.size(); ++b) {
    for (std::size_t s = 0; s < kLinearSlots; ++s) {
      const auto& w = layout[layout.blocks[b].weight[s]];
      const double stddev = 1.0 / std::sqrt(static_cast<double>(w.rows));
      for (Eigen::Index i = 0; i < w.rows * rank; ++i)
        a.params[a.downOffset[b][s] + i] = static_cast<Scalar>(normal(rng, stddev));
    }
  }
  model.set_adapter(std::move(a));
}

template <class Scalar>
Matrix<Scalar> lora_delta(const Transformer<Scalar>& model, std::size_t block, LinearSlot slot) {
  return model.adapter().scale() * (model.lora_down(block, slot) * model.lora_up(block, slot));
}

template <class Scalar>
Transformer<Scalar> merge_lora(const Transformer<Scalar>& model) {
  Transformer<Scalar> merged(model.config(), model.parameters());
  if (!model.has_adapter()) return merged;
  for (std::size_t b = 0; b < model.layout().blocks.size(); ++b)
    for (int s = 0; s < kLinearSlots; ++s) {
      const auto slot = static_cast<LinearSlot>(s);
      merged.tensor(model.layout().blocks[b].weight[static_cast<std::size_t>(s)]) += lora_delta(model, b, slot);
    }
  return merged;
}

template LoraAdapter<float> zero_adapter(const ParameterLayout&, int, double);
template LoraAdapter<double> zero_adapter(const ParameterLayout&, int, double);
template void apply_lora(Transformer<float>&, int, double, std::uint64_t);
template void apply_lora(Transformer<double>&, int, double, std::uint64_t);
template Matrix<float> lora_delta(const Transformer<float>&, std::size_t, LinearSlot);
template Matrix<double> lora_delta(const Transformer<double>&, std::size_t, LinearSlot);
template Transformer<float> merge_lora(const Transformer<float>&);
template Transformer<double> merge_lora(const Transformer<double>&);

}  // namespace s2st
