#pragma once

#include <cmath>

#include "s2st/model.hpp"

namespace s2st {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Global gradient-norm clip; 0 disables clipping.
  double clipNorm = 1.0;
};

template <class Scalar>
class Adam {
 public:
  Adam() = default;
  Adam(Eigen::Index size, AdamConfig cfg = {})
      : cfg_(cfg), m_(Vector<Scalar>::Zero(size)), v_(Vector<Scalar>::Zero(size)) {}

  void step(Vector<Scalar>& params, const Vector<Scalar>& grads, double learningRate) {
    ++t_;
    Scalar clip = 1;
    if (cfg_.clipNorm > 0) {
      const double norm = static_cast<double>(grads.norm());
      if (norm > cfg_.clipNorm) clip = static_cast<Scalar>(cfg_.clipNorm / norm);
    }
    const auto b1 = static_cast<Scalar>(cfg_.beta1);
    const auto b2 = static_cast<Scalar>(cfg_.beta2);
    m_ = b1 * m_ + (1 - b1) * clip * grads;
    v_ = b2 * v_ + (1 - b2) * (clip * grads).cwiseAbs2();
    const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
    const auto lr = static_cast<Scalar>(learningRate / c1);
    const auto vScale = static_cast<Scalar>(1.0 / c2);
    const auto eps = static_cast<Scalar>(cfg_.epsilon);
    params.array() -= lr * m_.array() / ((v_.array() * vScale).sqrt() + eps);
  }

  long steps() const { return t_; }

 private:
  AdamConfig cfg_;
  Vector<Scalar> m_, v_;
  long t_ = 0;
};

}  // namespace s2st
