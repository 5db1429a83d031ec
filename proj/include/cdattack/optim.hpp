#pragma once

#include <vector>

#include "cdattack/autodiff.hpp"

namespace cdattack::ad {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Multiplicative learning-rate decay applied at every epoch boundary.
  double decay = 0.9995;
};

/// Adam with bias correction and exponential learning-rate decay.
///
/// One full-batch step per epoch is the intended use: step() applies the
/// update, zeroes the gradients, and end_epoch() decays the learning rate.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamConfig config);

  void step();
  void end_epoch();
  void zero_grad();
  /// Points the optimizer (and its moment state) at a deep copy of its parameters.
  void rebind(std::vector<Parameter*> params);

  double learning_rate() const { return learning_rate_; }
  long steps() const { return steps_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<Matrix> first_;
  std::vector<Matrix> second_;
  AdamConfig config_;
  double learning_rate_;
  long steps_ = 0;
};

}  // namespace cdattack::ad
