#include "cdattack/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace cdattack::ad {

Adam::Adam(std::vector<Parameter*> params, AdamConfig config)
    : params_(std::move(params)), config_(config), learning_rate_(config.learning_rate) {
  if (!(config.learning_rate > 0.0)) throw ConfigError("Adam: learning rate must be > 0");
  if (!(config.decay > 0.0)) throw ConfigError("Adam: decay must be > 0");
  first_.reserve(params_.size());
  second_.reserve(params_.size());
  for (Parameter* p : params_) {
    first_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    second_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step() {
  ++steps_;
  const double correction1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  const double correction2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    first_[i] = config_.beta1 * first_[i] + (1.0 - config_.beta1) * p.grad;
    second_[i] = config_.beta2 * second_[i] + (1.0 - config_.beta2) * p.grad.cwiseAbs2();
    const auto m_hat = first_[i].array() / correction1;
    const auto v_hat = second_[i].array() / correction2;
    p.value.array() -= learning_rate_ * m_hat / (v_hat.sqrt() + config_.epsilon);
    p.zero_grad();
  }
}

void Adam::end_epoch() { learning_rate_ *= config_.decay; }

void Adam::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

void Adam::rebind(std::vector<Parameter*> params) {
  if (params.size() != params_.size()) throw std::logic_error("Adam::rebind: parameter count changed");
  params_ = std::move(params);
}

}  // namespace cdattack::ad
