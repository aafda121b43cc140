#pragma once

// Adam with bias correction. Gradients are zeroed after each step.

#include <cmath>
#include <cstdint>
#include <vector>

#include "denfuse/autograd.hpp"

namespace denfuse {

struct AdamConfig {
  float learning_rate = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;
};

class AdamOptimizer {
 public:
  explicit AdamOptimizer(std::vector<ParamPtr> params, AdamConfig config = {})
      : params_(std::move(params)), config_(config) {
    first_moment_.reserve(params_.size());
    second_moment_.reserve(params_.size());
    for (const ParamPtr& p : params_) {
      first_moment_.emplace_back(p->value.shape());
      second_moment_.emplace_back(p->value.shape());
    }
  }

  void step() {
    ++step_count_;
    const double bc1 = 1.0 - std::pow(static_cast<double>(config_.beta1), step_count_);
    const double bc2 = 1.0 - std::pow(static_cast<double>(config_.beta2), step_count_);
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
      Parameter& p = *params_[pi];
      Tensor& m = first_moment_[pi];
      Tensor& v = second_moment_[pi];
      for (std::int64_t i = 0; i < p.value.size(); ++i) {
        const float g = p.grad[i];
        m[i] = config_.beta1 * m[i] + (1.0f - config_.beta1) * g;
        v[i] = config_.beta2 * v[i] + (1.0f - config_.beta2) * g * g;
        const float mhat = static_cast<float>(m[i] / bc1);
        const float vhat = static_cast<float>(v[i] / bc2);
        p.value[i] -= config_.learning_rate * mhat / (std::sqrt(vhat) + config_.epsilon);
      }
      p.zero_grad();
    }
  }

  std::int64_t step_count() const { return step_count_; }
  void set_learning_rate(float lr) { config_.learning_rate = lr; }
  const AdamConfig& config() const { return config_; }
  const Tensor& first_moment(std::size_t i) const { return first_moment_[i]; }
  const Tensor& second_moment(std::size_t i) const { return second_moment_[i]; }

 private:
  std::vector<ParamPtr> params_;
  AdamConfig config_;
  std::vector<Tensor> first_moment_;
  std::vector<Tensor> second_moment_;
  std::int64_t step_count_ = 0;
};

}  // namespace denfuse
