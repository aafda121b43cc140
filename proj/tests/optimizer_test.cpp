#include <gtest/gtest.h>

#include <cmath>

#include "denfuse/optimizer.hpp"

using namespace denfuse;

TEST(AdamTest, ZeroGradientLeavesParameterUnchanged) {
  ParamPtr p = make_parameter("p", Tensor({2}, {1.5f, -2.0f}));
  AdamOptimizer adam({p});
  adam.step();
  EXPECT_FLOAT_EQ(p->value[0], 1.5f);
  EXPECT_FLOAT_EQ(p->value[1], -2.0f);
  EXPECT_EQ(adam.step_count(), 1);
  adam.step();
  EXPECT_EQ(adam.step_count(), 2);
}

TEST(AdamTest, MovesAgainstConstantGradient) {
  ParamPtr p = make_parameter("p", Tensor({1}, {0.0f}));
  AdamOptimizer adam({p});
  for (int i = 0; i < 50; ++i) {
    p->grad[0] = 2.5f;  // positive gradient -> parameter must decrease
    adam.step();
  }
  EXPECT_LT(p->value[0], 0.0f);

  ParamPtr q = make_parameter("q", Tensor({1}, {0.0f}));
  AdamOptimizer adam2({q});
  for (int i = 0; i < 50; ++i) {
    q->grad[0] = -2.5f;
    adam2.step();
  }
  EXPECT_GT(q->value[0], 0.0f);
}

TEST(AdamTest, SingleStepMatchesHandEvaluatedFormula) {
  const double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  const double g = 0.5;
  // fresh moments, t=1
  const double m = (1.0 - beta1) * g;
  const double v = (1.0 - beta2) * g * g;
  const double mhat = m / (1.0 - beta1);
  const double vhat = v / (1.0 - beta2);
  const double expected = 1.0 - lr * mhat / (std::sqrt(vhat) + eps);

  ParamPtr p = make_parameter("p", Tensor({1}, {1.0f}));
  AdamOptimizer adam({p});
  p->grad[0] = static_cast<float>(g);
  adam.step();
  EXPECT_NEAR(p->value[0], expected, 1e-7);
  EXPECT_FLOAT_EQ(p->grad[0], 0.0f);  // gradients zeroed after the update
}

TEST(AdamTest, TwoStepsMatchHandEvaluatedMoments) {
  const double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double m = 0.0, v = 0.0, value = 2.0;
  const double gradients[2] = {0.3, -0.7};
  for (int t = 1; t <= 2; ++t) {
    const double g = gradients[t - 1];
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g * g;
    const double mhat = m / (1.0 - std::pow(beta1, t));
    const double vhat = v / (1.0 - std::pow(beta2, t));
    value -= lr * mhat / (std::sqrt(vhat) + eps);
  }

  ParamPtr p = make_parameter("p", Tensor({1}, {2.0f}));
  AdamOptimizer adam({p});
  p->grad[0] = 0.3f;
  adam.step();
  p->grad[0] = -0.7f;
  adam.step();
  EXPECT_NEAR(p->value[0], value, 1e-6);
  EXPECT_NEAR(adam.first_moment(0)[0], m, 1e-7);
  EXPECT_NEAR(adam.second_moment(0)[0], v, 2e-8);  // float32 moment storage
}

TEST(AdamTest, ConvergesOnQuadratic) {
  // f(x) = (x - 3)^2
  ParamPtr p = make_parameter("p", Tensor({1}, {0.0f}));
  AdamOptimizer adam({p}, {.learning_rate = 0.1f});
  for (int i = 0; i < 1000; ++i) {
    p->grad[0] = 2.0f * (p->value[0] - 3.0f);
    adam.step();
  }
  EXPECT_NEAR(p->value[0], 3.0f, 1e-3);
}
