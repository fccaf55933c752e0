#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "snn/error.hpp"
#include "snn/neuron.hpp"
#include "support/oracles.hpp"

namespace snn {
namespace {

std::vector<double> run_layer(const LIFParams& p, const std::vector<std::vector<double>>& inputs) {
  Tape tape;
  const std::size_t n = inputs.front().size();
  LIFState state = fresh_state(tape, {n}, p);
  std::vector<double> spikes;
  for (const auto& x : inputs) {
    LIFStepResult r = lif_step(state, tape.constant(Tensor(Shape{n}, x)), p);
    state = r.state;
    for (double s : r.spikes.value().data()) spikes.push_back(s);
  }
  return spikes;
}

TEST(Surrogate, ArctanMatchesClosedForm) {
  const double a = 2.0;
  for (double x : {-1.3, -0.2, 0.0, 0.4, 2.5}) {
    const auto r = surrogate_value_and_grad(x, Surrogate::arctan, a);
    const double z = std::numbers::pi * a * x / 2.0;
    EXPECT_NEAR(r.value, std::atan(z) / std::numbers::pi + 0.5, 1e-15);
    EXPECT_NEAR(r.derivative, a / (2.0 * (1.0 + z * z)), 1e-15);
  }
}

TEST(Surrogate, DerivativeMatchesFiniteDifference) {
  for (Surrogate kind : {Surrogate::arctan, Surrogate::sigmoid}) {
    const double a = default_alpha(kind);
    for (double x : {-2.0, -0.3, 0.0, 0.7, 3.0}) {
      const double h = 1e-6;
      const double fd = (surrogate_value_and_grad(x + h, kind, a).value -
                         surrogate_value_and_grad(x - h, kind, a).value) /
                        (2 * h);
      EXPECT_NEAR(surrogate_value_and_grad(x, kind, a).derivative, fd, 1e-8) << to_string(kind) << " " << x;
    }
  }
}

TEST(Surrogate, SigmoidIsHalfAtZero) {
  EXPECT_DOUBLE_EQ(surrogate_value_and_grad(0.0, Surrogate::sigmoid, 4.0).value, 0.5);
  EXPECT_DOUBLE_EQ(surrogate_value_and_grad(0.0, Surrogate::sigmoid, 4.0).derivative, 1.0);
}

TEST(Surrogate, NamesRoundTrip) {
  EXPECT_EQ(surrogate_from_string(to_string(Surrogate::sigmoid)), Surrogate::sigmoid);
  EXPECT_THROW(surrogate_from_string("relu"), ConfigError);
}

TEST(LIFParams, ValidateRejectsBadValues) {
  LIFParams p;
  EXPECT_NO_THROW(p.validate());
  p.tau = 1.0;
  EXPECT_THROW(p.validate(), DomainError);
  p = LIFParams{};
  p.v_th = p.v_reset;
  EXPECT_THROW(p.validate(), DomainError);
  p = LIFParams{};
  p.alpha = 0.0;
  EXPECT_THROW(p.validate(), DomainError);
}

TEST(LIF, FiresExactlyAtThreshold) {
  // tau = 2, V = 0: H = X / 2, so X = 2 v_th lands exactly on the threshold.
  LIFParams p;
  p.v_th = 0.75;
  EXPECT_EQ(run_layer(p, {{1.5}}), std::vector<double>{1.0});
  EXPECT_EQ(run_layer(p, {{1.4999}}), std::vector<double>{0.0});
}

TEST(LIF, ConstantInputChargesThenResets) {
  LIFParams p;  // tau 2, v_th 1
  // H: 0.5, 0.75, 0.875, 0.9375, ... never reaches 1 with X = 1.
  EXPECT_EQ(run_layer(p, std::vector<std::vector<double>>(6, {1.0})), std::vector<double>(6, 0.0));
  // With X = 1.5 the potential reaches 1.125 at t = 1 and resets.
  EXPECT_EQ(run_layer(p, std::vector<std::vector<double>>(4, {1.5})), (std::vector<double>{0, 1, 0, 1}));
}

TEST(LIF, ZeroInputNeverFires) {
  LIFParams p;
  EXPECT_EQ(run_layer(p, std::vector<std::vector<double>>(20, std::vector<double>(8, 0.0))),
            std::vector<double>(160, 0.0));
}

TEST(LIF, MatchesScalarOracle) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> tau(1.01, 6.0), vth(0.05, 2.0), x(-1.0, 3.0);
  for (int trial = 0; trial < 10; ++trial) {
    LIFParams p;
    p.tau = tau(rng);
    p.v_th = vth(rng);
    std::vector<std::vector<double>> inputs(30, std::vector<double>(7));
    for (auto& row : inputs)
      for (double& v : row) v = x(rng);
    const auto got = run_layer(p, inputs);
    std::vector<testing::ScalarLIF> ref(7, {p.tau, p.v_th, p.v_reset, p.v_reset});
    for (std::size_t t = 0; t < inputs.size(); ++t)
      for (std::size_t i = 0; i < 7; ++i) ASSERT_EQ(got[t * 7 + i], ref[i].step(inputs[t][i]));
  }
}

TEST(LIF, ResetGradientStopsByDefault) {
  LIFParams p;
  p.firing = FiringMode::smooth;
  Tape tape;
  Var h = tape.variable(Tensor::from_list({2.0}));
  Var s = tape.variable(Tensor::from_list({0.25}));
  tape.backward(ops::sum(hard_reset(h, s, p)));
  EXPECT_DOUBLE_EQ(tape.grad(h)[0], 0.75);
  // Nothing flows into the spike input, so its buffer is never allocated.
  const auto gs = tape.grad(s);
  EXPECT_TRUE(gs.empty() || gs[0] == 0.0);

  p.grad_through_reset = true;
  Tape tape2;
  Var h2 = tape2.variable(Tensor::from_list({2.0}));
  Var s2 = tape2.variable(Tensor::from_list({0.25}));
  tape2.backward(ops::sum(hard_reset(h2, s2, p)));
  EXPECT_DOUBLE_EQ(tape2.grad(s2)[0], -2.0);
}

TEST(LIF, FireBackwardUsesSurrogate) {
  LIFParams p;
  Tape tape;
  Var h = tape.variable(Tensor::from_list({0.8}));
  tape.backward(ops::sum(fire(h, p)));
  EXPECT_DOUBLE_EQ(tape.grad(h)[0], surrogate_value_and_grad(-0.2, Surrogate::arctan, 2.0).derivative);
}

TEST(LIF, ShapeMismatchThrows) {
  Tape tape;
  LIFParams p;
  LIFState st = fresh_state(tape, {3}, p);
  EXPECT_THROW(lif_step(st, tape.constant(Tensor(Shape{4})), p), DimensionError);
}

}  // namespace
}  // namespace snn
