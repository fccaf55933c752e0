#include "snn/neuron.hpp"

#include <cmath>
#include <numbers>

#include "snn/error.hpp"

namespace snn {

std::string to_string(Surrogate s) { return s == Surrogate::arctan ? "arctan" : "sigmoid"; }

Surrogate surrogate_from_string(const std::string& name) {
  if (name == "arctan" || name == "atan") return Surrogate::arctan;
  if (name == "sigmoid") return Surrogate::sigmoid;
  throw ConfigError("unknown surrogate '" + name + "' (expected arctan or sigmoid)");
}

double default_alpha(Surrogate s) { return s == Surrogate::arctan ? 2.0 : 4.0; }

void LIFParams::validate() const {
  if (!(tau > 1.0)) throw DomainError("LIF tau must be > 1, got " + std::to_string(tau));
  if (!(v_th > v_reset)) {
    throw DomainError("LIF v_th (" + std::to_string(v_th) + ") must exceed v_reset (" +
                      std::to_string(v_reset) + ")");
  }
  if (!(alpha > 0.0)) throw DomainError("surrogate alpha must be > 0");
}

SurrogateValue surrogate_value_and_grad(double x, Surrogate kind, double alpha) {
  if (!(alpha > 0.0)) throw DomainError("surrogate alpha must be > 0");
  if (kind == Surrogate::sigmoid) {
    const double s = 1.0 / (1.0 + std::exp(-alpha * x));
    return {s, alpha * s * (1.0 - s)};
  }
  const double u = std::numbers::pi * alpha * x / 2.0;
  return {std::atan(u) / std::numbers::pi + 0.5, alpha / (2.0 * (1.0 + u * u))};
}

LIFState fresh_state(Tape& tape, const Shape& shape, const LIFParams& params) {
  Var rest = tape.constant(Tensor(shape, params.v_reset));
  return {rest, rest};
}

Var lif_charge(const Var& v, const Var& x, const LIFParams& params) {
  if (v.shape() != x.shape()) {
    throw DimensionError("lif_charge: state " + shape_to_string(v.shape()) + " vs input " +
                         shape_to_string(x.shape()));
  }
  const double inv_tau = 1.0 / params.tau;
  const double v_reset = params.v_reset;
  Tensor out = v.value();
  auto h = out.data();
  auto xv = x.value().data();
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double vi = h[i];
    h[i] = vi + inv_tau * (xv[i] - (vi - v_reset));
  }
  return v.tape().record(std::move(out), {v, x}, [inv_tau](BackwardContext& ctx) {
    auto g = ctx.out_grad();
    if (ctx.needs_grad(0)) {
      auto d = ctx.input_grad(0);
      const double k = 1.0 - inv_tau;
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * k;
    }
    if (ctx.needs_grad(1)) {
      auto d = ctx.input_grad(1);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * inv_tau;
    }
  });
}

Var fire(const Var& h, const LIFParams& params) {
  Tensor out = h.value();
  const bool smooth = params.firing == FiringMode::smooth;
  for (double& x : out.data()) {
    const double centered = x - params.v_th;
    x = smooth ? surrogate_value_and_grad(centered, params.surrogate, params.alpha).value
               : (centered >= 0.0 ? 1.0 : 0.0);
  }
  const double v_th = params.v_th;
  const double alpha = params.alpha;
  const Surrogate kind = params.surrogate;
  return h.tape().record(std::move(out), {h}, [v_th, alpha, kind](BackwardContext& ctx) {
    auto g = ctx.out_grad();
    auto d = ctx.input_grad(0);
    auto hv = ctx.input(0).data();
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (g[i] == 0.0) continue;
      d[i] += g[i] * surrogate_value_and_grad(hv[i] - v_th, kind, alpha).derivative;
    }
  });
}

Var hard_reset(const Var& h, const Var& s, const LIFParams& params) {
  if (h.shape() != s.shape()) {
    throw DimensionError("hard_reset: potential " + shape_to_string(h.shape()) + " vs spikes " +
                         shape_to_string(s.shape()));
  }
  const double v_reset = params.v_reset;
  Tensor out = h.value();
  auto v = out.data();
  auto sv = s.value().data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = v[i] * (1.0 - sv[i]) + v_reset * sv[i];
  const bool through_reset = params.grad_through_reset;
  return h.tape().record(std::move(out), {h, s}, [v_reset, through_reset](BackwardContext& ctx) {
    auto g = ctx.out_grad();
    auto hv = ctx.input(0).data();
    auto spikes = ctx.input(1).data();
    if (ctx.needs_grad(0)) {
      auto d = ctx.input_grad(0);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * (1.0 - spikes[i]);
    }
    if (through_reset && ctx.needs_grad(1)) {
      auto d = ctx.input_grad(1);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * (v_reset - hv[i]);
    }
  });
}

LIFStepResult lif_step(const LIFState& state, const Var& x, const LIFParams& params) {
  Var h = lif_charge(state.v, x, params);
  Var s = fire(h, params);
  Var v = hard_reset(h, s, params);
  return {s, {v, h}};
}

}  // namespace snn
