#pragma once

#include <string>
#include <utility>

#include "snn/autodiff.hpp"

namespace snn {

enum class Surrogate { arctan, sigmoid };

/// How fire() computes its forward value. `heaviside` is the real spiking
/// neuron; `smooth` emits g(H - v_th) itself and exists so the unrolled
/// network can be checked against finite differences.
enum class FiringMode { heaviside, smooth };

std::string to_string(Surrogate s);
Surrogate surrogate_from_string(const std::string& name);

/// Default sharpness: 2 for arctan, 4 for sigmoid.
double default_alpha(Surrogate s);

struct LIFParams {
  double tau = 2.0;
  double v_th = 1.0;
  double v_reset = 0.0;
  Surrogate surrogate = Surrogate::arctan;
  double alpha = 2.0;
  bool grad_through_reset = false;
  FiringMode firing = FiringMode::heaviside;

  /// Throws DomainError unless tau > 1, v_th > v_reset and alpha > 0.
  void validate() const;

  static LIFParams with_surrogate(Surrogate s) {
    LIFParams p;
    p.surrogate = s;
    p.alpha = default_alpha(s);
    return p;
  }

  friend bool operator==(const LIFParams&, const LIFParams&) = default;
};

struct SurrogateValue {
  double value;
  double derivative;
};

/// sigmoid: g(x) = 1/(1+exp(-alpha x))
/// arctan:  g(x) = atan(pi alpha x / 2)/pi + 1/2, g'(x) = alpha / (2 (1 + (pi alpha x / 2)^2))
SurrogateValue surrogate_value_and_grad(double x, Surrogate kind, double alpha);

/// Membrane state of one layer; v is V[t] (post-reset), h is H[t] (pre-reset).
struct LIFState {
  Var v;
  Var h;
};

/// Resting state: v = h = v_reset everywhere.
LIFState fresh_state(Tape& tape, const Shape& shape, const LIFParams& params);

/// H = V + (X - (V - V_reset)) / tau
Var lif_charge(const Var& v, const Var& x, const LIFParams& params);

/// Forward Heaviside(H - v_th) with Heaviside(0) = 1; backward uses g'.
Var fire(const Var& h, const LIFParams& params);

/// V = H (1 - S) + V_reset S. S carries no gradient unless grad_through_reset.
Var hard_reset(const Var& h, const Var& s, const LIFParams& params);

struct LIFStepResult {
  Var spikes;
  LIFState state;
};

/// charge -> fire -> hard reset.
LIFStepResult lif_step(const LIFState& state, const Var& x, const LIFParams& params);

}  // namespace snn
