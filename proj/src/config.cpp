#include "awf/config.hpp"

#include <cmath>
#include <stdexcept>

namespace awf {

std::string to_string(Method method) {
  switch (method) {
    case Method::AltBr: return "alt-br";
    case Method::MirrorProx: return "mirror-prox";
    case Method::Pdhg: return "pdhg";
    case Method::Extragrad: return "extragrad";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  if (name == "alt-br") return Method::AltBr;
  if (name == "mirror-prox") return Method::MirrorProx;
  if (name == "pdhg") return Method::Pdhg;
  if (name == "extragrad") return Method::Extragrad;
  throw std::invalid_argument("unknown method '" + name + "'");
}

void StepSizes::validate() const {
  if (!(clamp_lo > 0.0) || !(clamp_hi >= clamp_lo)) {
    throw std::invalid_argument("stepsize clamp range must satisfy 0 < lo <= hi");
  }
  for (double a : {alpha_p, alpha_n, alpha_theta}) {
    if (!std::isfinite(a) || a < clamp_lo || a > clamp_hi) {
      throw std::invalid_argument("stepsize outside [clamp_lo, clamp_hi]");
    }
  }
}

void PdhgSteps::validate() const {
  if (!(alpha > 0.0) || !(tau > 0.0) || !std::isfinite(alpha) ||
      !std::isfinite(tau)) {
    throw std::invalid_argument("pdhg stepsizes must be positive and finite");
  }
}

void SolverConfig::validate() const {
  if (max_iter == 0) throw std::invalid_argument("max_iter must be positive");
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
  if (check_every == 0) throw std::invalid_argument("check_every must be positive");
  if (!(displacement_tol >= 0.0)) {
    throw std::invalid_argument("displacement_tol must be nonnegative");
  }
  if (steps) steps->validate();
  if (pdhg_steps) pdhg_steps->validate();
}

}  // namespace awf
