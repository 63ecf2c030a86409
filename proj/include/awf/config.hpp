#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

namespace awf {

enum class Method { AltBr, MirrorProx, Pdhg, Extragrad };

std::string to_string(Method method);
/// Accepts the CLI names "alt-br", "mirror-prox", "pdhg", "extragrad".
/// Throws std::invalid_argument otherwise.
Method parse_method(const std::string& name);

/// Per-block diagonal stepsizes of the extragradient map, clamped to
/// [clamp_lo, clamp_hi].
struct StepSizes {
  double alpha_p = 0.0;
  double alpha_n = 0.0;
  double alpha_theta = 0.0;
  double clamp_lo = 1e-10;
  double clamp_hi = 1e4;

  static StepSizes uniform(double eta) { return {eta, eta, eta}; }
  /// Throws std::invalid_argument if a stepsize is outside the clamp range.
  void validate() const;
};

/// Dual (alpha) and primal (tau) stepsizes for PDHG; both must be > 0.
struct PdhgSteps {
  double alpha = 0.0;
  double tau = 0.0;

  void validate() const;
};

struct SolverConfig {
  Method method = Method::MirrorProx;
  std::size_t max_iter = 20000;
  double tol = 1e-6;
  std::optional<StepSizes> steps;       // derived per instance when absent
  std::optional<PdhgSteps> pdhg_steps;  // derived per instance when absent
  std::uint64_t seed = 0;
  std::size_t check_every = 10;
  // Optional extra stopping condition on the per-iteration displacement
  // ||z_{k+1} - z_k||_inf; 0 disables it.
  double displacement_tol = 0.0;

  void validate() const;
};

}  // namespace awf
