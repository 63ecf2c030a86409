#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "awf/problem.hpp"

namespace awf {

enum class Family { None, Sparse, Group, Prefix, Dense };

std::string to_string(Family family);
/// "none", "sparse", "group", "prefix", "dense" (case-insensitive).
Family parse_family(const std::string& name);

struct ModulationWeight {
  std::string format;
  double weight = 1.0;
};

/// Parses "gaussian", "16qam:2,64qam:1", or the alias "mixed-qam"
/// (16-QAM and 64-QAM, equal weight). Throws std::invalid_argument.
std::vector<ModulationWeight> parse_modulation_mix(const std::string& text);
/// Inverse of parse_modulation_mix for labels in CSV rows.
std::string mix_label(const std::vector<ModulationWeight>& mix);

/// Optional replacements for the default sampling ranges.
struct DistributionOverrides {
  std::optional<double> rho_lo, rho_hi;      // row fraction, default 0.05..0.30
  std::optional<double> slack_lo, slack_hi;  // slack factor, default 0.01..0.2
  std::optional<double> p_bar, n_bar;        // fixed per-channel budgets
};

struct GeneratorSpec {
  std::size_t m = 0;
  std::uint64_t seed = 0;
  std::vector<ModulationWeight> modulation_mix{{"gaussian", 1.0}};
  Family family = Family::None;
  DistributionOverrides overrides;

  /// Throws std::invalid_argument on m = 0, an empty mix, nonpositive weights,
  /// unknown modulation names or inconsistent overrides.
  void validate() const;
};

/// log beta ~ N(0, 0.6^2), log sigma ~ N(0, 0.25^2); modulation per channel
/// drawn from the mix.
ChannelParams sample_channels(const GeneratorSpec& spec);

/// P = m Pbar, N = m Nbar with Pbar, Nbar ~ U(0.05, 0.5).
Budgets sample_budgets(const GeneratorSpec& spec);

/// K = max(1, round(rho m)) rows, rho ~ U(0.05, 0.30), family pattern,
/// rows normalized to unit sum, p_hat = A p_feasible + slack with
/// slack_s ~ U(0.01, 0.2) (P/m) |support_s|. Requires family != None.
LinearConstraints sample_constraints(const GeneratorSpec& spec,
                                     std::span<const double> p_feasible, double P);

/// Row count for a given rho.
std::size_t constraint_row_count(double rho, std::size_t m);

AwfInstance sample_instance(const GeneratorSpec& spec);

}  // namespace awf
