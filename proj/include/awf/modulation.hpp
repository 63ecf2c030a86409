#pragma once

#include <complex>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "awf/problem.hpp"

namespace awf {

/// Raised when adaptive quadrature cannot meet its tolerance within the
/// maximum order.
class QuadratureError : public Error {
 public:
  using Error::Error;
};

/// Equiprobable constellation with unit average energy.
struct Constellation {
  std::string name;
  std::vector<std::complex<double>> points;
  // Per-dimension amplitude levels when the constellation is a square QAM
  // (points = {a + jb : a, b in pam_levels}); empty otherwise.
  std::vector<double> pam_levels;
};

/// Square M-QAM, M = 4, 16, 64, 256, ... (a power of four).
Constellation make_qam(std::size_t order);

/// Arbitrary constellation; points are rescaled to unit average energy.
Constellation make_constellation(std::string name,
                                 std::vector<std::complex<double>> points);

/// ln(1 + gamma) in nats. Throws std::domain_error for gamma < 0.
double gaussian_mi(double gamma);
/// 1 / (1 + gamma). Throws std::domain_error for gamma < 0.
double gaussian_mmse(double gamma);

struct QuadratureOptions {
  std::size_t base_order = 32;  // noise nodes per real dimension
  std::size_t max_order = 8192;
  double tol = 1e-13;  // absolute agreement between successive orders
};

/// MMSE of X given Y = sqrt(gamma) X + Z, Z ~ CN(0, 1), by quadrature over
/// the noise (composite Gauss-Legendre against the Gaussian density, nodes per
/// real dimension = order; square QAM factorizes). The order starts at
/// opts.base_order and doubles until two successive estimates agree within
/// opts.tol; QuadratureError if that needs more than opts.max_order.
double qam_mmse(const Constellation& c, double gamma,
                const QuadratureOptions& opts = {});

/// Single fixed-order Gauss-Hermite evaluation. With factorized = false the full 2-D
/// tensor rule is summed even for square QAM.
double qam_mmse_at_order(const Constellation& c, double gamma,
                         std::size_t order, bool factorized = true);

/// Tabulated I(gamma) / mmse(gamma) on a log-spaced SNR grid.
struct MmseTable {
  std::string name;
  double db_lo = -10.0;
  double db_hi = 30.0;
  double mmse_zero = 1.0;       // mmse(0)
  double mmse_slope_zero = -1.0;  // d mmse / d gamma at 0
  std::vector<double> snr;      // linear scale, increasing, L points
  std::vector<double> mmse;     // nonincreasing, in (0, 1]
  std::vector<double> mi;       // nats; mi[0] integrates [0, snr[0]]
  std::vector<double> segment;  // segment[j] = mi[j+1] - mi[j], unrounded
};

/// Mutual information model I(gamma) with derivative I'(gamma) = mmse(gamma).
/// Gaussian models are analytic. Table models interpolate MI with a C1 cubic
/// Hermite in gamma (node values mi, node slopes mmse) and return its exact
/// derivative as the MMSE, so the two are consistent by construction. Below
/// the grid a quartic also matches mmse(0) and its slope there.
class ModulationModel {
 public:
  static ModulationModel gaussian();
  /// Validates the table invariants; throws DataError on violation.
  static ModulationModel from_table(MmseTable table);

  bool is_gaussian() const { return !table_.has_value(); }
  const std::string& name() const { return name_; }
  const MmseTable& table() const;

  double mi(double gamma) const;
  double mmse(double gamma) const;

 private:
  ModulationModel() = default;

  std::string name_;
  std::optional<MmseTable> table_;
};

double eval_mi(const ModulationModel& model, double gamma);
double eval_mmse(const ModulationModel& model, double gamma);

struct TableSettings {
  double db_lo = -10.0;
  double db_hi = 30.0;
  std::size_t points = 96;
  std::size_t refine = 16;  // Gauss-Legendre nodes per grid interval
  QuadratureOptions quadrature;
};

/// L grid points log-spaced between 10^(db_lo/10) and 10^(db_hi/10); MMSE by
/// qam_mmse; MI by Gauss-Legendre integration of the MMSE over each grid
/// interval, anchored at I(0) = 0 and capped at ln M. Requires db_lo < db_hi and L >= 16.
ModulationModel build_table(const Constellation& c, double db_lo, double db_hi,
                            std::size_t points, std::size_t refine = 16,
                            const QuadratureOptions& quad = {});

/// Same construction for an arbitrary MMSE function (mmse(0) is evaluated).
ModulationModel build_table(const std::string& name,
                            const std::function<double(double)>& mmse,
                            double db_lo, double db_hi, std::size_t points,
                            std::size_t refine = 16);

inline constexpr int kTableCacheVersion = 2;

nlohmann::ordered_json table_to_json(const MmseTable& table);
MmseTable table_from_json(const nlohmann::json& j);

/// Per-channel model pointers; the owning ModelLibrary must outlive them.
using ModelRefs = std::vector<const ModulationModel*>;

/// Resolves modulation identifiers ("gaussian", "qpsk", "4qam", "16qam",
/// "64qam", "256qam", ...) to models, building tables on first use. Tables
/// can be persisted in a cache directory keyed by (name, db_lo, db_hi, L).
/// Thread-safe.
class ModelLibrary {
 public:
  explicit ModelLibrary(TableSettings settings = {},
                        std::optional<std::filesystem::path> cache_dir = {},
                        bool force_rebuild = false);

  std::shared_ptr<const ModulationModel> get(const std::string& id);
  ModelRefs resolve(const ChannelParams& channels);

  const TableSettings& settings() const { return settings_; }

  /// Process-wide library; cache directory taken from AWF_TABLE_CACHE.
  static ModelLibrary& shared();

 private:
  std::shared_ptr<const ModulationModel> load_or_build(const std::string& id);

  TableSettings settings_;
  std::optional<std::filesystem::path> cache_dir_;
  bool force_rebuild_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const ModulationModel>> models_;
};

/// Canonical identifier ("QPSK" -> "4qam", "16QAM" -> "16qam", ...).
/// Throws DataError for unknown names.
std::string canonical_modulation(const std::string& id);

}  // namespace awf
