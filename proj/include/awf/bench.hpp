#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "awf/config.hpp"
#include "awf/instances.hpp"
#include "awf/modulation.hpp"
#include "awf/problem.hpp"

namespace awf {

// Process exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitNotConverged = 2;
inline constexpr int kExitUsage = 64;
inline constexpr int kExitData = 65;

/// Dispatches to solve_frequency_awf, mirror_prox, extragrad_learnedskeleton
/// or pdhg. pdhg solves the transmitter problem against the uniform
/// interference n = N/m.
SolveReport solve_instance(const AwfInstance& instance, const SolverConfig& config,
                           ModelLibrary& library);

struct BenchRow {
  std::size_t m = 0;
  std::string method;
  std::string modulation;
  std::string family;
  double J = 0.0;
  double ineq = 0.0;
  double kkt_p = 0.0;
  double kkt_n = 0.0;
  double time_ms = 0.0;
  std::uint64_t seed = 0;
  // "converged", "not_converged", "error: ..." or, for the per-cell summary
  // row, "summary:n=K;sd_J=...;sd_ineq=...;sd_kkt_p=...;sd_kkt_n=...;sd_time_ms=...".
  std::string status;

  bool is_summary() const { return status.rfind("summary", 0) == 0; }
};

inline constexpr const char* kCsvHeader =
    "m,method,modulation,family,J,ineq,kkt_p,kkt_n,time_ms,seed,status";

/// Numbers are written with %.17g so rows round-trip bitwise.
std::string format_csv_row(const BenchRow& row);
BenchRow parse_csv_row(const std::string& line);
/// Reads a CSV with the standard header; throws DataError on malformed input.
std::vector<BenchRow> read_csv(std::istream& in);
nlohmann::ordered_json row_to_json(const BenchRow& row);

struct BenchOptions {
  std::vector<std::size_t> m_list{64};
  std::vector<Method> methods{Method::MirrorProx};
  std::vector<Family> families{Family::None};
  std::vector<std::string> modulations{"gaussian"};  // mix specs
  std::size_t cells = 3;      // instances per cell, seeds seed .. seed+cells-1
  std::uint64_t seed = 0;
  std::size_t warmup = 2;     // discarded solves per cell before timing
  std::size_t threads = 1;    // instance-level parallelism
  SolverConfig config;        // per-solve seed is replaced by the instance seed
};

/// One row per (instance, method) solve and one summary row per cell, in a
/// fixed order (m, family, modulation, method, seed) independent of threads.
/// Failed solves become rows with an "error: ..." status.
std::vector<BenchRow> run_bench(const BenchOptions& options, ModelLibrary& library);

/// Solves the single (seed, m, family, modulation, method) cell a row
/// describes, without warm-up.
BenchRow replay_row(const BenchRow& row, const SolverConfig& config,
                    ModelLibrary& library);

/// Non-timing columns equal bitwise (status compared too).
bool same_result(const BenchRow& a, const BenchRow& b);

}  // namespace awf
