// awf: generate, solve and benchmark adversarial water-filling instances.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "awf/bench.hpp"
#include "awf/instances.hpp"
#include "awf/modulation.hpp"
#include "awf/problem.hpp"

namespace fs = std::filesystem;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename T, typename Parse>
std::vector<T> split_list(const std::string& text, Parse parse) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) throw UsageError("empty element in list '" + text + "'");
    out.push_back(parse(item));
  }
  if (out.empty()) throw UsageError("empty list");
  return out;
}

std::size_t parse_count(const std::string& s) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    throw UsageError("expected a positive integer, got '" + s + "'");
  }
  return std::stoull(s);
}

struct SolverFlags {
  std::size_t max_iter = 20000;
  double tol = 1e-6;
  std::size_t check_every = 10;
  double alpha = 0.0;
  double alpha_p = 0.0, alpha_n = 0.0, alpha_theta = 0.0;
  double pdhg_alpha = 0.0, pdhg_tau = 0.0;

  void add_to(CLI::App* app) {
    app->add_option("--max-iter", max_iter, "Iteration limit")->check(CLI::PositiveNumber);
    app->add_option("--tol", tol, "Stationarity tolerance")->check(CLI::PositiveNumber);
    app->add_option("--check-every", check_every, "Residual check period")
        ->check(CLI::PositiveNumber);
    app->add_option("--alpha", alpha, "Uniform extragradient stepsize (default 0.5/L)");
    app->add_option("--alpha-p", alpha_p, "Extragrad stepsize for p");
    app->add_option("--alpha-n", alpha_n, "Extragrad stepsize for n");
    app->add_option("--alpha-theta", alpha_theta, "Extragrad stepsize for theta");
    app->add_option("--pdhg-alpha", pdhg_alpha, "PDHG dual stepsize");
    app->add_option("--pdhg-tau", pdhg_tau, "PDHG primal stepsize");
  }

  awf::SolverConfig config(awf::Method method, std::uint64_t seed) const {
    awf::SolverConfig c;
    c.method = method;
    c.max_iter = max_iter;
    c.tol = tol;
    c.check_every = check_every;
    c.seed = seed;
    if (alpha != 0.0) c.steps = awf::StepSizes::uniform(alpha);
    if (alpha_p != 0.0 || alpha_n != 0.0 || alpha_theta != 0.0) {
      awf::StepSizes s = c.steps.value_or(awf::StepSizes{});
      if (alpha_p != 0.0) s.alpha_p = alpha_p;
      if (alpha_n != 0.0) s.alpha_n = alpha_n;
      if (alpha_theta != 0.0) s.alpha_theta = alpha_theta;
      c.steps = s;
    }
    if (pdhg_alpha != 0.0 || pdhg_tau != 0.0) c.pdhg_steps = awf::PdhgSteps{pdhg_alpha, pdhg_tau};
    try {
      c.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    return c;
  }
};

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw awf::DataError("cannot write '" + path + "'");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial water-filling solvers and benchmarks"};
  app.require_subcommand(1);

  std::string table_cache;
  bool rebuild_tables = false;
  app.add_option("--table-cache", table_cache,
                 "MMSE table cache directory (default: $AWF_TABLE_CACHE)");
  app.add_flag("--rebuild-tables", rebuild_tables, "Ignore cached MMSE tables");

  // gen
  auto* gen = app.add_subcommand("gen", "Generate random instances");
  std::size_t gen_m = 0;
  std::uint64_t gen_seed = 0;
  std::string gen_family = "none";
  std::string gen_mod = "gaussian";
  std::size_t gen_count = 1;
  std::string gen_out = ".";
  gen->add_option("--m", gen_m, "Number of channels")->required();
  gen->add_option("--seed", gen_seed, "Seed of the first instance");
  gen->add_option("--family", gen_family, "none|sparse|group|prefix|dense");
  gen->add_option("--modulation", gen_mod, "Modulation mix, e.g. gaussian, 16qam:1,64qam:1, mixed-qam");
  gen->add_option("--count", gen_count, "Number of instances (seeds seed..seed+count-1)");
  gen->add_option("--out", gen_out, "Output directory, or file name when count is 1");

  // solve
  auto* solve = app.add_subcommand("solve", "Solve one instance and print the report as JSON");
  std::string solve_path;
  std::string solve_method = "mirror-prox";
  std::uint64_t solve_seed = 0;
  std::string solve_out;
  SolverFlags solve_flags;
  solve->add_option("instance", solve_path, "Instance JSON file")->required();
  solve->add_option("--method", solve_method, "alt-br|mirror-prox|pdhg|extragrad");
  solve->add_option("--seed", solve_seed, "Seed for the stepsize estimate");
  solve->add_option("--out", solve_out, "Write the report here instead of stdout");
  solve_flags.add_to(solve);

  // bench
  auto* bench = app.add_subcommand("bench", "Run a benchmark sweep and write CSV");
  std::string bench_m = "64";
  std::string bench_methods = "mirror-prox";
  std::string bench_families = "none";
  std::vector<std::string> bench_mods;
  std::size_t bench_cells = 3;
  std::uint64_t bench_seed = 0;
  std::size_t bench_warmup = 2;
  std::size_t bench_threads = 1;
  std::string bench_format = "csv";
  std::string bench_out;
  std::string bench_replay;
  SolverFlags bench_flags;
  bench->add_option("--m", bench_m, "Comma-separated channel counts");
  bench->add_option("--methods", bench_methods, "Comma-separated methods");
  bench->add_option("--families", bench_families, "Comma-separated constraint families");
  bench->add_option("--modulation", bench_mods, "Modulation mix (repeatable)");
  bench->add_option("--cells", bench_cells, "Instances per cell")->check(CLI::PositiveNumber);
  bench->add_option("--seed", bench_seed, "Seed of the first instance in each cell");
  bench->add_option("--warmup", bench_warmup, "Untimed solves per cell");
  bench->add_option("--threads", bench_threads, "Parallel solves")->check(CLI::PositiveNumber);
  bench->add_option("--format", bench_format, "csv|json")
      ->check(CLI::IsMember({"csv", "json"}));
  bench->add_option("--out", bench_out, "Output file (default stdout)");
  bench->add_option("--replay", bench_replay,
                    "Re-run every solve row of a CSV and compare non-timing columns");
  bench_flags.add_to(bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? awf::kExitOk : awf::kExitUsage;
  }

  try {
    std::optional<fs::path> cache;
    if (!table_cache.empty()) {
      cache = table_cache;
    } else if (const char* env = std::getenv("AWF_TABLE_CACHE"); env && *env) {
      cache = env;
    }
    awf::ModelLibrary library(awf::TableSettings{}, cache, rebuild_tables);

    if (*gen) {
      if (gen_m == 0) throw UsageError("--m must be at least 1");
      if (gen_count == 0) throw UsageError("--count must be at least 1");
      awf::GeneratorSpec spec;
      spec.m = gen_m;
      try {
        spec.family = awf::parse_family(gen_family);
        spec.modulation_mix = awf::parse_modulation_mix(gen_mod);
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      const bool single_file = gen_count == 1 && fs::path(gen_out).extension() == ".json";
      if (!single_file) {
        std::error_code ec;
        fs::create_directories(gen_out, ec);
        if (ec) throw awf::DataError("cannot create directory '" + gen_out + "'");
      }
      for (std::size_t k = 0; k < gen_count; ++k) {
        spec.seed = gen_seed + k;
        const auto inst = awf::sample_instance(spec);
        const fs::path path =
            single_file ? fs::path(gen_out)
                        : fs::path(gen_out) / ("awf_m" + std::to_string(gen_m) + "_" +
                                               gen_family + "_s" +
                                               std::to_string(spec.seed) + ".json");
        awf::save_instance(inst, path.string());
        std::cout << path.string() << '\n';
      }
      return awf::kExitOk;
    }

    if (*solve) {
      awf::Method method;
      try {
        method = awf::parse_method(solve_method);
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      const auto config = solve_flags.config(method, solve_seed);
      const auto inst = awf::load_instance(solve_path);
      const auto report = awf::solve_instance(inst, config, library);
      const std::string text = awf::report_to_json(report).dump(1) + "\n";
      if (solve_out.empty()) {
        std::cout << text;
      } else {
        open_output(solve_out) << text;
      }
      return report.converged ? awf::kExitOk : awf::kExitNotConverged;
    }

    if (*bench) {
      std::ostringstream text;
      if (!bench_replay.empty()) {
        std::ifstream in(bench_replay);
        if (!in) throw awf::DataError("cannot read '" + bench_replay + "'");
        const auto rows = awf::read_csv(in);
        std::size_t checked = 0;
        std::size_t mismatched = 0;
        for (const auto& row : rows) {
          if (row.is_summary()) continue;
          awf::Method method;
          try {
            method = awf::parse_method(row.method);
          } catch (const std::invalid_argument& e) {
            throw awf::DataError(e.what());
          }
          const auto again =
              awf::replay_row(row, bench_flags.config(method, row.seed), library);
          ++checked;
          if (!awf::same_result(row, again)) {
            ++mismatched;
            std::cerr << "mismatch:\n  " << awf::format_csv_row(row) << "\n  "
                      << awf::format_csv_row(again) << '\n';
          }
        }
        std::cout << "replayed " << checked << " rows, " << mismatched
                  << " mismatched\n";
        return mismatched == 0 ? awf::kExitOk : awf::kExitData;
      }

      awf::BenchOptions opt;
      try {
        opt.m_list = split_list<std::size_t>(bench_m, parse_count);
        opt.methods = split_list<awf::Method>(bench_methods, awf::parse_method);
        opt.families = split_list<awf::Family>(bench_families, awf::parse_family);
        opt.modulations = bench_mods.empty() ? std::vector<std::string>{"gaussian"}
                                             : bench_mods;
        for (const auto& mix : opt.modulations) awf::parse_modulation_mix(mix);
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      for (std::size_t m : opt.m_list) {
        if (m == 0) throw UsageError("--m entries must be at least 1");
      }
      opt.cells = bench_cells;
      opt.seed = bench_seed;
      opt.warmup = bench_warmup;
      opt.threads = bench_threads;
      opt.config = bench_flags.config(awf::Method::MirrorProx, bench_seed);
      const auto rows = awf::run_bench(opt, library);
      if (bench_format == "csv") {
        text << awf::kCsvHeader << '\n';
        for (const auto& r : rows) text << awf::format_csv_row(r) << '\n';
      } else {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const auto& r : rows) arr.push_back(awf::row_to_json(r));
        text << arr.dump(1) << '\n';
      }
      if (bench_out.empty()) {
        std::cout << text.str();
      } else {
        open_output(bench_out) << text.str();
      }
      return awf::kExitOk;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n\n" << app.help();
    return awf::kExitUsage;
  } catch (const awf::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return awf::kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return awf::kExitData;
  }
  return awf::kExitUsage;
}
