#include "awf/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <istream>
#include <sstream>
#include <thread>

#include "awf/gaussian.hpp"
#include "awf/minimax.hpp"

namespace awf {

namespace {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double parse_double(const std::string& s) {
  if (s == "nan") return std::nan("");
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw DataError("malformed number '" + s + "' in CSV");
  }
  return v;
}

std::uint64_t parse_unsigned(const std::string& s) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    throw DataError("malformed integer '" + s + "' in CSV");
  }
  return std::stoull(s);
}

// Keeps the status column free of the CSV separator.
std::string sanitize(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

GeneratorSpec cell_spec(std::size_t m, std::uint64_t seed, Family family,
                        const std::string& mix) {
  GeneratorSpec spec;
  spec.m = m;
  spec.seed = seed;
  spec.family = family;
  spec.modulation_mix = parse_modulation_mix(mix);
  return spec;
}

struct Task {
  std::size_t m;
  Family family;
  std::string mix;
  Method method;
  std::uint64_t seed;
};

BenchRow run_task(const Task& t, const SolverConfig& base, ModelLibrary& library) {
  BenchRow row;
  row.m = t.m;
  row.method = to_string(t.method);
  row.family = to_string(t.family);
  row.seed = t.seed;
  try {
    const GeneratorSpec spec = cell_spec(t.m, t.seed, t.family, t.mix);
    row.modulation = mix_label(spec.modulation_mix);
    const AwfInstance inst = sample_instance(spec);
    SolverConfig config = base;
    config.method = t.method;
    config.seed = t.seed;
    const auto t0 = std::chrono::steady_clock::now();
    const SolveReport r = solve_instance(inst, config, library);
    row.time_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    row.J = r.objective_J;
    row.ineq = r.ineq_violation;
    row.kkt_p = r.kkt_p;
    row.kkt_n = r.kkt_n;
    row.status = r.converged ? "converged" : "not_converged";
  } catch (const std::exception& e) {
    if (row.modulation.empty()) row.modulation = t.mix;
    row.J = row.ineq = row.kkt_p = row.kkt_n = std::nan("");
    row.status = sanitize(std::string("error: ") + e.what());
  }
  return row;
}

BenchRow summarize(const std::vector<BenchRow>& rows) {
  BenchRow s = rows.front();
  std::vector<const BenchRow*> ok;
  for (const auto& r : rows) {
    if (r.status.rfind("error", 0) != 0) ok.push_back(&r);
  }
  const double k = static_cast<double>(ok.size());
  auto stats = [&](double BenchRow::*field) {
    if (ok.empty()) return std::pair{std::nan(""), std::nan("")};
    double mean = 0.0;
    for (const auto* r : ok) mean += r->*field;
    mean /= k;
    double var = 0.0;
    for (const auto* r : ok) var += (r->*field - mean) * (r->*field - mean);
    const double sd = ok.size() > 1 ? std::sqrt(var / (k - 1.0)) : 0.0;
    return std::pair{mean, sd};
  };
  std::ostringstream status;
  status << "summary:n=" << ok.size();
  const std::pair<const char*, double BenchRow::*> fields[] = {
      {"J", &BenchRow::J},         {"ineq", &BenchRow::ineq},
      {"kkt_p", &BenchRow::kkt_p}, {"kkt_n", &BenchRow::kkt_n},
      {"time_ms", &BenchRow::time_ms}};
  for (const auto& [name, field] : fields) {
    const auto [mean, sd] = stats(field);
    s.*field = mean;
    status << ";sd_" << name << '=' << fmt(sd);
  }
  s.status = status.str();
  return s;
}

}  // namespace

SolveReport solve_instance(const AwfInstance& inst, const SolverConfig& config,
                           ModelLibrary& library) {
  require_valid(inst);
  switch (config.method) {
    case Method::AltBr:
      return solve_frequency_awf(inst, config);
    case Method::MirrorProx:
      return mirror_prox(inst, config, library.resolve(inst.channels));
    case Method::Extragrad:
      return extragrad_learnedskeleton(inst, config, library.resolve(inst.channels));
    case Method::Pdhg: {
      const std::vector<double> n(inst.size(),
                                  inst.budgets.N / static_cast<double>(inst.size()));
      return pdhg(inst, config, library.resolve(inst.channels), n);
    }
  }
  throw std::invalid_argument("unknown method");
}

std::string format_csv_row(const BenchRow& r) {
  std::ostringstream os;
  os << r.m << ',' << r.method << ',' << r.modulation << ',' << r.family << ','
     << fmt(r.J) << ',' << fmt(r.ineq) << ',' << fmt(r.kkt_p) << ',' << fmt(r.kkt_n)
     << ',' << fmt(r.time_ms) << ',' << r.seed << ',' << sanitize(r.status);
  return os.str();
}

BenchRow parse_csv_row(const std::string& line) {
  std::vector<std::string> f;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) f.push_back(item);
  if (!line.empty() && line.back() == ',') f.emplace_back();
  if (f.size() != 11) {
    throw DataError("CSV row has " + std::to_string(f.size()) + " fields, expected 11");
  }
  BenchRow r;
  r.m = parse_unsigned(f[0]);
  r.method = f[1];
  r.modulation = f[2];
  r.family = f[3];
  r.J = parse_double(f[4]);
  r.ineq = parse_double(f[5]);
  r.kkt_p = parse_double(f[6]);
  r.kkt_n = parse_double(f[7]);
  r.time_ms = parse_double(f[8]);
  r.seed = parse_unsigned(f[9]);
  r.status = f[10];
  return r;
}

std::vector<BenchRow> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) throw DataError("unexpected CSV header: " + line);
  std::vector<BenchRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      rows.push_back(parse_csv_row(line));
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

nlohmann::ordered_json row_to_json(const BenchRow& r) {
  nlohmann::ordered_json j;
  auto num = [](double x) {
    return std::isfinite(x) ? nlohmann::ordered_json(x) : nlohmann::ordered_json(nullptr);
  };
  j["m"] = r.m;
  j["method"] = r.method;
  j["modulation"] = r.modulation;
  j["family"] = r.family;
  j["J"] = num(r.J);
  j["ineq"] = num(r.ineq);
  j["kkt_p"] = num(r.kkt_p);
  j["kkt_n"] = num(r.kkt_n);
  j["time_ms"] = num(r.time_ms);
  j["seed"] = r.seed;
  j["status"] = r.status;
  return j;
}

std::vector<BenchRow> run_bench(const BenchOptions& opt, ModelLibrary& library) {
  if (opt.cells == 0) throw std::invalid_argument("cells must be >= 1");
  if (opt.m_list.empty() || opt.methods.empty() || opt.families.empty() ||
      opt.modulations.empty()) {
    throw std::invalid_argument("empty sweep");
  }
  for (std::size_t m : opt.m_list) {
    if (m == 0) throw std::invalid_argument("m must be at least 1");
  }
  for (const auto& mix : opt.modulations) parse_modulation_mix(mix);
  opt.config.validate();

  std::vector<Task> tasks;
  std::vector<std::size_t> cell_start;
  for (std::size_t m : opt.m_list) {
    for (Family family : opt.families) {
      for (const auto& mix : opt.modulations) {
        for (Method method : opt.methods) {
          cell_start.push_back(tasks.size());
          // Warm-up: untimed solves of the cell's first instance.
          const Task first{m, family, mix, method, opt.seed};
          for (std::size_t w = 0; w < opt.warmup; ++w) run_task(first, opt.config, library);
          for (std::size_t k = 0; k < opt.cells; ++k) {
            tasks.push_back({m, family, mix, method, opt.seed + k});
          }
        }
      }
    }
  }

  std::vector<BenchRow> results(tasks.size());
  const std::size_t threads = std::max<std::size_t>(1, std::min(opt.threads, tasks.size()));
  if (threads == 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      results[i] = run_task(tasks[i], opt.config, library);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
          results[i] = run_task(tasks[i], opt.config, library);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  std::vector<BenchRow> rows;
  for (std::size_t c = 0; c < cell_start.size(); ++c) {
    const std::size_t b = cell_start[c];
    const std::size_t e = c + 1 < cell_start.size() ? cell_start[c + 1] : tasks.size();
    std::vector<BenchRow> cell(results.begin() + static_cast<std::ptrdiff_t>(b),
                               results.begin() + static_cast<std::ptrdiff_t>(e));
    rows.insert(rows.end(), cell.begin(), cell.end());
    rows.push_back(summarize(cell));
  }
  return rows;
}

BenchRow replay_row(const BenchRow& row, const SolverConfig& config,
                    ModelLibrary& library) {
  const Task t{row.m, parse_family(row.family), row.modulation, parse_method(row.method),
               row.seed};
  return run_task(t, config, library);
}

bool same_result(const BenchRow& a, const BenchRow& b) {
  auto bits = [](double x, double y) {
    return std::memcmp(&x, &y, sizeof x) == 0 || (std::isnan(x) && std::isnan(y));
  };
  return a.m == b.m && a.method == b.method && a.modulation == b.modulation &&
         a.family == b.family && a.seed == b.seed && bits(a.J, b.J) &&
         bits(a.ineq, b.ineq) && bits(a.kkt_p, b.kkt_p) && bits(a.kkt_n, b.kkt_n) &&
         sanitize(a.status) == sanitize(b.status);
}

}  // namespace awf
