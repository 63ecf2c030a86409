#include "awf/problem.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace awf {

LinearConstraints::LinearConstraints(std::size_t cols,
                                     std::vector<Triplet> entries,
                                     std::vector<double> p_hat)
    : cols_(cols), p_hat_(std::move(p_hat)) {
  for (const auto& e : entries) {
    if (e.row >= p_hat_.size() || e.col >= cols_) {
      throw DataError("constraint entry (" + std::to_string(e.row) + ", " +
                      std::to_string(e.col) + ") outside " +
                      std::to_string(p_hat_.size()) + "x" +
                      std::to_string(cols_) + " matrix");
    }
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Triplet& a, const Triplet& b) {
                     return a.row != b.row ? a.row < b.row : a.col < b.col;
                   });
  entries_.reserve(entries.size());
  for (const auto& e : entries) {
    if (!entries_.empty() && entries_.back().row == e.row &&
        entries_.back().col == e.col) {
      entries_.back().val += e.val;
    } else {
      entries_.push_back(e);
    }
  }
  std::erase_if(entries_, [](const Triplet& e) { return e.val == 0.0; });
}

std::vector<double> sparse_matvec(const LinearConstraints& a,
                                  std::span<const double> x) {
  if (x.size() != a.cols()) {
    throw DataError("sparse_matvec: x has length " + std::to_string(x.size()) +
                    ", expected " + std::to_string(a.cols()));
  }
  std::vector<double> out(a.rows(), 0.0);
  for (const auto& e : a.entries()) out[e.row] += e.val * x[e.col];
  return out;
}

std::vector<double> sparse_rmatvec(const LinearConstraints& a,
                                   std::span<const double> y) {
  if (y.size() != a.rows()) {
    throw DataError("sparse_rmatvec: y has length " +
                    std::to_string(y.size()) + ", expected " +
                    std::to_string(a.rows()));
  }
  std::vector<double> out(a.cols(), 0.0);
  for (const auto& e : a.entries()) out[e.col] += e.val * y[e.row];
  return out;
}

ValidationResult validate(const AwfInstance& instance) {
  ValidationResult result;
  auto& errs = result.errors;
  const auto& ch = instance.channels;
  const std::size_t m = ch.beta.size();

  if (m == 0) errs.emplace_back("instance has no channels");
  if (ch.sigma.size() != m || ch.modulation.size() != m) {
    errs.emplace_back("dimension mismatch: beta has " + std::to_string(m) +
                      " entries, sigma " + std::to_string(ch.sigma.size()) +
                      ", modulation " + std::to_string(ch.modulation.size()));
  }
  if (std::any_of(ch.beta.begin(), ch.beta.end(),
                  [](double b) { return !(b > 0.0) || !std::isfinite(b); })) {
    errs.emplace_back("beta must be strictly positive");
  }
  if (std::any_of(ch.sigma.begin(), ch.sigma.end(),
                  [](double s) { return !(s > 0.0) || !std::isfinite(s); })) {
    errs.emplace_back("sigma must be strictly positive");
  }
  if (std::any_of(ch.modulation.begin(), ch.modulation.end(),
                  [](const std::string& s) { return s.empty(); })) {
    errs.emplace_back("modulation identifiers must be nonempty");
  }
  const auto& b = instance.budgets;
  if (!(b.P >= 0.0) || !std::isfinite(b.P)) {
    errs.emplace_back("P must be nonnegative");
  }
  if (!(b.N >= 0.0) || !std::isfinite(b.N)) {
    errs.emplace_back("N must be nonnegative");
  }
  if (instance.constraints) {
    const auto& a = *instance.constraints;
    if (a.cols() != m) {
      errs.emplace_back("dimension mismatch: constraint matrix has " +
                        std::to_string(a.cols()) + " columns, expected " +
                        std::to_string(m));
    }
    const auto entries = a.entries();
    if (std::any_of(entries.begin(), entries.end(),
                    [](const Triplet& e) { return !(e.val >= 0.0); })) {
      errs.emplace_back("constraint entries must be nonnegative");
    }
    const auto ph = a.p_hat();
    if (std::any_of(ph.begin(), ph.end(),
                    [](double v) { return !std::isfinite(v); })) {
      errs.emplace_back("p_hat must be finite");
    }
  }
  return result;
}

void require_valid(const AwfInstance& instance) {
  const auto r = validate(instance);
  if (r.ok()) return;
  std::string msg = "invalid instance:";
  for (const auto& e : r.errors) msg += " " + e + ";";
  msg.pop_back();
  throw DataError(msg);
}

nlohmann::ordered_json instance_to_json(const AwfInstance& instance) {
  nlohmann::ordered_json j;
  j["version"] = kInstanceSchemaVersion;
  j["m"] = instance.size();
  j["beta"] = instance.channels.beta;
  j["sigma"] = instance.channels.sigma;
  j["P"] = instance.budgets.P;
  j["N"] = instance.budgets.N;
  j["modulation"] = instance.channels.modulation;
  if (instance.constraints) {
    auto rows = nlohmann::ordered_json::array();
    for (const auto& e : instance.constraints->entries()) {
      nlohmann::ordered_json t;
      t["row"] = e.row;
      t["col"] = e.col;
      t["val"] = e.val;
      rows.push_back(std::move(t));
    }
    j["A"] = std::move(rows);
    j["p_hat"] = std::vector<double>(instance.constraints->p_hat().begin(),
                                     instance.constraints->p_hat().end());
  }
  return j;
}

namespace {

template <typename T>
T field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) {
    throw DataError(std::string("instance is missing field \"") + key + "\"");
  }
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("field \"") + key + "\": " + e.what());
  }
}

}  // namespace

AwfInstance instance_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("instance must be a JSON object");
  if (j.contains("version") &&
      field<int>(j, "version") != kInstanceSchemaVersion) {
    throw DataError("unsupported instance schema version " +
                    j.at("version").dump());
  }
  AwfInstance inst;
  const auto m = field<std::size_t>(j, "m");
  inst.channels.beta = field<std::vector<double>>(j, "beta");
  inst.channels.sigma = field<std::vector<double>>(j, "sigma");
  inst.budgets.P = field<double>(j, "P");
  inst.budgets.N = field<double>(j, "N");
  if (j.contains("modulation")) {
    inst.channels.modulation = field<std::vector<std::string>>(j, "modulation");
  } else {
    inst.channels.modulation.assign(inst.channels.beta.size(), "gaussian");
  }
  if (inst.channels.beta.size() != m) {
    throw DataError("field \"m\" = " + std::to_string(m) +
                    " disagrees with beta length " +
                    std::to_string(inst.channels.beta.size()));
  }
  const bool has_a = j.contains("A");
  const bool has_phat = j.contains("p_hat");
  if (has_a != has_phat) {
    throw DataError("fields \"A\" and \"p_hat\" must appear together");
  }
  if (has_a) {
    auto p_hat = field<std::vector<double>>(j, "p_hat");
    std::vector<Triplet> entries;
    const auto& a = j.at("A");
    if (!a.is_array()) throw DataError("field \"A\" must be an array");
    for (const auto& t : a) {
      if (!t.is_object()) throw DataError("entries of \"A\" must be objects");
      entries.push_back({field<std::size_t>(t, "row"),
                         field<std::size_t>(t, "col"), field<double>(t, "val")});
    }
    inst.constraints.emplace(m, std::move(entries), std::move(p_hat));
  }
  return inst;
}

std::string dump_instance(const AwfInstance& instance) {
  return instance_to_json(instance).dump(1) + "\n";
}

AwfInstance parse_instance(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // e.byte is 1-based and points one past the offending character.
    const std::size_t offset = e.byte > 0 ? e.byte - 1 : 0;
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw DataError("JSON parse error at line " + std::to_string(line) +
                    ", column " + std::to_string(col) + ": " + e.what());
  }
  return instance_from_json(j);
}

AwfInstance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open instance file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_instance(ss.str());
}

void save_instance(const AwfInstance& instance, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << dump_instance(instance);
  if (!out) throw Error("write failed for " + path);
}

nlohmann::ordered_json report_to_json(const SolveReport& r) {
  nlohmann::ordered_json j;
  j["method"] = r.method;
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["wall_time"] = r.wall_time;
  j["residual"] = r.residual;
  j["J"] = r.objective_J;
  j["ineq"] = r.ineq_violation;
  j["kkt_p"] = r.kkt_p;
  j["kkt_n"] = r.kkt_n;
  j["p"] = r.allocation.p;
  j["n"] = r.allocation.n;
  j["theta"] = r.allocation.theta;
  j["nu"] = r.allocation.nu ? nlohmann::ordered_json(*r.allocation.nu)
                            : nlohmann::ordered_json(nullptr);
  j["mu"] = r.allocation.mu ? nlohmann::ordered_json(*r.allocation.mu)
                            : nlohmann::ordered_json(nullptr);
  return j;
}

}  // namespace awf
