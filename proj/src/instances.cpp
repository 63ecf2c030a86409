#include "awf/instances.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "awf/modulation.hpp"
#include "awf/random.hpp"

namespace awf {

namespace {

// Independent random streams per generated component.
enum Stream : std::uint64_t {
  kChannels = 1,
  kModulation = 2,
  kBudgets = 3,
  kConstraints = 4,
  kFeasible = 5,
};

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

// First k entries of a uniformly random permutation of 0..m-1.
std::vector<std::size_t> random_subset(std::mt19937_64& g, std::size_t m,
                                       std::size_t k) {
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + uniform_index(g, m - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

}  // namespace

std::string to_string(Family family) {
  switch (family) {
    case Family::None: return "none";
    case Family::Sparse: return "sparse";
    case Family::Group: return "group";
    case Family::Prefix: return "prefix";
    case Family::Dense: return "dense";
  }
  return "none";
}

Family parse_family(const std::string& name) {
  const std::string s = lower(name);
  if (s == "none") return Family::None;
  if (s == "sparse") return Family::Sparse;
  if (s == "group") return Family::Group;
  if (s == "prefix") return Family::Prefix;
  if (s == "dense") return Family::Dense;
  throw std::invalid_argument("unknown constraint family '" + name + "'");
}

std::vector<ModulationWeight> parse_modulation_mix(const std::string& text) {
  std::string t = lower(trim(text));
  // ';' is accepted so labels written into CSV rows parse back.
  std::replace(t.begin(), t.end(), ';', ',');
  if (t == "mixed-qam" || t == "mixed") return {{"16qam", 1.0}, {"64qam", 1.0}};
  std::vector<ModulationWeight> mix;
  std::stringstream ss(t);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw std::invalid_argument("empty modulation entry in '" + text + "'");
    ModulationWeight w;
    const auto colon = item.find(':');
    w.format = trim(item.substr(0, colon));
    if (colon != std::string::npos) {
      const std::string num = trim(item.substr(colon + 1));
      std::size_t used = 0;
      try {
        w.weight = std::stod(num, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != num.size() || !(w.weight > 0.0) || !std::isfinite(w.weight)) {
        throw std::invalid_argument("bad modulation weight '" + num + "'");
      }
    }
    try {
      w.format = canonical_modulation(w.format);
    } catch (const DataError& e) {
      throw std::invalid_argument(e.what());
    }
    mix.push_back(w);
  }
  if (mix.empty()) throw std::invalid_argument("empty modulation mix");
  return mix;
}

std::string mix_label(const std::vector<ModulationWeight>& mix) {
  if (mix.size() == 1) return mix.front().format;
  if (mix.size() == 2 && mix[0].format == "16qam" && mix[1].format == "64qam" &&
      mix[0].weight == mix[1].weight) {
    return "mixed-qam";
  }
  std::ostringstream os;
  os << std::setprecision(17);
  for (std::size_t k = 0; k < mix.size(); ++k) {
    if (k) os << ';';
    os << mix[k].format << ':' << mix[k].weight;
  }
  return os.str();
}

void GeneratorSpec::validate() const {
  if (m == 0) throw std::invalid_argument("m must be at least 1");
  if (modulation_mix.empty()) throw std::invalid_argument("empty modulation mix");
  for (const auto& w : modulation_mix) {
    if (!(w.weight > 0.0) || !std::isfinite(w.weight)) {
      throw std::invalid_argument("modulation weights must be positive");
    }
    try {
      canonical_modulation(w.format);
    } catch (const DataError& e) {
      throw std::invalid_argument(e.what());
    }
  }
  const auto& o = overrides;
  auto check_range = [](const std::optional<double>& lo, const std::optional<double>& hi,
                        double dlo, double dhi, const char* what) {
    const double a = lo.value_or(dlo);
    const double b = hi.value_or(dhi);
    if (!(a > 0.0) || !(b >= a) || !std::isfinite(b)) {
      throw std::invalid_argument(std::string(what) + " range must satisfy 0 < lo <= hi");
    }
  };
  check_range(o.rho_lo, o.rho_hi, 0.05, 0.30, "rho");
  check_range(o.slack_lo, o.slack_hi, 0.01, 0.2, "slack");
  if (o.p_bar && !(*o.p_bar >= 0.0)) throw std::invalid_argument("p_bar must be >= 0");
  if (o.n_bar && !(*o.n_bar >= 0.0)) throw std::invalid_argument("n_bar must be >= 0");
}

ChannelParams sample_channels(const GeneratorSpec& spec) {
  spec.validate();
  ChannelParams ch;
  ch.beta.resize(spec.m);
  ch.sigma.resize(spec.m);
  ch.modulation.resize(spec.m);
  auto g = make_engine(spec.seed, kChannels);
  for (std::size_t i = 0; i < spec.m; ++i) {
    ch.beta[i] = std::exp(0.6 * standard_normal(g));
    ch.sigma[i] = std::exp(0.25 * standard_normal(g));
  }
  double total = 0.0;
  for (const auto& w : spec.modulation_mix) total += w.weight;
  auto gm = make_engine(spec.seed, kModulation);
  for (std::size_t i = 0; i < spec.m; ++i) {
    const double u = uniform01(gm) * total;
    double acc = 0.0;
    std::string pick = spec.modulation_mix.back().format;
    for (const auto& w : spec.modulation_mix) {
      acc += w.weight;
      if (u < acc) {
        pick = w.format;
        break;
      }
    }
    ch.modulation[i] = canonical_modulation(pick);
  }
  return ch;
}

Budgets sample_budgets(const GeneratorSpec& spec) {
  spec.validate();
  auto g = make_engine(spec.seed, kBudgets);
  const double p_bar = uniform(g, 0.05, 0.5);
  const double n_bar = uniform(g, 0.05, 0.5);
  const double m = static_cast<double>(spec.m);
  return {m * spec.overrides.p_bar.value_or(p_bar),
          m * spec.overrides.n_bar.value_or(n_bar)};
}

std::size_t constraint_row_count(double rho, std::size_t m) {
  const double k = std::floor(rho * static_cast<double>(m) + 0.5);
  return std::max<std::size_t>(1, static_cast<std::size_t>(k));
}

LinearConstraints sample_constraints(const GeneratorSpec& spec,
                                     std::span<const double> p_feasible, double P) {
  spec.validate();
  if (spec.family == Family::None) {
    throw std::invalid_argument("sample_constraints: family is none");
  }
  const std::size_t m = spec.m;
  if (p_feasible.size() != m) {
    throw std::invalid_argument("sample_constraints: p_feasible has wrong length");
  }
  const auto& o = spec.overrides;
  auto g = make_engine(spec.seed, kConstraints);
  const double rho = uniform(g, o.rho_lo.value_or(0.05), o.rho_hi.value_or(0.30));
  const std::size_t K = constraint_row_count(rho, m);

  std::vector<std::vector<std::size_t>> support(K);
  switch (spec.family) {
    case Family::Sparse:
      for (auto& s : support) s = random_subset(g, m, std::min(m, ceil_div(m, K)));
      break;
    case Family::Group: {
      // K disjoint consecutive blocks; the last one takes the remainder.
      const std::size_t groups = std::min(K, m);
      support.resize(groups);
      const std::size_t size = m / groups;
      for (std::size_t s = 0; s < groups; ++s) {
        const std::size_t end = (s + 1 == groups) ? m : (s + 1) * size;
        for (std::size_t i = s * size; i < end; ++i) support[s].push_back(i);
      }
      break;
    }
    case Family::Prefix:
      // Row s covers channels 0 .. ceil((s+1) m / K) - 1.
      for (std::size_t s = 0; s < K; ++s) {
        const std::size_t k = ceil_div((s + 1) * m, K);
        for (std::size_t i = 0; i < k; ++i) support[s].push_back(i);
      }
      break;
    case Family::Dense:
      // Supports of ceil(3m/4) channels: any two rows share at least m/2.
      for (auto& s : support) s = random_subset(g, m, ceil_div(3 * m, 4));
      break;
    case Family::None:
      break;
  }

  const double slack_lo = o.slack_lo.value_or(0.01);
  const double slack_hi = o.slack_hi.value_or(0.2);
  const double unit = P / static_cast<double>(m);
  std::vector<Triplet> entries;
  std::vector<double> p_hat(support.size());
  for (std::size_t s = 0; s < support.size(); ++s) {
    std::vector<double> w(support[s].size());
    double total = 0.0;
    for (auto& x : w) {
      x = uniform(g, 0.5, 1.5);
      total += x;
    }
    double row_value = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double a = w[k] / total;
      entries.push_back({s, support[s][k], a});
      row_value += a * p_feasible[support[s][k]];
    }
    const double slack = uniform(g, slack_lo, slack_hi) * unit *
                         static_cast<double>(support[s].size());
    p_hat[s] = row_value + slack;
  }
  return LinearConstraints(m, std::move(entries), std::move(p_hat));
}

AwfInstance sample_instance(const GeneratorSpec& spec) {
  spec.validate();
  AwfInstance inst;
  inst.channels = sample_channels(spec);
  inst.budgets = sample_budgets(spec);
  if (spec.family != Family::None) {
    auto g = make_engine(spec.seed, kFeasible);
    std::vector<double> p(spec.m);
    double total = 0.0;
    for (auto& x : p) {
      x = -std::log1p(-uniform01(g));
      total += x;
    }
    for (auto& x : p) x *= inst.budgets.P / total;
    inst.constraints = sample_constraints(spec, p, inst.budgets.P);
  }
  require_valid(inst);
  return inst;
}

}  // namespace awf
