#include "awf/modulation.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "gauss_hermite.hpp"

namespace awf {

namespace {

void check_gamma(double gamma) {
  if (!(gamma >= 0.0)) {
    throw std::domain_error("SINR must be nonnegative");
  }
}

bool is_power_of_four(std::size_t m) {
  if (m < 4) return false;
  while (m % 4 == 0) m /= 4;
  return m == 1;
}

// Per-dimension MMSE of an equiprobable PAM (levels l) in N(0, 1/2) noise.
double pam_mmse(const std::vector<double>& levels, double gamma,
                const detail::GaussHermiteRule& rule) {
  const double s = std::sqrt(gamma);
  const std::size_t k = levels.size();
  std::vector<double> expo(k);
  double total = 0.0;
  for (std::size_t a = 0; a < k; ++a) {
    double acc = 0.0;
    for (std::size_t q = 0; q < rule.node.size(); ++q) {
      const double wq = rule.weight[q];
      if (wq == 0.0) continue;
      const double t = rule.node[q];
      double emax = -INFINITY;
      for (std::size_t b = 0; b < k; ++b) {
        const double d = s * (levels[a] - levels[b]) + t;
        expo[b] = -d * d;
        emax = std::max(emax, expo[b]);
      }
      double num = 0.0, den = 0.0;
      for (std::size_t b = 0; b < k; ++b) {
        const double e = std::exp(expo[b] - emax);
        num += e * levels[b];
        den += e;
      }
      const double err = levels[a] - num / den;
      acc += wq * err * err;
    }
    total += acc;
  }
  return total / static_cast<double>(k);
}

double general_mmse(const std::vector<std::complex<double>>& pts, double gamma,
                    const detail::GaussHermiteRule& rule) {
  const double s = std::sqrt(gamma);
  const std::size_t k = pts.size();
  const std::size_t q = rule.node.size();
  std::vector<double> expo(k);
  double total = 0.0;
  for (std::size_t a = 0; a < k; ++a) {
    double acc = 0.0;
    for (std::size_t qi = 0; qi < q; ++qi) {
      for (std::size_t qj = 0; qj < q; ++qj) {
        const double w = rule.weight[qi] * rule.weight[qj];
        if (w == 0.0) continue;
        const std::complex<double> z(rule.node[qi], rule.node[qj]);
        double emax = -INFINITY;
        for (std::size_t b = 0; b < k; ++b) {
          expo[b] = -std::norm(s * (pts[a] - pts[b]) + z);
          emax = std::max(emax, expo[b]);
        }
        std::complex<double> num = 0.0;
        double den = 0.0;
        for (std::size_t b = 0; b < k; ++b) {
          const double e = std::exp(expo[b] - emax);
          num += e * pts[b];
          den += e;
        }
        acc += w * std::norm(pts[a] - num / den);
      }
    }
    total += acc;
  }
  return total / static_cast<double>(k);
}

// Cubic Hermite on one interval of width h: value y0 at t = 0, increment seg
// over the interval, end slopes m0, m1.
double hermite_value(double y0, double seg, double h, double m0, double m1,
                     double t) {
  const double t2 = t * t, t3 = t2 * t;
  return y0 + (seg * (3.0 * t2 - 2.0 * t3) +
               h * (m0 * (t3 - 2.0 * t2 + t) + m1 * (t3 - t2)));
}

double hermite_slope(double seg, double h, double m0, double m1, double t) {
  const double delta = seg / h;
  return delta * (6.0 * t - 6.0 * t * t) + m0 * (3.0 * t * t - 4.0 * t + 1.0) +
         m1 * (3.0 * t * t - 2.0 * t);
}

// Quartic on [0, snr[0]] matching I(0) = 0, I'(0), I''(0), I(snr[0]) and
// I'(snr[0]); coefficients of t, t^2, t^3, t^4 with gamma = snr[0] t.
std::array<double, 4> head_coefficients(const MmseTable& t) {
  const double h = t.snr.front();
  const double a1 = h * t.mmse_zero;
  const double a2 = 0.5 * h * h * t.mmse_slope_zero;
  const double r = t.mi.front() - a1 - a2;
  const double s = h * t.mmse.front() - a1 - 2.0 * a2;
  return {a1, a2, 4.0 * r - s, s - 3.0 * r};
}

// Keeps the Hermite derivative nonincreasing on the interval.
double clamp_segment(double seg, double h, double m0, double m1) {
  const double lo = h * (m0 + 2.0 * m1) / 3.0;
  const double hi = h * (2.0 * m0 + m1) / 3.0;
  return std::clamp(seg, lo, hi);
}

// Gauss-Legendre with n nodes on [a, b], in log(x) when log_spaced.
double legendre(const std::function<double(double)>& f, double a, double b,
                std::size_t n, bool log_spaced) {
  const auto& rule = detail::gauss_legendre(n);
  const double lo = log_spaced ? std::log(a) : a;
  const double hi = log_spaced ? std::log(b) : b;
  const double half = 0.5 * (hi - lo);
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double u = lo + half * (1.0 + rule.node[k]);
    const double x = log_spaced ? std::exp(u) : u;
    sum += rule.weight[k] * f(x) * (log_spaced ? x : 1.0);
  }
  return half * sum;
}

MmseTable tabulate(const std::string& name,
                   const std::function<double(double)>& mmse, double mmse_zero,
                   double db_lo, double db_hi, std::size_t points,
                   std::size_t refine, double mi_cap) {
  if (!(db_lo < db_hi)) throw std::invalid_argument("build_table: db_lo >= db_hi");
  if (points < 16) throw std::invalid_argument("build_table: need L >= 16");
  if (refine < 1) throw std::invalid_argument("build_table: refine must be >= 1");

  MmseTable t;
  t.name = name;
  t.db_lo = db_lo;
  t.db_hi = db_hi;
  t.mmse_zero = std::min(mmse_zero, 1.0);
  {
    // Richardson-extrapolated forward difference.
    const double d = 1e-3;
    const double s1 = (mmse(d) - mmse_zero) / d;
    const double s2 = (mmse(0.5 * d) - mmse_zero) / (0.5 * d);
    t.mmse_slope_zero = std::min(2.0 * s2 - s1, 0.0);
  }
  const double g_lo = std::pow(10.0, db_lo / 10.0);
  const double g_hi = std::pow(10.0, db_hi / 10.0);
  t.snr.resize(points);
  for (std::size_t j = 0; j < points; ++j) {
    const double frac = static_cast<double>(j) / static_cast<double>(points - 1);
    t.snr[j] = g_lo * std::pow(g_hi / g_lo, frac);
  }
  t.snr.back() = g_hi;

  // Raw values, then a running minimum so the table is nonincreasing even
  // where quadrature noise is comparable to the MMSE itself.
  std::vector<double> raw(points);
  for (std::size_t j = 0; j < points; ++j) raw[j] = mmse(t.snr[j]);
  t.mmse.resize(points);
  double running = t.mmse_zero;
  for (std::size_t j = 0; j < points; ++j) {
    running = std::min(running, std::clamp(raw[j], 0.0, 1.0));
    t.mmse[j] = std::max(running, std::numeric_limits<double>::min());
  }

  t.mi.resize(points);
  t.segment.resize(points - 1);
  double total = t.mi[0] = legendre(mmse, 0.0, t.snr[0], refine, false);
  for (std::size_t j = 0; j + 1 < points; ++j) {
    const double h = t.snr[j + 1] - t.snr[j];
    const double seg = legendre(mmse, t.snr[j], t.snr[j + 1], refine, true);
    t.segment[j] = clamp_segment(seg, h, t.mmse[j], t.mmse[j + 1]);
    total += t.segment[j];
  }
  // I(gamma) never exceeds the input entropy mi_cap; a total above it is
  // quadrature bias, removed by rescaling every increment.
  if (total > mi_cap) {
    const double scale = mi_cap / total;
    t.mi[0] *= scale;
    for (auto& seg : t.segment) seg *= scale;
  }
  // Node values from an extended-precision running sum; segments stay
  // unrounded since tail increments fall below one ulp of mi.
  long double run = t.mi[0];
  for (std::size_t j = 0; j + 1 < points; ++j) {
    run += t.segment[j];
    t.mi[j + 1] = std::min(static_cast<double>(run), mi_cap);
  }
  return t;
}

std::string format_db(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

Constellation make_qam(std::size_t order) {
  if (!is_power_of_four(order)) {
    throw std::invalid_argument("make_qam: order must be a power of four >= 4");
  }
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(order)));
  std::vector<double> levels(side);
  double energy = 0.0;
  for (std::size_t i = 0; i < side; ++i) {
    levels[i] = 2.0 * static_cast<double>(i) - static_cast<double>(side - 1);
    energy += levels[i] * levels[i];
  }
  // E|X|^2 = 2 * mean(level^2) = 1.
  const double scale = 1.0 / std::sqrt(2.0 * energy / static_cast<double>(side));
  for (auto& l : levels) l *= scale;
  Constellation c;
  c.name = std::to_string(order) + "qam";
  c.pam_levels = levels;
  for (double a : levels) {
    for (double b : levels) c.points.emplace_back(a, b);
  }
  return c;
}

Constellation make_constellation(std::string name,
                                 std::vector<std::complex<double>> points) {
  if (points.empty()) throw std::invalid_argument("constellation has no points");
  double energy = 0.0;
  for (const auto& p : points) energy += std::norm(p);
  energy /= static_cast<double>(points.size());
  if (!(energy > 0.0)) throw std::invalid_argument("constellation has zero energy");
  const double scale = 1.0 / std::sqrt(energy);
  for (auto& p : points) p *= scale;
  return {std::move(name), std::move(points), {}};
}

double gaussian_mi(double gamma) {
  check_gamma(gamma);
  return std::log1p(gamma);
}

double gaussian_mmse(double gamma) {
  check_gamma(gamma);
  return 1.0 / (1.0 + gamma);
}

namespace {

double mmse_with_rule(const Constellation& c, double gamma,
                      const detail::GaussHermiteRule& rule, bool factorized) {
  if (!(gamma > 0.0)) throw std::domain_error("qam_mmse: SINR must be positive");
  if (factorized && !c.pam_levels.empty()) {
    return 2.0 * pam_mmse(c.pam_levels, gamma, rule);
  }
  return general_mmse(c.points, gamma, rule);
}

}  // namespace

double qam_mmse_at_order(const Constellation& c, double gamma,
                         std::size_t order, bool factorized) {
  return mmse_with_rule(c, gamma, detail::gauss_hermite(order), factorized);
}

double qam_mmse(const Constellation& c, double gamma,
                const QuadratureOptions& opts) {
  std::size_t order = opts.base_order;
  double prev = mmse_with_rule(c, gamma, detail::noise_rule(order), true);
  while (true) {
    const std::size_t next = 2 * order;
    if (next > opts.max_order) {
      throw QuadratureError("qam_mmse(" + c.name + ", gamma=" +
                            std::to_string(gamma) + "): quadrature order " +
                            std::to_string(order) +
                            " did not reach tolerance " +
                            std::to_string(opts.tol));
    }
    const double cur = mmse_with_rule(c, gamma, detail::noise_rule(next), true);
    if (std::abs(cur - prev) <= opts.tol) return std::clamp(cur, 0.0, 1.0);
    prev = cur;
    order = next;
  }
}

ModulationModel ModulationModel::gaussian() {
  ModulationModel m;
  m.name_ = "gaussian";
  return m;
}

ModulationModel ModulationModel::from_table(MmseTable t) {
  const std::size_t l = t.snr.size();
  auto fail = [&](const std::string& what) {
    throw DataError("table " + t.name + ": " + what);
  };
  if (l < 2 || t.mmse.size() != l || t.mi.size() != l || t.segment.size() + 1 != l) {
    fail("inconsistent array lengths");
  }
  if (!(t.mmse_zero > 0.0 && t.mmse_zero <= 1.0)) fail("mmse(0) outside (0, 1]");
  if (!(t.mmse_slope_zero <= 0.0 && std::isfinite(t.mmse_slope_zero))) {
    fail("mmse slope at 0 must be finite and nonpositive");
  }
  for (std::size_t j = 0; j < l; ++j) {
    if (!(t.snr[j] > 0.0) || (j > 0 && !(t.snr[j] > t.snr[j - 1]))) {
      fail("SNR grid must be positive and increasing");
    }
    if (!(t.mmse[j] > 0.0 && t.mmse[j] <= 1.0)) fail("mmse outside (0, 1]");
    if (j > 0 && t.mmse[j] > t.mmse[j - 1]) fail("mmse must be nonincreasing");
    if (!(t.mi[j] >= 0.0)) fail("mi must be nonnegative");
    if (j > 0 && t.mi[j] < t.mi[j - 1]) fail("mi must be nondecreasing");
  }
  for (std::size_t j = 0; j + 1 < l; ++j) {
    if (std::abs(t.mi[j] + t.segment[j] - t.mi[j + 1]) >
        1e-12 * std::max(1.0, t.mi[j + 1])) {
      fail("segments do not sum to mi");
    }
  }
  ModulationModel m;
  m.name_ = t.name;
  m.table_ = std::move(t);
  return m;
}

const MmseTable& ModulationModel::table() const {
  if (!table_) throw std::logic_error("Gaussian model has no table");
  return *table_;
}

double ModulationModel::mi(double gamma) const {
  check_gamma(gamma);
  if (!table_) return std::log1p(gamma);
  const auto& t = *table_;
  if (gamma >= t.snr.back()) return t.mi.back();
  if (gamma < t.snr.front()) {
    const auto a = head_coefficients(t);
    const double x = gamma / t.snr.front();
    const double v = x * (a[0] + x * (a[1] + x * (a[2] + x * a[3])));
    return v;
  }
  const auto it = std::upper_bound(t.snr.begin(), t.snr.end(), gamma);
  const auto j = static_cast<std::size_t>(it - t.snr.begin()) - 1;
  if (gamma == t.snr[j]) return t.mi[j];
  const double h = t.snr[j + 1] - t.snr[j];
  // The clamp only absorbs rounding: segments are monotone by construction.
  return std::clamp(hermite_value(t.mi[j], t.segment[j], h, t.mmse[j], t.mmse[j + 1],
                                  (gamma - t.snr[j]) / h),
                    t.mi[j], t.mi[j + 1]);
}

double ModulationModel::mmse(double gamma) const {
  check_gamma(gamma);
  if (!table_) return 1.0 / (1.0 + gamma);
  const auto& t = *table_;
  if (gamma >= t.snr.back()) {
    return std::clamp(t.mmse.back() * (t.snr.back() / gamma), 0.0, 1.0);
  }
  double v;
  if (gamma < t.snr.front()) {
    const auto a = head_coefficients(t);
    const double x = gamma / t.snr.front();
    v = (a[0] + x * (2.0 * a[1] + x * (3.0 * a[2] + x * 4.0 * a[3]))) / t.snr.front();
  } else {
    const auto it = std::upper_bound(t.snr.begin(), t.snr.end(), gamma);
    const auto j = static_cast<std::size_t>(it - t.snr.begin()) - 1;
    if (gamma == t.snr[j]) return t.mmse[j];
    const double h = t.snr[j + 1] - t.snr[j];
    v = std::clamp(hermite_slope(t.segment[j], h, t.mmse[j], t.mmse[j + 1],
                                 (gamma - t.snr[j]) / h),
                   t.mmse[j + 1], t.mmse[j]);
  }
  return std::clamp(v, 0.0, 1.0);
}

double eval_mi(const ModulationModel& model, double gamma) {
  return model.mi(gamma);
}

double eval_mmse(const ModulationModel& model, double gamma) {
  return model.mmse(gamma);
}

ModulationModel build_table(const Constellation& c, double db_lo, double db_hi,
                            std::size_t points, std::size_t refine,
                            const QuadratureOptions& quad) {
  auto f = [&](double g) { return qam_mmse(c, g, quad); };
  return ModulationModel::from_table(
      tabulate(c.name, f, 1.0, db_lo, db_hi, points, refine,
               std::log(static_cast<double>(c.points.size()))));
}

ModulationModel build_table(const std::string& name,
                            const std::function<double(double)>& mmse,
                            double db_lo, double db_hi, std::size_t points,
                            std::size_t refine) {
  return ModulationModel::from_table(
      tabulate(name, mmse, mmse(0.0), db_lo, db_hi, points, refine,
               std::numeric_limits<double>::infinity()));
}

nlohmann::ordered_json table_to_json(const MmseTable& t) {
  nlohmann::ordered_json j;
  j["format"] = "awf-mmse-table";
  j["version"] = kTableCacheVersion;
  j["name"] = t.name;
  j["db_lo"] = t.db_lo;
  j["db_hi"] = t.db_hi;
  j["L"] = t.snr.size();
  j["mmse_zero"] = t.mmse_zero;
  j["mmse_slope_zero"] = t.mmse_slope_zero;
  j["snr"] = t.snr;
  j["mmse"] = t.mmse;
  j["mi"] = t.mi;
  j["segment"] = t.segment;
  return j;
}

MmseTable table_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "awf-mmse-table" ||
        j.at("version").get<int>() != kTableCacheVersion) {
      throw DataError("unsupported table cache format");
    }
    MmseTable t;
    t.name = j.at("name").get<std::string>();
    t.db_lo = j.at("db_lo").get<double>();
    t.db_hi = j.at("db_hi").get<double>();
    t.mmse_zero = j.at("mmse_zero").get<double>();
    t.mmse_slope_zero = j.at("mmse_slope_zero").get<double>();
    t.snr = j.at("snr").get<std::vector<double>>();
    t.mmse = j.at("mmse").get<std::vector<double>>();
    t.mi = j.at("mi").get<std::vector<double>>();
    t.segment = j.at("segment").get<std::vector<double>>();
    if (t.snr.size() != j.at("L").get<std::size_t>()) {
      throw DataError("table cache: L disagrees with grid length");
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("table cache: ") + e.what());
  }
}

std::string canonical_modulation(const std::string& id) {
  std::string s;
  for (char ch : id) {
    if (ch != '-' && ch != '_') {
      s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (s == "gaussian" || s == "gauss") return "gaussian";
  if (s == "qpsk") return "4qam";
  if (s.size() > 3 && s.ends_with("qam")) {
    const std::string digits = s.substr(0, s.size() - 3);
    if (std::all_of(digits.begin(), digits.end(),
                    [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); }) &&
        digits.size() <= 6) {
      const auto order = static_cast<std::size_t>(std::stoul(digits));
      if (is_power_of_four(order)) return std::to_string(order) + "qam";
    }
  }
  throw DataError("unknown modulation \"" + id + "\"");
}

ModelLibrary::ModelLibrary(TableSettings settings,
                           std::optional<std::filesystem::path> cache_dir,
                           bool force_rebuild)
    : settings_(std::move(settings)),
      cache_dir_(std::move(cache_dir)),
      force_rebuild_(force_rebuild) {}

std::shared_ptr<const ModulationModel> ModelLibrary::get(const std::string& id) {
  const std::string key = canonical_modulation(id);
  std::lock_guard lock(mutex_);
  auto& slot = models_[key];
  if (!slot) slot = load_or_build(key);
  return slot;
}

std::shared_ptr<const ModulationModel> ModelLibrary::load_or_build(
    const std::string& key) {
  if (key == "gaussian") {
    return std::make_shared<const ModulationModel>(ModulationModel::gaussian());
  }
  const auto& s = settings_;
  std::optional<std::filesystem::path> file;
  if (cache_dir_) {
    file = *cache_dir_ / (key + "_" + format_db(s.db_lo) + "_" +
                          format_db(s.db_hi) + "_" + std::to_string(s.points) +
                          ".json");
    if (!force_rebuild_ && std::filesystem::exists(*file)) {
      std::ifstream in(*file);
      std::stringstream ss;
      ss << in.rdbuf();
      try {
        auto model = ModulationModel::from_table(
            table_from_json(nlohmann::json::parse(ss.str())));
        return std::make_shared<const ModulationModel>(std::move(model));
      } catch (const std::exception&) {
        // Unreadable or stale cache entry: rebuild and overwrite below.
      }
    }
  }
  const std::size_t order = std::stoul(key.substr(0, key.size() - 3));
  auto model = build_table(make_qam(order), s.db_lo, s.db_hi, s.points,
                           s.refine, s.quadrature);
  if (file) {
    std::error_code ec;
    std::filesystem::create_directories(file->parent_path(), ec);
    const auto tmp = file->string() + ".tmp";
    {
      std::ofstream out(tmp);
      out << table_to_json(model.table()).dump() << "\n";
    }
    std::filesystem::rename(tmp, *file, ec);
  }
  return std::make_shared<const ModulationModel>(std::move(model));
}

ModelRefs ModelLibrary::resolve(const ChannelParams& channels) {
  ModelRefs refs;
  refs.reserve(channels.modulation.size());
  for (const auto& id : channels.modulation) refs.push_back(get(id).get());
  return refs;
}

ModelLibrary& ModelLibrary::shared() {
  static ModelLibrary library = [] {
    std::optional<std::filesystem::path> dir;
    if (const char* env = std::getenv("AWF_TABLE_CACHE"); env && *env) dir = env;
    return ModelLibrary({}, dir, false);
  }();
  return library;
}

}  // namespace awf
