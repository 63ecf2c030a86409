#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace awf {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when input data violates a structural invariant.
class DataError : public Error {
 public:
  using Error::Error;
};

struct ChannelParams {
  std::vector<double> beta;   // channel gains, > 0
  std::vector<double> sigma;  // background noise, > 0
  std::vector<std::string> modulation;

  std::size_t size() const { return beta.size(); }
};

struct Budgets {
  double P = 0.0;  // total transmit power
  double N = 0.0;  // total interference power
};

struct Triplet {
  std::size_t row = 0;
  std::size_t col = 0;
  double val = 0.0;

  friend bool operator==(const Triplet&, const Triplet&) = default;
};

/// Sparse constraint matrix A (rows x cols) with thresholds p_hat, stored as
/// coordinate triplets sorted by (row, col). Explicit zeros are dropped and
/// duplicate coordinates are summed. Entry signs are not checked here; see
/// validate().
class LinearConstraints {
 public:
  LinearConstraints() = default;
  LinearConstraints(std::size_t cols, std::vector<Triplet> entries,
                    std::vector<double> p_hat);

  std::size_t rows() const { return p_hat_.size(); }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return entries_.size(); }
  std::span<const Triplet> entries() const { return entries_; }
  std::span<const double> p_hat() const { return p_hat_; }

 private:
  std::size_t cols_ = 0;
  std::vector<Triplet> entries_;
  std::vector<double> p_hat_;
};

/// (Ax)_s = sum_i A_si x_i. Throws DataError on dimension mismatch.
std::vector<double> sparse_matvec(const LinearConstraints& a,
                                  std::span<const double> x);
/// (A^T y)_i = sum_s A_si y_s. Throws DataError on dimension mismatch.
std::vector<double> sparse_rmatvec(const LinearConstraints& a,
                                   std::span<const double> y);

struct AwfInstance {
  ChannelParams channels;
  Budgets budgets;
  std::optional<LinearConstraints> constraints;

  std::size_t size() const { return channels.size(); }
  bool constrained() const {
    return constraints.has_value() && constraints->rows() > 0;
  }
  std::size_t constraint_rows() const {
    return constraints ? constraints->rows() : 0;
  }
};

struct Allocation {
  std::vector<double> p;
  std::vector<double> n;
  std::vector<double> theta;
  std::optional<double> nu;  // transmit water-level dual
  std::optional<double> mu;  // interference dual (negative convention)
};

struct SolveReport {
  Allocation allocation;
  double objective_J = 0.0;
  double ineq_violation = 0.0;
  double kkt_p = 0.0;
  double kkt_n = 0.0;
  std::size_t iterations = 0;
  double wall_time = 0.0;  // seconds
  bool converged = false;
  double residual = 0.0;  // solver's own stopping residual at exit
  std::string method;
};

struct ValidationResult {
  std::vector<std::string> errors;

  bool ok() const { return errors.empty(); }
};

ValidationResult validate(const AwfInstance& instance);

/// Throws DataError carrying every validation message if the instance is
/// not well formed.
void require_valid(const AwfInstance& instance);

/// Feasibility tolerance used by the allocation invariants.
inline constexpr double kFeasTol = 1e-9;

// JSON instance schema, version 1:
//   {"version":1,"m":int,"beta":[..],"sigma":[..],"P":num,"N":num,
//    "modulation":[".."],"A":[{"row":int,"col":int,"val":num}],"p_hat":[..]}
// "A"/"p_hat" absent means unconstrained. "version" is optional on input.
inline constexpr int kInstanceSchemaVersion = 1;

nlohmann::ordered_json instance_to_json(const AwfInstance& instance);
AwfInstance instance_from_json(const nlohmann::json& j);

/// Serialized form used for instance files; byte-stable for equal instances.
std::string dump_instance(const AwfInstance& instance);

/// Parses instance text. Malformed JSON raises DataError with line/column.
AwfInstance parse_instance(const std::string& text);

AwfInstance load_instance(const std::string& path);
void save_instance(const AwfInstance& instance, const std::string& path);

nlohmann::ordered_json report_to_json(const SolveReport& report);

}  // namespace awf
