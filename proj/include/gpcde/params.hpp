#pragma once

// Named model parameters stored in an unconstrained domain, and the glue that
// turns them into differentiable tape leaves.

#include "gpcde/autodiff.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace gpcde {

using ad::Matrix;
using ad::Vector;

enum class Constraint {
  kFree,
  /// Stored as log(value).
  kPositive,
  /// Square matrix; strict lower triangle free, diagonal stored as log.
  kLowerTriangularPositiveDiagonal,
};

struct ParamSpec {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  Constraint constraint = Constraint::kFree;
};

/// Map constrained -> unconstrained and back.
Matrix to_unconstrained(const Matrix& value, Constraint c);
Matrix from_unconstrained(const Matrix& raw, Constraint c);

class ParamRegistry {
 public:
  /// Register a parameter with its initial constrained value.
  void add(ParamSpec spec, const Matrix& value);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  const ParamSpec& spec(const std::string& name) const;
  const Matrix& raw(const std::string& name) const;
  void set_raw(const std::string& name, const Matrix& raw);
  Matrix value(const std::string& name) const;
  void set_value(const std::string& name, const Matrix& value);

  /// Names in registration order.
  const std::vector<std::string>& names() const { return order_; }

  /// Concatenate the raw values of `names` (all parameters if empty),
  /// column-major within each parameter.
  Vector flatten(const std::vector<std::string>& names = {}) const;
  void unflatten(const Vector& flat, const std::vector<std::string>& names = {});

  bool operator==(const ParamRegistry& other) const;

 private:
  struct Entry {
    ParamSpec spec;
    Matrix raw;
  };
  const Entry& entry(const std::string& name) const;
  Entry& entry(const std::string& name);

  std::vector<std::string> order_;
  std::map<std::string, size_t> index_;
  std::vector<Entry> entries_;
};

/// Parameters bound to a tape: `leaves` are the raw (unconstrained) inputs,
/// `values` their constrained images used by model code.
struct BoundParams {
  std::map<std::string, ad::Var> leaves;
  std::map<std::string, ad::Var> values;

  ad::Var operator[](const std::string& name) const;
  bool has(const std::string& name) const { return values.count(name) != 0; }
};

/// Bind every parameter not listed in `skip` as a leaf of `tape`.
BoundParams bind(ad::Tape& tape, const ParamRegistry& registry,
                 const std::vector<std::string>& skip = {});

using GraphBuilder = std::function<ad::Var(ad::Tape&, const BoundParams&)>;

struct ValueAndGrad {
  double value = 0.0;
  /// d(target)/d(raw parameter), keyed by name.
  std::map<std::string, Matrix> grads;
};

/// Build the graph for `registry`, run the backward pass from the scalar it
/// returns and collect unconstrained gradients for every parameter.
ValueAndGrad evaluate_with_grad(const GraphBuilder& build, const ParamRegistry& registry);

/// Forward pass only.
double evaluate(const GraphBuilder& build, const ParamRegistry& registry);

struct FiniteDiffEntry {
  std::string name;
  /// max over coordinates of |g_ad - g_fd| / max(|g_ad|, |g_fd|, floor)
  double max_rel_error = 0.0;
  Eigen::Index worst_index = -1;
  double ad_grad = 0.0;
  double fd_grad = 0.0;
};

struct FiniteDiffReport {
  std::vector<FiniteDiffEntry> entries;
  double worst() const;
};

/// Compare reverse-mode gradients with central differences in the
/// unconstrained domain. `floor` guards the relative error for gradients
/// that are essentially zero.
FiniteDiffReport finite_diff_check(const GraphBuilder& build, const ParamRegistry& registry,
                                   double eps, double floor = 1e-3);

}  // namespace gpcde
