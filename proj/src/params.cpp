#include "gpcde/params.hpp"

#include "gpcde/error.hpp"

#include <algorithm>
#include <cmath>

namespace gpcde {

Matrix to_unconstrained(const Matrix& value, Constraint c) {
  switch (c) {
    case Constraint::kFree:
      return value;
    case Constraint::kPositive:
      if ((value.array() <= 0.0).any()) throw ConfigError("positive parameter must be > 0");
      return value.array().log().matrix();
    case Constraint::kLowerTriangularPositiveDiagonal: {
      if (value.rows() != value.cols()) throw DimensionError("triangular parameter must be square");
      if ((value.diagonal().array() <= 0.0).any()) {
        throw ConfigError("triangular parameter needs a positive diagonal");
      }
      Matrix raw = value.triangularView<Eigen::StrictlyLower>();
      raw.diagonal() = value.diagonal().array().log().matrix();
      return raw;
    }
  }
  return value;
}

Matrix from_unconstrained(const Matrix& raw, Constraint c) {
  switch (c) {
    case Constraint::kFree:
      return raw;
    case Constraint::kPositive:
      return raw.array().exp().matrix();
    case Constraint::kLowerTriangularPositiveDiagonal: {
      Matrix v = raw.triangularView<Eigen::StrictlyLower>();
      v.diagonal() = raw.diagonal().array().exp().matrix();
      return v;
    }
  }
  return raw;
}

void ParamRegistry::add(ParamSpec spec, const Matrix& value) {
  if (contains(spec.name)) throw ConfigError("duplicate parameter '" + spec.name + "'");
  if (value.rows() != spec.rows || value.cols() != spec.cols) {
    throw DimensionError("initial value of '" + spec.name + "' has the wrong shape");
  }
  Matrix raw = to_unconstrained(value, spec.constraint);
  index_[spec.name] = entries_.size();
  order_.push_back(spec.name);
  entries_.push_back(Entry{std::move(spec), std::move(raw)});
}

const ParamRegistry::Entry& ParamRegistry::entry(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return entries_[it->second];
}

ParamRegistry::Entry& ParamRegistry::entry(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return entries_[it->second];
}

const ParamSpec& ParamRegistry::spec(const std::string& name) const { return entry(name).spec; }

const Matrix& ParamRegistry::raw(const std::string& name) const { return entry(name).raw; }

void ParamRegistry::set_raw(const std::string& name, const Matrix& raw) {
  Entry& e = entry(name);
  if (raw.rows() != e.spec.rows || raw.cols() != e.spec.cols) {
    throw DimensionError("set_raw: wrong shape for '" + name + "'");
  }
  e.raw = raw;
}

Matrix ParamRegistry::value(const std::string& name) const {
  const Entry& e = entry(name);
  return from_unconstrained(e.raw, e.spec.constraint);
}

void ParamRegistry::set_value(const std::string& name, const Matrix& value) {
  Entry& e = entry(name);
  if (value.rows() != e.spec.rows || value.cols() != e.spec.cols) {
    throw DimensionError("set_value: wrong shape for '" + name + "'");
  }
  e.raw = to_unconstrained(value, e.spec.constraint);
}

Vector ParamRegistry::flatten(const std::vector<std::string>& names) const {
  const std::vector<std::string>& which = names.empty() ? order_ : names;
  Eigen::Index total = 0;
  for (const auto& n : which) total += raw(n).size();
  Vector flat(total);
  Eigen::Index off = 0;
  for (const auto& n : which) {
    const Matrix& r = raw(n);
    flat.segment(off, r.size()) = Eigen::Map<const Vector>(r.data(), r.size());
    off += r.size();
  }
  return flat;
}

void ParamRegistry::unflatten(const Vector& flat, const std::vector<std::string>& names) {
  const std::vector<std::string>& which = names.empty() ? order_ : names;
  Eigen::Index off = 0;
  for (const auto& n : which) {
    Entry& e = entry(n);
    if (off + e.raw.size() > flat.size()) throw DimensionError("unflatten: vector too short");
    e.raw = Eigen::Map<const Matrix>(flat.data() + off, e.raw.rows(), e.raw.cols());
    off += e.raw.size();
  }
  if (off != flat.size()) throw DimensionError("unflatten: vector too long");
}

bool ParamRegistry::operator==(const ParamRegistry& other) const {
  if (order_ != other.order_) return false;
  for (size_t i = 0; i < entries_.size(); ++i) {
    const Entry& a = entries_[i];
    const Entry& b = other.entries_[i];
    if (a.spec.constraint != b.spec.constraint) return false;
    if (a.raw.rows() != b.raw.rows() || a.raw.cols() != b.raw.cols()) return false;
    if (a.raw != b.raw) return false;
  }
  return true;
}

ad::Var BoundParams::operator[](const std::string& name) const {
  auto it = values.find(name);
  if (it == values.end()) throw ConfigError("parameter '" + name + "' is not bound");
  return it->second;
}

BoundParams bind(ad::Tape& tape, const ParamRegistry& registry,
                 const std::vector<std::string>& skip) {
  BoundParams bound;
  for (const auto& name : registry.names()) {
    if (std::find(skip.begin(), skip.end(), name) != skip.end()) continue;
    const ParamSpec& spec = registry.spec(name);
    ad::Var leaf = tape.leaf(registry.raw(name), name);
    bound.leaves[name] = leaf;
    switch (spec.constraint) {
      case Constraint::kFree:
        bound.values[name] = leaf;
        break;
      case Constraint::kPositive:
        bound.values[name] = ad::exp(leaf);
        break;
      case Constraint::kLowerTriangularPositiveDiagonal:
        bound.values[name] = ad::lower_tri_exp_diag(leaf);
        break;
    }
  }
  return bound;
}

ValueAndGrad evaluate_with_grad(const GraphBuilder& build, const ParamRegistry& registry) {
  ad::Tape tape;
  BoundParams bound = bind(tape, registry);
  ad::Var target = build(tape, bound);
  tape.backward(target);
  ValueAndGrad out;
  out.value = target.scalar();
  for (const auto& [name, leaf] : bound.leaves) out.grads[name] = tape.grad(leaf);
  return out;
}

double evaluate(const GraphBuilder& build, const ParamRegistry& registry) {
  ad::Tape tape;
  BoundParams bound = bind(tape, registry);
  ad::Var target = build(tape, bound);
  return target.scalar();
}

double FiniteDiffReport::worst() const {
  double w = 0.0;
  for (const auto& e : entries) w = std::max(w, e.max_rel_error);
  return w;
}

FiniteDiffReport finite_diff_check(const GraphBuilder& build, const ParamRegistry& registry,
                                   double eps, double floor) {
  if (!(eps > 0.0)) throw ConfigError("finite_diff_check: eps must be positive");
  const ValueAndGrad exact = evaluate_with_grad(build, registry);
  ParamRegistry work = registry;
  FiniteDiffReport report;
  for (const auto& name : registry.names()) {
    FiniteDiffEntry entry;
    entry.name = name;
    const Matrix base = registry.raw(name);
    const Matrix& g = exact.grads.at(name);
    for (Eigen::Index i = 0; i < base.size(); ++i) {
      Matrix plus = base, minus = base;
      plus(i) += eps;
      minus(i) -= eps;
      work.set_raw(name, plus);
      const double fp = evaluate(build, work);
      work.set_raw(name, minus);
      const double fm = evaluate(build, work);
      const double fd = (fp - fm) / (2.0 * eps);
      const double denom = std::max({std::abs(g(i)), std::abs(fd), floor});
      const double err = std::abs(g(i) - fd) / denom;
      if (entry.worst_index < 0 || err > entry.max_rel_error) {
        entry.max_rel_error = err;
        entry.worst_index = i;
        entry.ad_grad = g(i);
        entry.fd_grad = fd;
      }
    }
    work.set_raw(name, base);
    report.entries.push_back(entry);
  }
  return report;
}

}  // namespace gpcde
