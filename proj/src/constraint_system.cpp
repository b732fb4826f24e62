#include "bceid/constraint_system.hpp"

#include <algorithm>
#include <cmath>

#include "bceid/error.hpp"

namespace bceid {

double LinearForm::evaluate(std::span<const double> x) const {
  double total = constant;
  for (const auto& t : terms) total += t.coef * x[t.var];
  return total;
}

std::size_t ConstraintSystem::add_variables(std::size_t count) {
  const std::size_t first = num_vars;
  num_vars += count;
  lower.resize(num_vars, 0.0);
  upper.resize(num_vars, std::numeric_limits<double>::infinity());
  return first;
}

void ConstraintSystem::add_block(std::vector<std::size_t> vars) {
  if (vars.empty()) throw DomainError("probability block is empty");
  blocks.push_back(std::move(vars));
}

void ConstraintSystem::add_relaxed_equality(const LinearForm& form) {
  forms.push_back(form);
  LinearForm neg = form;
  neg.constant = -neg.constant;
  for (auto& t : neg.terms) {
    t.coef = -t.coef;
    t.raw = -t.raw;
  }
  if (!neg.label.empty()) neg.label += "~rev";
  forms.push_back(std::move(neg));
}

double ConstraintSystem::max_form_value(std::span<const double> x) const {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& f : forms) best = std::max(best, f.evaluate(x));
  return best;
}

double ConstraintSystem::structural_violation(std::span<const double> x) const {
  double worst = 0.0;
  for (std::size_t j = 0; j < num_vars; ++j) {
    worst = std::max({worst, lower[j] - x[j], x[j] - upper[j]});
  }
  for (const auto& g : equalities) worst = std::max(worst, std::abs(g.evaluate(x)));
  for (const auto& block : blocks) {
    double mass = 0.0;
    for (auto j : block) {
      mass += x[j];
      worst = std::max(worst, -x[j]);
    }
    worst = std::max(worst, std::abs(mass - 1.0));
  }
  return worst;
}

void ConstraintSystem::validate() const {
  if (lower.size() != num_vars || upper.size() != num_vars) {
    throw DomainError("variable bounds do not match the variable count");
  }
  auto check_form = [&](const LinearForm& f) {
    if (!std::isfinite(f.constant)) {
      throw DomainError("form constant is not finite");
    }
    for (const auto& t : f.terms) {
      if (t.var >= num_vars) throw DomainError("form references a missing variable");
      if (!std::isfinite(t.coef)) throw DomainError("form coefficient is not finite");
    }
  };
  for (const auto& f : forms) check_form(f);
  for (const auto& f : equalities) check_form(f);
  for (const auto& f : marginals) check_form(f);
  for (const auto& block : blocks) {
    for (auto j : block) {
      if (j >= num_vars) throw DomainError("block references a missing variable");
    }
  }
}

}  // namespace bceid
