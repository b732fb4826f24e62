#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace bceid {

/// One coefficient of a linear form. When the coefficient is a bid
/// probability times a payoff difference, `profile` is the support index of
/// that bid profile and `raw` the unweighted coefficient, so that the
/// per-observation value f_j(x; omega = b_s) can be evaluated.
struct FormTerm {
  std::size_t var = 0;
  double coef = 0.0;
  std::int64_t profile = -1;
  double raw = 0.0;
};

/// F(x) = sum(coef * x) + constant.
struct LinearForm {
  std::vector<FormTerm> terms;
  double constant = 0.0;
  std::string label;

  double evaluate(std::span<const double> x) const;
  bool empty() const { return terms.empty(); }
};

/// Indexed family {F_j} of linear forms over kernel variables. Feasibility
/// means F_j(x) <= 0 for every relaxable form, G(x) = 0 for every hard
/// equality, and each probability block on the simplex.
struct ConstraintSystem {
  std::size_t num_vars = 0;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<std::vector<std::size_t>> blocks;
  std::vector<LinearForm> forms;
  std::vector<LinearForm> equalities;
  /// Recovery map of the fundamentals: marginals[k](x) is the probability
  /// of state k (constant unused).
  std::vector<LinearForm> marginals;

  /// Appends `count` variables with bounds [0, +inf); returns the first index.
  std::size_t add_variables(std::size_t count);
  void add_block(std::vector<std::size_t> vars);

  /// Adds the pair F <= 0 and -F <= 0 as relaxable forms.
  void add_relaxed_equality(const LinearForm& form);

  /// Largest F_j(x) over the relaxable forms (-inf when there are none).
  double max_form_value(std::span<const double> x) const;

  /// Largest violation of equalities, blocks and bounds at x.
  double structural_violation(std::span<const double> x) const;

  void validate() const;
};

}  // namespace bceid
