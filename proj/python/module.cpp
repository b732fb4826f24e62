#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bceid/bounds.hpp"
#include "bceid/cli.hpp"
#include "bceid/error.hpp"
#include "bceid/inference.hpp"
#include "bceid/montecarlo.hpp"
#include "bceid/parametric.hpp"
#include "bceid/sharp.hpp"

namespace py = pybind11;
using namespace bceid;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Sharp identification of auction value distributions";

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);
  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);

  py::class_<SupportGrid>(m, "SupportGrid")
      .def(py::init<std::size_t, std::vector<double>, std::vector<double>>(), py::arg("players"),
           py::arg("values"), py::arg("bids"))
      .def_static("integer", &SupportGrid::integer, py::arg("players"), py::arg("value_max"),
                  py::arg("bid_max"))
      .def_static("uniform", &SupportGrid::uniform, py::arg("players"), py::arg("H"),
                  py::arg("step"))
      .def_property_readonly("players", &SupportGrid::players)
      .def_property_readonly("values", &SupportGrid::values)
      .def_property_readonly("bids", &SupportGrid::bids)
      .def_property_readonly("H", &SupportGrid::H);

  py::class_<UtilityKernel>(m, "UtilityKernel")
      .def_static("first_price", &UtilityKernel::first_price)
      .def_static("second_price", &UtilityKernel::second_price);

  py::class_<BidDistribution>(m, "BidDistribution")
      .def(py::init([](std::vector<BidProfile> profiles, std::vector<double> probs) {
             return BidDistribution(std::move(profiles), std::move(probs));
           }),
           py::arg("profiles"), py::arg("probs"))
      .def_static("point_mass", &BidDistribution::point_mass, py::arg("profile"))
      .def_property_readonly("support", &BidDistribution::support)
      .def_property_readonly("probs", &BidDistribution::probs)
      .def("__len__", &BidDistribution::size);

  py::class_<Interval>(m, "Interval")
      .def_readonly("lower", &Interval::lower)
      .def_readonly("upper", &Interval::upper)
      .def_readonly("empty", &Interval::empty)
      .def_readonly("tolerance", &Interval::tolerance)
      .def_readonly("feasibility_tolerance", &Interval::feasibility_tolerance)
      .def("contains", &Interval::contains, py::arg("x"), py::arg("slack") = 0.0)
      .def("__repr__", [](const Interval& iv) {
        if (iv.empty) return std::string("Interval(empty)");
        return "Interval(" + std::to_string(iv.lower) + ", " + std::to_string(iv.upper) + ")";
      });

  py::class_<MembershipResult>(m, "MembershipResult")
      .def_readonly("member", &MembershipResult::member)
      .def_readonly("minimax", &MembershipResult::minimax)
      .def_readonly("tolerance", &MembershipResult::tolerance);

  py::class_<IdentifiedSet>(m, "IdentifiedSet")
      .def_property_readonly("mask",
                             [](const IdentifiedSet& s) {
                               return std::vector<bool>(s.mask.begin(), s.mask.end());
                             })
      .def_readonly("minimax", &IdentifiedSet::minimax)
      .def_readonly("tolerance", &IdentifiedSet::tolerance)
      .def_readonly("method", &IdentifiedSet::method)
      .def("count", &IdentifiedSet::count);

  m.def("membership_cv", &membership_cv, py::arg("pi"), py::arg("phi"), py::arg("grid"),
        py::arg("u"), py::arg("tolerance") = lp::kFeasibilityTolerance);
  m.def("moment_bounds_cv", &moment_bounds_cv, py::arg("f"), py::arg("phi"), py::arg("grid"),
        py::arg("u"), py::arg("tolerance") = 0.0);
  m.def(
      "ipv_symmetry_refuted",
      [](const BidDistribution& phi, const SupportGrid& grid, const UtilityKernel& u,
         double tolerance) {
        return ipv_symmetry_test(phi, grid, u, tolerance) == SymmetryVerdict::refuted;
      },
      py::arg("phi"), py::arg("grid"), py::arg("u"), py::arg("tolerance") = 0.0);

  py::class_<Family>(m, "Family")
      .def_static(
          "make",
          [](const std::string& name, double H) {
            return Family::make(family_kind_from_string(name), H);
          },
          py::arg("name"), py::arg("H"))
      .def_property_readonly("parameter_names", &Family::parameter_names);

  py::class_<ThetaGrid>(m, "ThetaGrid")
      .def_static("product", &ThetaGrid::product, py::arg("axes"))
      .def_static("default_for", &ThetaGrid::default_for, py::arg("family"))
      .def_readonly("points", &ThetaGrid::points)
      .def("__len__", &ThetaGrid::size);

  m.def("density", &density, py::arg("family"), py::arg("theta"), py::arg("values"));
  m.def("parametric_identified_set", &parametric_identified_set, py::arg("phi"), py::arg("grid"),
        py::arg("u"), py::arg("family"), py::arg("thetas"),
        py::arg("tolerance") = lp::kFeasibilityTolerance);

  py::class_<BidSample>(m, "BidSample")
      .def_readonly("draws", &BidSample::draws)
      .def_readonly("seed", &BidSample::seed)
      .def("__len__", &BidSample::size);

  py::class_<ToleranceSchedule>(m, "ToleranceSchedule")
      .def_readonly("sigma", &ToleranceSchedule::sigma)
      .def_readonly("epsilon", &ToleranceSchedule::epsilon)
      .def_readonly("lambda_", &ToleranceSchedule::lambda);

  m.def(
      "hoeffding_tolerances",
      [](double H, std::size_t players, std::size_t num_bids, std::size_t num_values,
         std::size_t num_thetas, double delta, std::size_t N, bool parametric) {
        return hoeffding_tolerances(H, players, num_bids, num_values, num_thetas, delta, N,
                                    parametric ? ToleranceMode::parametric
                                               : ToleranceMode::nonparam_moment);
      },
      py::arg("H"), py::arg("players"), py::arg("num_bids"), py::arg("num_values"),
      py::arg("num_thetas"), py::arg("delta"), py::arg("N"), py::arg("parametric") = false);
  m.def("bernstein_tolerances", &bernstein_tolerances, py::arg("H"), py::arg("players"),
        py::arg("num_bids"), py::arg("num_values"), py::arg("num_thetas"), py::arg("delta"),
        py::arg("N"));
  m.def("empirical_distribution", &empirical_distribution, py::arg("sample"));
  m.def("nonparam_moment_interval",
        [](const BidSample& sample, const std::vector<double>& f, const SupportGrid& grid,
           const UtilityKernel& u, double delta) {
          return nonparam_moment_interval(sample, f, grid, u, delta);
        },
        py::arg("sample"), py::arg("f"), py::arg("grid"), py::arg("u"), py::arg("delta"));

  m.def(
      "generate_bce",
      [](const ValueDistribution& pi, const SupportGrid& grid, const UtilityKernel& u,
         const std::string& selector, std::uint64_t seed) {
        return generate_bce(pi, grid, u, {selector_kind_from_string(selector), seed});
      },
      py::arg("pi"), py::arg("grid"), py::arg("u"), py::arg("selector") = "max_revenue",
      py::arg("seed") = 0);
  m.def("sample_bids", &sample_bids, py::arg("phi"), py::arg("N"), py::arg("seed"));

  m.def("bbm_mean_upper",
        [](double R, double H, std::size_t n) {
          return bbm_mean_upper(R, H, n, BbmVariant::general);
        },
        py::arg("R"), py::arg("H"), py::arg("n"));
}
