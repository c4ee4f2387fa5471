#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "skewlab/cli.hpp"
#include "skewlab/convergence.hpp"
#include "skewlab/errors.hpp"
#include "skewlab/expr.hpp"
#include "skewlab/simulate.hpp"
#include "skewlab/transforms.hpp"

namespace py = pybind11;
using namespace skewlab;

namespace {

ScalarCoefficient coefficient(const std::string& source, const std::string& label) {
  const auto e = CoefficientExpr::parse(source);
  return ScalarCoefficient([e](double x, double eps) { return e(x, eps); }, label);
}

py::array_t<double> to_array(const PathEnsemble& p) {
  py::array_t<double> out({p.n_paths(), p.n_points()});
  auto view = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < p.n_paths(); ++i) {
    const auto src = p.path(i);
    for (std::size_t k = 0; k < src.size(); ++k) view(i, k) = src[k];
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Skew diffusion simulation and convergence checks";

  py::register_exception<Error>(m, "SkewlabError", PyExc_ValueError);

  m.def("kappa", [](double beta, double x) { return kappa(SkewParam(beta), x); }, py::arg("beta"),
        py::arg("x"));
  m.def("phi", [](double beta, double x) { return phi(SkewParam(beta), x); }, py::arg("beta"),
        py::arg("x"));
  m.def("alpha_limit", &alpha_limit, py::arg("f1"), py::arg("f2"));
  m.def("ks_distance", [](const std::vector<double>& a, const std::vector<double>& b) {
    return ks_distance(a, b);
  });
  m.def("wasserstein1", [](const std::vector<double>& a, const std::vector<double>& b) {
    return wasserstein1(a, b);
  });
  m.def("ks_critical_value", &ks_critical_value, py::arg("n"), py::arg("m"), py::arg("level") = 0.99);

  py::class_<CoefficientExpr>(m, "Expr")
      .def(py::init([](const std::string& source, const std::map<std::string, double>& params) {
             return CoefficientExpr::parse(source, params);
           }),
           py::arg("source"), py::arg("params") = std::map<std::string, double>{})
      .def("__call__", &CoefficientExpr::operator(), py::arg("x"), py::arg("eps") = 0.0)
      .def_property_readonly("source", &CoefficientExpr::source)
      .def("print", &CoefficientExpr::print)
      .def_property_readonly("uses_x", &CoefficientExpr::uses_x)
      .def_property_readonly("uses_eps", &CoefficientExpr::uses_eps)
      .def("__repr__", [](const CoefficientExpr& e) { return "Expr('" + e.print() + "')"; });

  m.def(
      "simulate_skew",
      [](double beta, double x0, double horizon, std::size_t n_steps, std::size_t n_paths,
         std::uint64_t seed, const std::string& g, const std::string& sigma) {
        const TimeGrid grid(horizon, n_steps);
        auto noise = std::make_shared<const NoiseBlock>(gen_noise(seed, grid, n_paths));
        PathEnsemble p = [&] {
          py::gil_scoped_release release;
          return simulate_skew_sde(SkewParam(beta), coefficient(g, "g"), coefficient(sigma, "sigma"),
                                   x0, grid, std::move(noise));
        }();
        return to_array(p);
      },
      py::arg("beta"), py::arg("x0") = 0.0, py::arg("T") = 1.0, py::arg("n_steps") = 1000,
      py::arg("n_paths") = 1000, py::arg("seed") = 0, py::arg("g") = "0", py::arg("sigma") = "1",
      "Skew-SDE paths as an (n_paths, n_steps + 1) array.");

  m.def(
      "local_time",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> paths, double horizon,
         double delta, const std::string& sigma) {
        if (paths.ndim() != 2) throw ValidationError("paths must be a 2-d array");
        const auto n = static_cast<std::size_t>(paths.shape(0));
        const auto pts = static_cast<std::size_t>(paths.shape(1));
        if (pts < 2) throw ValidationError("paths need at least two grid points");
        const TimeGrid grid(horizon, pts - 1);
        PathEnsemble p(grid, n, nullptr, "input");
        auto view = paths.unchecked<2>();
        for (std::size_t i = 0; i < n; ++i) {
          auto dst = p.path(i);
          for (std::size_t k = 0; k < pts; ++k) dst[k] = view(i, k);
        }
        if (delta <= 0.0) delta = default_bandwidth(grid);
        const auto est = estimate_local_time(p, coefficient(sigma, "sigma"), delta);
        py::array_t<double> out({n, pts});
        auto o = out.mutable_unchecked<2>();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t k = 0; k < pts; ++k) o(i, k) = est.values[i][k];
        return out;
      },
      py::arg("paths"), py::arg("T") = 1.0, py::arg("delta") = 0.0, py::arg("sigma") = "1",
      "Occupation-time local time at 0; delta <= 0 selects 2 sqrt(dt).");

  m.def(
      "run_command",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "skewlab");
        std::ostringstream out, err;
        const int code = run_command(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line tool; returns (exit_code, stdout, stderr).");
}
