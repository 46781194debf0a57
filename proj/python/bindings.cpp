#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qlbgk/equilibrium.hpp"
#include "qlbgk/error.hpp"
#include "qlbgk/grid.hpp"
#include "qlbgk/harness.hpp"
#include "qlbgk/qdd.hpp"
#include "qlbgk/qle.hpp"
#include "qlbgk/scenarios.hpp"
#include "qlbgk/state.hpp"

namespace py = pybind11;
using namespace qlbgk;

namespace {

py::dict snapshot_dict(const Snapshot& s) {
  py::dict d;
  d["step"] = s.step;
  d["time"] = s.time;
  d["density"] = s.density;
  d["trace"] = s.trace;
  d["discarded_mass"] = s.discarded_mass;
  if (s.chemical_potential.size() > 0) {
    d["chemical_potential"] = s.chemical_potential;
    d["poisson_potential"] = s.poisson_potential;
  }
  return d;
}

py::dict trajectory_dict(const Trajectory& t) {
  py::list snaps;
  for (const Snapshot& s : t.snapshots) snaps.append(snapshot_dict(s));
  py::dict d;
  d["snapshots"] = snaps;
  d["failed"] = t.failed;
  d["failure"] = t.failure;
  d["final_time"] = t.final_time;
  d["max_step_mass_change"] = t.max_step_mass_change;
  return d;
}

py::dict report_dict(const MinimizeReport& r) {
  py::dict d;
  d["iterations"] = r.iterations;
  d["final_relative_step"] = r.final_relative_step;
  d["line_search_calls"] = r.line_search_calls;
  d["evaluations"] = r.evaluations;
  d["converged"] = r.converged;
  d["final_gradient_norm"] = r.final_gradient_norm;
  return d;
}

EquilibriumOptions options_with_tolerance(double tolerance) {
  EquilibriumOptions o;
  o.tolerance = tolerance;
  return o;
}

} // namespace

PYBIND11_MODULE(qlbgk, m) {
  m.doc() = "Quantum Liouville-BGK and quantum drift-diffusion solvers";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
  py::register_exception<InvalidConfig>(m, "InvalidConfig", base.ptr());
  py::register_exception<ConvergenceError>(m, "ConvergenceError", base.ptr());
  py::register_exception<SingularSystemError>(m, "SingularSystemError",
                                              base.ptr());
  py::register_exception<PositivityError>(m, "PositivityError", base.ptr());

  py::class_<Grid>(m, "Grid")
      .def(py::init<int>(), py::arg("points"))
      .def_property_readonly("size", &Grid::size)
      .def_property_readonly("dx", &Grid::dx)
      .def("nodes", &Grid::nodes)
      .def("__repr__", [](const Grid& g) {
        return "Grid(" + std::to_string(g.size()) + ")";
      });

  py::class_<DensityOperator>(m, "DensityOperator")
      .def(py::init<Grid, RealVector, Eigen::MatrixXcd, double>(),
           py::arg("grid"), py::arg("weights"), py::arg("modes"),
           py::arg("discarded_mass") = 0.0)
      .def_static("from_kernel", &DensityOperator::from_kernel,
                  py::arg("grid"), py::arg("kernel"),
                  py::arg("discarded_mass") = 0.0)
      .def_property_readonly("grid", &DensityOperator::grid)
      .def_property_readonly("weights", &DensityOperator::weights)
      .def_property_readonly("modes", &DensityOperator::modes)
      .def_property_readonly("mode_count", &DensityOperator::mode_count)
      .def_property_readonly("discarded_mass", &DensityOperator::discarded_mass)
      .def("local_density",
           [](const DensityOperator& r) { return local_density(r); })
      .def("trace", [](const DensityOperator& r) { return trace(r); })
      .def("kernel",
           [](const DensityOperator& r) { return assemble_matrix(r); });

  m.def("solve_poisson", &solve_poisson, py::arg("density"), py::arg("alpha"),
        py::arg("grid"));
  m.def("semiclassical_guess", &semiclassical_guess, py::arg("n"),
        py::arg("beta"));
  m.def("eval_J", &eval_J, py::arg("a"), py::arg("n"), py::arg("beta"),
        py::arg("grid"));
  m.def("grad_J", &grad_J, py::arg("a"), py::arg("n"), py::arg("beta"),
        py::arg("grid"));
  m.def("equilibrium_density", &equilibrium_density, py::arg("a"),
        py::arg("beta"), py::arg("grid"));
  m.def(
      "minimize_J",
      [](const RealVector& n, double beta, const Grid& grid, double tolerance) {
        auto [a, report] =
            minimize_J(n, beta, grid, options_with_tolerance(tolerance));
        return py::make_tuple(a, report_dict(report));
      },
      py::arg("n"), py::arg("beta"), py::arg("grid"),
      py::arg("tolerance") = 1e-7);
  m.def(
      "maxwellian",
      [](const RealVector& n, double beta, const Grid& grid, double tolerance) {
        MaxwellianResult r =
            maxwellian(n, beta, grid, options_with_tolerance(tolerance));
        return py::make_tuple(r.rho, r.potential, report_dict(r.report));
      },
      py::arg("n"), py::arg("beta"), py::arg("grid"),
      py::arg("tolerance") = 1e-7);
  m.def("eval_J_qdd", &eval_J_qdd, py::arg("a"), py::arg("n_k"),
        py::arg("w_k"), py::arg("h"), py::arg("beta"), py::arg("grid"));
  m.def("grad_J_qdd", &grad_J_qdd, py::arg("a"), py::arg("n_k"),
        py::arg("w_k"), py::arg("h"), py::arg("beta"), py::arg("grid"));

  m.def("double_barrier_potential", &double_barrier_potential,
        py::arg("grid"), py::arg("height") = 2.0, py::arg("width") = 0.05,
        py::arg("center") = 0.5);
  m.def("tilted_potential", &tilted_potential, py::arg("base"),
        py::arg("slope"), py::arg("grid"));
  m.def("preset_names", &preset_names);
  m.def("preset", [](const std::string& name) { return config_echo(preset(name)); },
        py::arg("name"), "Preset parameters as a key -> string dict.");

  py::class_<Scenario>(m, "Scenario")
      .def(py::init([](const std::string& name, const KeyValues& overrides) {
             SimConfig c = preset(name);
             apply_config(c, overrides);
             return make_scenario(c);
           }),
           py::arg("name") = "maxwellian",
           py::arg("overrides") = KeyValues{})
      .def_readonly("name", &Scenario::name)
      .def_readonly("grid", &Scenario::grid)
      .def_readonly("v_ext_initial", &Scenario::v_ext_initial)
      .def_readonly("v_ext_run", &Scenario::v_ext_run)
      .def_readonly("rho0", &Scenario::rho0)
      .def_property_readonly(
          "config", [](const Scenario& s) { return config_echo(s.params); })
      .def(
          "run_qle",
          [](const Scenario& s, double final_time, int stride) {
            const QleSolver solver(s.grid, s.params.qle(), s.v_ext_run);
            Trajectory t;
            {
              py::gil_scoped_release release;
              t = solver.run(s.rho0, final_time, stride);
            }
            return trajectory_dict(t);
          },
          py::arg("final_time"), py::arg("stride") = 1)
      .def(
          "run_qdd",
          [](const Scenario& s, double final_time, int stride) {
            const QddSolver solver(s.grid, s.params.qdd(), s.v_ext_run);
            Trajectory t;
            {
              py::gil_scoped_release release;
              t = solver.run(local_density(s.rho0), final_time, stride);
            }
            return trajectory_dict(t);
          },
          py::arg("final_time"), py::arg("stride") = 1)
      .def("compare", [](const Scenario& s) {
        ComparisonReport r;
        {
          py::gil_scoped_release release;
          r = run_comparison(s, s.params);
        }
        py::dict d;
        d["scenario"] = r.scenario;
        d["epsilon"] = r.epsilon;
        d["error"] = r.error;
        d["times"] = r.times;
        d["snapshot_errors"] = r.snapshot_errors;
        d["qle_mass_drift"] = r.qle_mass_drift;
        d["qdd_mass_drift"] = r.qdd_mass_drift;
        d["qle"] = trajectory_dict(r.qle);
        d["qdd"] = trajectory_dict(r.qdd);
        return d;
      });

  m.def(
      "qle_step",
      [](const DensityOperator& rho, const RealVector& v_ext, double h,
         double epsilon, double beta, double alpha) {
        QleConfig c;
        c.time_step = h;
        c.epsilon = epsilon;
        c.beta = beta;
        c.alpha = alpha;
        return qle_step(rho, c, v_ext);
      },
      py::arg("rho"), py::arg("v_ext"), py::arg("h"), py::arg("epsilon"),
      py::arg("beta"), py::arg("alpha") = 1.0);

  m.def("version", &library_version);
}
