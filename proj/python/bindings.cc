#include <optional>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sdcert/certify.h"
#include "sdcert/errors.h"
#include "sdcert/mpc.h"
#include "sdcert/norms.h"
#include "sdcert/simulate.h"
#include "sdcert/systems.h"

#ifndef SDCERT_VERSION
#define SDCERT_VERSION "dev"
#endif

namespace py = pybind11;
using namespace sdcert;

namespace {

py::dict transient_dict(const TransientConstants& tc) {
  py::dict d;
  d["prefactor"] = tc.prefactor;
  d["decay_rate"] = tc.decay_rate;
  d["spectral_radius"] = tc.spectral_radius;
  d["weights"] = Eigen::Vector2d(tc.weights);
  return d;
}

Eigen::MatrixXd stack(const std::vector<Eigen::VectorXd>& rows, int dim) {
  Eigen::MatrixXd M(rows.size(), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) M.row(i) = rows[i].transpose();
  return M;
}

CondensedMpc build_mpc(const Eigen::MatrixXd& Ac, const Eigen::MatrixXd& Bc, double delta, int horizon,
                       const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R, double gamma,
                       const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  return CondensedMpc(make_mpc_problem(Ac, Bc, delta, horizon, Q, R, gamma, lower, upper));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Contraction certificates for continuous plants under sampled discrete controllers";
  m.attr("__version__") = SDCERT_VERSION;

  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<GainConstants>(m, "GainConstants")
      .def(py::init([](double lip_x_f, double lip_z_f, double xi, double lip_x_G, double lip_z_G,
                       std::optional<double> zeta) {
             GainConstants g{lip_x_f, lip_z_f, xi, lip_x_G, lip_z_G, zeta};
             g.validate();
             return g;
           }),
           py::arg("lip_x_f"), py::arg("lip_z_f"), py::arg("xi"), py::arg("lip_x_G"), py::arg("lip_z_G"),
           py::arg("zeta") = py::none())
      .def_readwrite("lip_x_f", &GainConstants::lip_x_f)
      .def_readwrite("lip_z_f", &GainConstants::lip_z_f)
      .def_readwrite("xi", &GainConstants::xi)
      .def_readwrite("lip_x_G", &GainConstants::lip_x_G)
      .def_readwrite("lip_z_G", &GainConstants::lip_z_G)
      .def_readwrite("zeta", &GainConstants::rm_rate);

  py::class_<LtiSystem>(m, "LtiSystem")
      .def(py::init([](Eigen::MatrixXd A, Eigen::MatrixXd B, Eigen::MatrixXd C, Eigen::MatrixXd D) {
             LtiSystem s{std::move(A), std::move(B), std::move(C), std::move(D)};
             s.validate();
             return s;
           }),
           py::arg("A"), py::arg("B"), py::arg("C"), py::arg("D"))
      .def_readonly("A", &LtiSystem::A)
      .def_readonly("B", &LtiSystem::B)
      .def_readonly("C", &LtiSystem::C)
      .def_readonly("D", &LtiSystem::D)
      .def("reduced_matrix", &LtiSystem::reduced_matrix);

  m.def("h_kernel", &h_kernel, py::arg("t"), py::arg("c"));
  m.def("log_norm_2_weighted", &log_norm_2_weighted, py::arg("A"), py::arg("P"));
  m.def("spectral_radius", &spectral_radius, py::arg("M"));
  m.def("spectral_abscissa", &spectral_abscissa, py::arg("M"));
  m.def("schur_2x2_nonneg", &schur_2x2_nonneg, py::arg("M"));
  m.def("induced_norm_2_weighted", &induced_norm_2_weighted, py::arg("M"), py::arg("eta"));
  m.def("perron_weights", &perron_weights, py::arg("M"));

  m.def("bound_matrix_B", &bound_matrix_B, py::arg("gains"), py::arg("T"));
  m.def("small_gain_holds", &small_gain_holds, py::arg("gains"));
  m.def("gain_matrix_smallgain", &gain_matrix_smallgain, py::arg("gains"), py::arg("n"), py::arg("T"));
  m.def("gain_matrix_rm", &gain_matrix_rm, py::arg("gains"), py::arg("n"), py::arg("T"));
  m.def("sampling_bound_Tn", &sampling_bound_Tn, py::arg("gains"), py::arg("n"));
  m.def(
      "transient_constants_smallgain",
      [](const GainConstants& g, int n, double T) { return transient_dict(transient_constants_smallgain(g, n, T)); },
      py::arg("gains"), py::arg("n"), py::arg("T"));
  m.def(
      "transient_constants_rm",
      [](const GainConstants& g, int n, double T) { return transient_dict(transient_constants_rm(g, n, T)); },
      py::arg("gains"), py::arg("n"), py::arg("T"));
  m.def(
      "lti_constants",
      [](const LtiSystem& s, std::optional<Eigen::MatrixXd> Px, std::optional<Eigen::MatrixXd> Pz) {
        return lti_constants(s, Px.value_or(Eigen::MatrixXd::Identity(s.nx(), s.nx())),
                             Pz.value_or(Eigen::MatrixXd::Identity(s.nz(), s.nz())));
      },
      py::arg("system"), py::arg("Px") = py::none(), py::arg("Pz") = py::none());
  m.def(
      "lti_dtc_matrix",
      [](const LtiSystem& s, int n, double T) {
        const LtiExactMap L = lti_dtc_matrix(s, n, T);
        return py::make_tuple(L.L, L.dtc_rate);
      },
      py::arg("system"), py::arg("n"), py::arg("T"));
  m.def("scalar_loop_multiplier", &scalar_loop_multiplier, py::arg("a"), py::arg("b"), py::arg("c"), py::arg("d"),
        py::arg("T"));
  m.def("scalar_loop_threshold", &scalar_loop_threshold, py::arg("a"), py::arg("b"), py::arg("c"), py::arg("d"));

  m.def(
      "zoh_discretize",
      [](const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, double dt) {
        const ZohPair z = zoh_discretize(A, B, dt);
        return py::make_tuple(z.Ad, z.Bd);
      },
      py::arg("A"), py::arg("B"), py::arg("dt"));

  m.def(
      "simulate_lti",
      [](const LtiSystem& s, int n, double T, const Eigen::VectorXd& x0, const Eigen::VectorXd& z0, double t_end,
         int substeps, bool update_at_zero) {
        SimulationOptions opts;
        opts.substeps = substeps;
        opts.update_at_zero = update_at_zero;
        const Trajectory tr = simulate_ctdt(make_lti_ctdt(s, n, T), x0, z0, t_end, opts);
        py::dict d;
        d["t"] = Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(tr.t.data(), static_cast<Eigen::Index>(tr.t.size())));
        d["x"] = stack(tr.x, tr.nx);
        d["z"] = stack(tr.z, tr.nz);
        d["is_sample"] = std::vector<bool>(tr.is_sample.begin(), tr.is_sample.end());
        d["diverged"] = tr.diverged;
        return d;
      },
      py::arg("system"), py::arg("n"), py::arg("T"), py::arg("x0"), py::arg("z0"), py::arg("t_end"),
      py::arg("substeps") = 100, py::arg("update_at_zero") = false);

  m.def("dare_solve", [](const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& Q,
                         const Eigen::MatrixXd& R) { return dare_solve(A, B, Q, R); },
        py::arg("A"), py::arg("B"), py::arg("Q"), py::arg("R"));
  m.def(
      "mpc_closed_form",
      [](const Eigen::MatrixXd& Ac, const Eigen::MatrixXd& Bc, double delta, int horizon, const Eigen::MatrixXd& Q,
         const Eigen::MatrixXd& R) {
        const CondensedMpc mpc = build_mpc(Ac, Bc, delta, horizon, Q, R, 0.0, {}, {});
        const ClosedFormMpc cf = mpc_closed_form(mpc, Ac, Bc);
        py::dict d;
        d["P"] = cf.P;
        d["K"] = cf.K;
        d["A_cl"] = cf.A_cl;
        d["lognorm"] = cf.lognorm;
        d["abscissa"] = cf.abscissa;
        d["step"] = mpc.default_step();
        return d;
      },
      py::arg("Ac"), py::arg("Bc"), py::arg("delta"), py::arg("horizon"), py::arg("Q"), py::arg("R"));
  m.def(
      "rm_lognorm_contour",
      [](const Eigen::MatrixXd& Ac, const Eigen::MatrixXd& Bc, double delta, int horizon, const Eigen::MatrixXd& Q,
         const Eigen::MatrixXd& R, double gamma, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
         const Eigen::Vector2d& grid_lower, const Eigen::Vector2d& grid_upper, int n1, int n2, double fd_step) {
        const CondensedMpc mpc = build_mpc(Ac, Bc, delta, horizon, Q, R, gamma, lower, upper);
        GridSpec grid{grid_lower, grid_upper, n1, n2};
        const Contour c = rm_lognorm_contour(mpc, Ac, Bc, mpc.problem().P, grid, mpc.default_step(), fd_step);
        return py::make_tuple(c.x1, c.x2, c.mu);
      },
      py::arg("Ac"), py::arg("Bc"), py::arg("delta"), py::arg("horizon"), py::arg("Q"), py::arg("R"),
      py::arg("gamma"), py::arg("lower"), py::arg("upper"), py::arg("grid_lower"), py::arg("grid_upper"),
      py::arg("n1") = 51, py::arg("n2") = 51, py::arg("fd_step") = 0.01);
}
