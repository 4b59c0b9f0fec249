#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mfd3/config.hpp"
#include "mfd3/diagnostics.hpp"
#include "mfd3/dynamics.hpp"
#include "mfd3/input_distribution.hpp"
#include "mfd3/network.hpp"
#include "mfd3/special_functions.hpp"
#include "mfd3/state_io.hpp"

namespace py = pybind11;
using namespace mfd3;

namespace {

py::object event(const std::optional<long>& e) { return e ? py::cast(*e) : py::none(); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Mean-field three-layer ReLU network under a Bessel radial input law.";

  m.def("log_gamma", &log_gamma, py::arg("x"));
  m.def("bessel_j", [](double nu, double x) { return bessel_j(BesselOrder(nu), x); }, py::arg("nu"), py::arg("x"));
  m.def("c_gamma", &c_gamma, py::arg("d"), "E_{u ~ unif(S^{d-1})} relu(u_1) * sqrt(d)");
  m.def("r_d", &r_d, py::arg("d"));

  py::class_<DistributionParams>(m, "DistributionParams")
      .def(py::init([](int d, double a, double b) { return DistributionParams{d, a, b}; }), py::arg("d"),
           py::arg("a") = 1.0, py::arg("b") = 1.0)
      .def_readonly("d", &DistributionParams::d)
      .def("kappa", &DistributionParams::kappa)
      .def("pdf", [](const DistributionParams& p, double r) { return radial_pdf(p, r); }, py::arg("r"));

  py::class_<RadialDistribution>(m, "RadialDistribution")
      .def(py::init([](int d, int n_grid, double tail_bound) {
             return build_radial_distribution(DistributionParams{d, 1.0, 1.0}, n_grid, tail_bound);
           }),
           py::arg("d"), py::arg("n_grid") = kDefaultGridNodes, py::arg("tail_bound") = kDefaultTailBound)
      .def_property_readonly("d", [](const RadialDistribution& s) { return s.params().d; })
      .def_property_readonly("r_min", &RadialDistribution::r_min)
      .def_property_readonly("r_max", &RadialDistribution::r_max)
      .def_property_readonly("tail_mass", &RadialDistribution::tail_mass)
      .def_property_readonly("raw_mass", &RadialDistribution::raw_mass)
      .def("cdf", &RadialDistribution::cdf_at, py::arg("r"))
      .def("quantile", &RadialDistribution::quantile, py::arg("p"))
      .def("truncated_moment", &RadialDistribution::truncated_moment, py::arg("R"), py::arg("power"))
      .def(
          "sample",
          [](const RadialDistribution& s, int n, std::uint64_t seed) {
            Rng rng = make_stream(seed, 0);
            py::gil_scoped_release unlocked;
            return sample_inputs(s, rng, n);
          },
          py::arg("n"), py::arg("seed") = 0, "n x d array of inputs drawn from stream (seed, 0)");

  py::class_<NetworkState>(m, "NetworkState")
      .def(py::init(&make_state), py::arg("first_layer"), py::arg("w2"), py::arg("b2"))
      .def_readonly("d", &NetworkState::d)
      .def_property_readonly("first_layer", [](const NetworkState& s) { return s.first.weights; })
      .def_property_readonly("w2", [](const NetworkState& s) { return s.second.w; })
      .def_property_readonly("b2", [](const NetworkState& s) { return s.second.b; })
      .def_property_readonly("m1", [](const NetworkState& s) { return s.first.width(); })
      .def_property_readonly("m2", [](const NetworkState& s) { return s.second.width(); })
      .def("alpha", [](const NetworkState& s) { return alpha(s); })
      .def("F", [](const NetworkState& s, const Batch& X) { return forward_F_batch(s, X); }, py::arg("X"))
      .def(
          "f",
          [](const NetworkState& s, const Batch& X) {
            Vector out(X.rows());
            for (Eigen::Index k = 0; k < X.rows(); ++k) out[k] = forward_f(s, X.row(k).transpose());
            return out;
          },
          py::arg("X"))
      .def("loss", [](const NetworkState& s, const Batch& X) {
        const Estimate e = loss_estimate(s, X);
        return py::make_tuple(e.mean, e.se);
      }, py::arg("X"), "(mean, standard error) of 1/2 (f* - f)^2 over the rows of X")
      .def("save", [](const NetworkState& s, const std::string& path) { save_state(path, s); }, py::arg("path"));

  m.def("load_state", &load_state, py::arg("path"));
  m.def(
      "f_star",
      [](const Batch& X) {
        Vector out(X.rows());
        for (Eigen::Index k = 0; k < X.rows(); ++k) out[k] = f_star(X.row(k).transpose());
        return out;
      },
      py::arg("X"));

  // Runs training in memory from config-file style key/value pairs; no files
  // are written.
  m.def(
      "train",
      [](const std::map<std::string, std::string>& values) {
        ConfigValues v(values.begin(), values.end());
        if (!v.count("out_dir")) v["out_dir"] = "-";
        const RunConfig config = config_from_values(v);
        RunSummary summary;
        {
          py::gil_scoped_release unlocked;
          const auto dist = build_radial_distribution(config.train.dist_params, config.n_grid, config.tail_bound);
          summary = train(config.train, dist);
        }
        py::dict out;
        out["steps"] = summary.steps;
        out["initial_loss"] = summary.initial_loss;
        out["final_loss"] = summary.final_loss;
        out["reached_target"] = summary.reached_target;
        out["T11"] = event(summary.events.T11);
        out["T12"] = event(summary.events.T12);
        out["T1"] = event(summary.events.T1);
        out["T2"] = event(summary.events.T2);
        out["alpha"] = summary.last.alpha;
        out["w2_bar"] = summary.last.w2_bar;
        out["delta2"] = summary.last.delta2;
        out["state"] = summary.final_state;
        return out;
      },
      py::arg("config"));

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericAbort>(m, "NumericAbort", PyExc_ArithmeticError);
  m.attr("__version__") = "0.1.0";
}
