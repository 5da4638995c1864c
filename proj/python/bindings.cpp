#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <random>

#include "switchcert/certify.hpp"
#include "switchcert/checkpoint.hpp"
#include "switchcert/config.hpp"
#include "switchcert/cover.hpp"
#include "switchcert/dwell.hpp"
#include "switchcert/errors.hpp"
#include "switchcert/flow.hpp"
#include "switchcert/sim.hpp"
#include "switchcert/train.hpp"

namespace py = pybind11;
using namespace switchcert;

namespace {

py::object to_python(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

Eigen::MatrixXd stack(const std::vector<Vec>& rows, Eigen::Index cols) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return m;
}

SampleSet samples_for(const Config& cfg, double refine) {
  if (refine < 1.0) throw ValidationError("refine must be at least 1");
  return cover_product(cfg.system, cfg.certificate.eps_x / refine, cfg.certificate.eps_u / refine,
                       cfg.certificate.max_samples);
}

double dwell_exclusion(const Config& cfg) {
  return cfg.certificate.exclusion_radius + std::max(cfg.certificate.eps_x, cfg.certificate.eps_u);
}

py::dict cover(const Config& cfg, double refine) {
  const SampleSet s = samples_for(cfg, refine);
  py::dict d;
  d["states"] = stack(s.states, cfg.system.n);
  d["disturbances"] = stack(s.disturbances, cfg.system.r);
  d["eps"] = s.eps;
  return d;
}

py::dict train(const Config& cfg) {
  const SampleSet samples = samples_for(cfg, 1.0);
  TrainAllResult res;
  {
    py::gil_scoped_release release;
    res = train_all([cfg] { return make_flow(cfg); }, cfg, samples);
  }
  py::dict d;
  d["status"] = to_string(res.status);
  d["exit_code"] = exit_code(res.status);
  d["bundle"] = res.bundle;
  d["report"] = to_python(report_to_json(res.report, res.margins, cfg.system));
  py::list epochs;
  for (const TrainResult& r : res.runs) epochs.append(r.epochs_run);
  d["epochs"] = epochs;
  return d;
}

py::object verify(const Config& cfg, const CertificateBundle& bundle, int refine) {
  if (bundle.mode_count() != cfg.system.mode_count()) {
    throw ValidationError("bundle and config disagree on the number of modes");
  }
  const SampleSet samples = samples_for(cfg, static_cast<double>(refine));
  const ValidityMargins margins = compute_margins(cfg.system, bundle, cfg.certificate, samples);
  VerificationReport report;
  {
    py::gil_scoped_release release;
    auto flow = make_flow(cfg);
    report = verify_full(*flow, cfg.system, bundle, margins, samples, cfg.certificate.zero_tolerance,
                         cfg.certificate.lie_substeps);
    attach_dwell(report, bundle, uniform_grid(cfg.system.state_box, cfg.certificate.zeta_grid),
                 margins.exclusion_radius + margins.eps);
  }
  return to_python(report_to_json(report, margins, cfg.system));
}

py::dict simulate(const Config& cfg, const CertificateBundle& bundle, std::optional<double> tau_d,
                  std::optional<Vec> x0, std::optional<double> horizon, std::optional<double> dt) {
  SimulationConfig sc = cfg.simulation;
  if (tau_d) sc.tau_d = *tau_d;
  if (x0) sc.x0 = *x0;
  if (horizon) sc.horizon = *horizon;
  if (dt) sc.dt = *dt;

  VerificationReport dwell;
  attach_dwell(dwell, bundle, uniform_grid(cfg.system.state_box, cfg.certificate.zeta_grid),
               dwell_exclusion(cfg));
  auto flow = make_flow(cfg);
  const SwitchingSignal sw = gen_switching(sc.tau_d, sc.horizon, bundle.mode_count(), sc.switch_policy, sc.seed);
  const DisturbanceSignal dist = gen_disturbance(cfg.system.dist_box, sc.horizon, sc.disturbance_policy,
                                                 sc.disturbance_hold, sc.disturbance_value, sc.seed);
  Trajectory traj;
  {
    py::gil_scoped_release release;
    traj = simulate_closed_loop(*flow, cfg.system, bundle, sc.x0, sw, dist, sc.horizon, sc.dt);
  }

  py::dict d;
  d["t"] = Vec(Eigen::Map<const Vec>(traj.t.data(), static_cast<Eigen::Index>(traj.t.size())));
  d["x"] = stack(traj.x, cfg.system.n);
  d["u"] = stack(traj.u, cfg.system.m);
  d["w"] = stack(traj.w, cfg.system.r);
  std::vector<int> modes;
  for (std::size_t p : traj.mode) modes.push_back(cfg.system.modes[p]);
  d["mode"] = modes;
  d["v_active"] = traj.v_active;
  d["safe"] = traj.all_safe();
  d["aborted"] = traj.aborted;
  d["switches"] = traj.switches.size();
  if (dwell.zeta) {
    d["zeta"] = *dwell.zeta;
    d["tau_d_min"] = dwell.tau_d_min ? py::cast(*dwell.tau_d_min) : py::none();
    if (!dwell.tau_d_min || sc.tau_d > *dwell.tau_d_min) {
      const IssMonitor mon = monitor_iss_bound(traj, bundle, *dwell.zeta, dwell.kappa_min, sc.tau_d);
      d["iss_ok"] = mon.all_ok;
      d["iss_min_margin"] = mon.min_margin;
    }
  }
  return d;
}

}  // namespace

PYBIND11_MODULE(_switchcert, m) {
  m.doc() = "Neural control Lyapunov certificates for switched systems";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ResourceError>(m, "ResourceError", PyExc_MemoryError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<ProtocolError>(m, "ProtocolError", PyExc_RuntimeError);
  py::register_exception<TransportError>(m, "TransportError", PyExc_RuntimeError);

  py::class_<Config>(m, "Config")
      .def_property_readonly("hash", [](const Config& c) { return c.hash; })
      .def_property_readonly("modes", [](const Config& c) { return c.system.modes; })
      .def_property_readonly("state_dim", [](const Config& c) { return c.system.n; })
      .def_property_readonly("reference", [](const Config& c) { return c.system.reference; })
      .def_property_readonly("eps", [](const Config& c) {
        return std::max(c.certificate.eps_x, c.certificate.eps_u);
      })
      .def_property_readonly("shared_v", [](const Config& c) { return c.certificate.shared_v; })
      .def("__repr__", [](const Config& c) {
        return "<Config modes=" + std::to_string(c.system.mode_count()) + " hash=" + c.hash + ">";
      });

  m.def("load_config", &load_config, py::arg("path"));
  m.def("parse_config", &parse_config, py::arg("text"));

  py::class_<CertificateBundle>(m, "Bundle")
      .def_property_readonly("mode_count", &CertificateBundle::mode_count)
      .def_property_readonly("shared_v", [](const CertificateBundle& b) { return b.shared_v; })
      .def_property_readonly("config_hash", [](const CertificateBundle& b) { return b.config_hash; })
      .def("lyapunov", [](const CertificateBundle& b, std::size_t p, const Vec& x) {
        if (p >= b.mode_count()) throw py::index_error("mode index out of range");
        return b.lyapunov_value(p, x);
      }, py::arg("mode_index"), py::arg("x"))
      .def("control", [](const CertificateBundle& b, std::size_t p, const Vec& x, const Vec& w) {
        if (p >= b.mode_count()) throw py::index_error("mode index out of range");
        return b.controllers[p].control(x, w);
      }, py::arg("mode_index"), py::arg("x"), py::arg("w"))
      .def("to_json", [](const CertificateBundle& b) { return to_python(bundle_to_json(b)); })
      .def("save", [](const CertificateBundle& b, const std::string& path) { save_bundle(b, path); },
           py::arg("path"));

  m.def("initial_bundle", [](const Config& cfg) {
    std::mt19937_64 rng(cfg.training.seed);
    return initialize_bundle(cfg, rng);
  }, py::arg("config"));
  m.def("load_bundle", &load_bundle, py::arg("path"));

  m.def("cover", &cover, py::arg("config"), py::arg("refine") = 1.0,
        "State and disturbance covers as arrays (one sample per row).");
  m.def("train_all", &train, py::arg("config"),
        "Train every mode, verify the result and return status, bundle and report.");
  m.def("verify", &verify, py::arg("config"), py::arg("bundle"), py::arg("refine") = 1);
  m.def("simulate", &simulate, py::arg("config"), py::arg("bundle"), py::arg("tau_d") = py::none(),
        py::arg("x0") = py::none(), py::arg("horizon") = py::none(), py::arg("dt") = py::none());

  m.def("dwell_time_min", &dwell_time_min, py::arg("zeta"), py::arg("kappa"));
  m.def("contraction_factor", &contraction_factor, py::arg("zeta"), py::arg("kappa"), py::arg("tau_d"));
  m.def("iss_decay_rate", &iss_decay_rate, py::arg("zeta"), py::arg("kappa"), py::arg("tau_d"));
  m.def("iss_gain", &iss_gain, py::arg("zeta"), py::arg("kappa"), py::arg("tau_d"));
  m.def("content_hash", &content_hash, py::arg("data"));
}
