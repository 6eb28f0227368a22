#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "sigprop/apjn_measurement.hpp"
#include "sigprop/apjn_theory.hpp"
#include "sigprop/asymptotics.hpp"
#include "sigprop/errors.hpp"
#include "sigprop/harness.hpp"

namespace py = pybind11;
using namespace sigprop;

namespace {

Nonlinearity make_phi(const std::string& norm, double alpha) {
  Nonlinearity phi{parse_norm_kind(norm), alpha};
  phi.validate();
  return phi;
}

Eigen::VectorXd curve_values(const ApjnCurve& c) {
  Eigen::VectorXd v(c.log_values.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = std::exp(c.log_values[i]);
  return v;
}

py::dict jk_arrays(const std::vector<JKState>& s) {
  Eigen::VectorXd j(s.size()), k(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    j(i) = s[i].j();
    k(i) = s[i].k_over_j;
  }
  py::dict d;
  d["j"] = j;
  d["k_over_j"] = k;
  return d;
}

EstimatorOptions estimator(int n_probes, int n_seeds, const std::string& probe, int threads) {
  ProbeKind kind = ProbeKind::Gaussian;
  if (probe == "rademacher") {
    kind = ProbeKind::Rademacher;
  } else if (probe != "gaussian") {
    throw DomainError("probe must be 'gaussian' or 'rademacher'");
  }
  return {n_probes, n_seeds, kind, threads};
}

py::dict estimate_dict(const ApjnEstimate& e) {
  py::dict d;
  d["l_lo"] = e.l_lo;
  d["l_hi"] = e.l_hi;
  d["value"] = e.value;
  d["std_error"] = e.std_error;
  d["per_seed"] = e.per_seed;
  return d;
}

ExperimentConfig config_from(const std::string& text, const std::string& out) {
  ExperimentConfig c;
  apply_config_text(c, text, "<python>");
  if (!out.empty()) c.out = out;
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Signal propagation theory and simulator for pre-normalized transformers";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<QuadratureError>(m, "QuadratureError", base.ptr());
  py::register_exception<UnsupportedRegime>(m, "UnsupportedRegime", base.ptr());
  py::register_exception<NoInteriorRoot>(m, "NoInteriorRoot", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

  // Kernels
  m.def("kappa", &kappa, py::arg("rho"));
  m.def("hat_kappa", &hat_kappa, py::arg("rho"));
  m.def("kappa_prime", &kappa_prime, py::arg("rho"));
  m.def(
      "propagate_phi",
      [](double q, double p, const std::string& norm, double alpha) {
        const CovPair r = propagate_phi(CovPair::make(q, p), make_phi(norm, alpha));
        return py::make_tuple(r.q, r.p);
      },
      py::arg("q"), py::arg("p"), py::arg("norm") = "layernorm", py::arg("alpha") = 1.0);
  m.def(
      "propagate_phi_prime",
      [](double q, double p, const std::string& norm, double alpha) {
        const CovPair r = propagate_phi_prime(CovPair::make(q, p), make_phi(norm, alpha));
        return py::make_tuple(r.q, r.p);
      },
      py::arg("q"), py::arg("p"), py::arg("norm") = "layernorm", py::arg("alpha") = 1.0);

  py::class_<ModelHyper>(m, "ModelHyper")
      .def(py::init([](double sigma_ov, double sigma_21, const std::string& norm, double alpha,
                       std::optional<int> context_n) {
             ModelHyper h{sigma_ov, sigma_21, context_n, make_phi(norm, alpha)};
             h.validate();
             return h;
           }),
           py::arg("sigma_ov"), py::arg("sigma_21"), py::arg("norm") = "layernorm",
           py::arg("alpha") = 1.0, py::arg("context_n") = std::nullopt)
      .def_readonly("sigma_ov", &ModelHyper::sigma_ov)
      .def_readonly("sigma_21", &ModelHyper::sigma_21)
      .def_readonly("context_n", &ModelHyper::context_n)
      .def_property_readonly("norm", [](const ModelHyper& h) { return to_string(h.phi.kind); })
      .def_property_readonly("alpha", [](const ModelHyper& h) { return h.phi.alpha; });

  // Covariance dynamics and theoretical APJN
  py::class_<CovTrajectory>(m, "CovTrajectory")
      .def_property_readonly("num_blocks", &CovTrajectory::num_blocks)
      .def_property_readonly("q", [](const CovTrajectory& t) {
        Eigen::VectorXd v(t.num_layers() + 1);
        for (int l = 0; l <= t.num_layers(); ++l) v(l) = t.at_layer(l).q;
        return v;
      })
      .def_property_readonly("p", [](const CovTrajectory& t) {
        Eigen::VectorXd v(t.num_layers() + 1);
        for (int l = 0; l <= t.num_layers(); ++l) v(l) = t.at_layer(l).p;
        return v;
      });
  m.def(
      "run_trajectory",
      [](double q0, double p0, const ModelHyper& h, int blocks) {
        return run_trajectory(CovPair::make(q0, p0), h, blocks);
      },
      py::arg("q0"), py::arg("p0"), py::arg("hyper"), py::arg("blocks"));
  m.def(
      "forward_apjn",
      [](const CovTrajectory& t, const ModelHyper& h) { return curve_values(forward_simplified(t, h)); },
      py::arg("trajectory"), py::arg("hyper"), "J^{l,0} for l = 0..L");
  m.def(
      "backward_apjn",
      [](const CovTrajectory& t, const ModelHyper& h) { return curve_values(backward_simplified(t, h)); },
      py::arg("trajectory"), py::arg("hyper"), "J^{L,l} for l = 0..L");
  m.def(
      "forward_extended",
      [](const CovTrajectory& t, const ModelHyper& h) { return jk_arrays(forward_extended(t, h)); },
      py::arg("trajectory"), py::arg("hyper"));
  m.def(
      "backward_extended",
      [](const CovTrajectory& t, const ModelHyper& h, bool swap) {
        return jk_arrays(backward_extended(t, h, {swap}));
      },
      py::arg("trajectory"), py::arg("hyper"), py::arg("swap_coupling") = false);

  // Asymptotics
  py::class_<FixedPointReport>(m, "FixedPointReport")
      .def_readonly("c_star", &FixedPointReport::c_star)
      .def_readonly("p_tilde_star", &FixedPointReport::p_tilde_star)
      .def_readonly("g_prime", &FixedPointReport::g_prime)
      .def_readonly("mu", &FixedPointReport::mu)
      .def_readonly("stable", &FixedPointReport::stable);
  py::class_<AsymptoticLaw>(m, "AsymptoticLaw")
      .def_property_readonly("regime", [](const AsymptoticLaw& a) { return to_string(a.regime); })
      .def_readonly("zeta", &AsymptoticLaw::zeta)
      .def_readonly("lambda_inv", &AsymptoticLaw::lambda_inv)
      .def_readonly("q_slope", &AsymptoticLaw::q_slope)
      .def_readonly("p_slope", &AsymptoticLaw::p_slope);
  m.def("solve_c_star", &solve_c_star, py::arg("hyper"));
  m.def("g_of_c", &g_of_c, py::arg("c"), py::arg("hyper"));
  m.def("asymptotic_law", py::overload_cast<const ModelHyper&>(&asymptotic_law), py::arg("hyper"));
  m.def(
      "asymptotic_curve",
      [](const AsymptoticLaw& law, const std::vector<double>& blocks, double total,
         const std::string& direction, std::optional<std::pair<double, double>> anchor) {
        const Direction dir = direction == "forward" ? Direction::Forward : Direction::Backward;
        if (direction != "forward" && direction != "backward") {
          throw DomainError("direction must be 'forward' or 'backward'");
        }
        std::optional<Anchor> a;
        if (anchor) a = Anchor{anchor->first, anchor->second};
        Eigen::VectorXd out(blocks.size());
        for (std::size_t i = 0; i < blocks.size(); ++i) out(i) = asymptotic_curve(law, blocks[i], total, dir, a);
        return out;
      },
      py::arg("law"), py::arg("blocks"), py::arg("total_blocks"), py::arg("direction") = "backward",
      py::arg("anchor") = std::nullopt);

  // Simulator
  py::class_<TransformerConfig>(m, "TransformerConfig")
      .def(py::init<>())
      .def_readwrite("d", &TransformerConfig::d)
      .def_readwrite("n", &TransformerConfig::n)
      .def_readwrite("blocks", &TransformerConfig::blocks)
      .def_readwrite("heads", &TransformerConfig::heads)
      .def_readwrite("sigma_o", &TransformerConfig::sigma_o)
      .def_readwrite("sigma_v", &TransformerConfig::sigma_v)
      .def_readwrite("sigma_q", &TransformerConfig::sigma_q)
      .def_readwrite("sigma_k", &TransformerConfig::sigma_k)
      .def_readwrite("sigma_1", &TransformerConfig::sigma_1)
      .def_readwrite("sigma_2", &TransformerConfig::sigma_2)
      .def_readwrite("final_norm", &TransformerConfig::final_norm)
      .def_readwrite("seed", &TransformerConfig::seed)
      .def_readwrite("mean_subtracting_ln", &TransformerConfig::mean_subtracting_ln)
      .def_property(
          "attention", [](const TransformerConfig& c) { return std::string(to_string(c.attention)); },
          [](TransformerConfig& c, const std::string& s) { c.attention = parse_attention_mode(s); })
      .def("set_norm", [](TransformerConfig& c, const std::string& norm,
                          double alpha) { c.norm = make_phi(norm, alpha); },
           py::arg("norm"), py::arg("alpha") = 1.0)
      .def_property_readonly("norm", [](const TransformerConfig& c) { return to_string(c.norm.kind); })
      .def_property_readonly("output_state", &TransformerConfig::output_state)
      .def("hyper", &TransformerConfig::hyper, py::arg("context_n") = std::nullopt);
  m.def(
      "permutation_symmetric_tokens",
      [](double q0, double p0, int n, int d, std::uint64_t seed) {
        return generate_permutation_symmetric(q0, p0, n, d, seed).tokens;
      },
      py::arg("q0"), py::arg("p0"), py::arg("n"), py::arg("d"), py::arg("seed") = 0);
  m.def(
      "forward",
      [](const TransformerConfig& c, const TokenMatrix& tokens) {
        const ActivationTrace t = forward(init_weights(c), tokens, c);
        std::vector<TokenMatrix> states;
        for (int l = 0; l <= c.output_state(); ++l) states.push_back(t.state(l));
        return states;
      },
      py::arg("config"), py::arg("tokens"), "Activations at every state 0..output_state");
  m.def(
      "hutchinson_apjn",
      [](const TransformerConfig& c, const TokenMatrix& tokens, int l_lo, int l_hi, int n_probes,
         int n_seeds, const std::string& probe, int threads) {
        const EstimatorOptions opt = estimator(n_probes, n_seeds, probe, threads);
        ApjnEstimate e;
        {
          py::gil_scoped_release release;
          e = hutchinson_apjn(c, fixed_tokens(tokens), l_lo, l_hi, opt);
        }
        return estimate_dict(e);
      },
      py::arg("config"), py::arg("tokens"), py::arg("l_lo"), py::arg("l_hi"), py::arg("n_probes") = 10,
      py::arg("n_seeds") = 4, py::arg("probe") = "gaussian", py::arg("threads") = 1);
  m.def(
      "backward_profile",
      [](const TransformerConfig& c, const TokenMatrix& tokens, int n_probes, int n_seeds,
         const std::string& probe, int threads) {
        const EstimatorOptions opt = estimator(n_probes, n_seeds, probe, threads);
        std::vector<ApjnEstimate> prof;
        {
          py::gil_scoped_release release;
          prof = hutchinson_backward_profile(c, fixed_tokens(tokens), c.output_state(), opt);
        }
        Eigen::VectorXd value(prof.size()), se(prof.size());
        for (std::size_t i = 0; i < prof.size(); ++i) {
          value(i) = prof[i].value;
          se(i) = prof[i].std_error;
        }
        py::dict d;
        d["value"] = value;
        d["std_error"] = se;
        return d;
      },
      py::arg("config"), py::arg("tokens"), py::arg("n_probes") = 10, py::arg("n_seeds") = 4,
      py::arg("probe") = "gaussian", py::arg("threads") = 1,
      "Measured J^{out,l} for every state l = 0..output_state");
  m.def("gmfe", &gmfe, py::arg("theory"), py::arg("measured"));

  // Experiment harness
  m.def(
      "run",
      [](const std::string& config_text, const std::string& out) {
        const ExperimentConfig c = config_from(config_text, out);
        py::gil_scoped_release release;
        return run(c);
      },
      py::arg("config_text"), py::arg("out") = "",
      "Run an experiment described by `key = value` lines");
  m.def(
      "emit_figure_data",
      [](const std::string& tag, const std::string& config_text, const std::string& out) {
        const ExperimentConfig c = config_from(config_text, out);
        py::gil_scoped_release release;
        return emit_figure_data(tag, c);
      },
      py::arg("tag"), py::arg("config_text") = "", py::arg("out") = "");
  m.def("figure_tags", &figure_tags);
  py::class_<RunResult>(m, "RunResult")
      .def_readonly("exit_code", &RunResult::exit_code)
      .def_property_readonly("files",
                             [](const RunResult& r) {
                               std::vector<std::string> f;
                               for (const auto& p : r.files) f.push_back(p.string());
                               return f;
                             })
      .def_readonly("message", &RunResult::message);
}
