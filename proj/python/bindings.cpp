#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ddtime/config.hpp"
#include "ddtime/distill.hpp"
#include "ddtime/error.hpp"
#include "ddtime/eval.hpp"
#include "ddtime/expert_buffer.hpp"
#include "ddtime/losses.hpp"
#include "ddtime/metrics.hpp"
#include "ddtime/spectral.hpp"

namespace py = pybind11;
using namespace ddtime;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vector(const Array& a) {
  return {a.data(), a.data() + a.size()};
}

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-D array");
  Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.values().begin());
  return m;
}

SyntheticDataset to_synthetic(const Array& a, std::size_t t_in) {
  if (a.ndim() != 3) throw py::value_error("synthetic data must be [samples, n_vars, time]");
  const auto t = static_cast<std::size_t>(a.shape(2));
  if (t_in == 0 || t_in >= t) throw py::value_error("t_in must lie strictly inside the time axis");
  return SyntheticDataset(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)), t_in, t - t_in,
                          to_vector(a));
}

py::array_t<double> from_synthetic(const SyntheticDataset& s) {
  py::array_t<double> out({s.samples(), s.n_vars(), s.length()});
  std::copy(s.data().begin(), s.data().end(), out.mutable_data());
  return out;
}

py::array_t<double> from_vectors(const std::vector<std::vector<double>>& rows) {
  const std::size_t cols = rows.empty() ? 0 : rows.front().size();
  py::array_t<double> out({rows.size(), cols});
  double* dst = out.mutable_data();
  for (const auto& r : rows) dst = std::copy(r.begin(), r.end(), dst);
  return out;
}

py::dict breakdown_dict(const LossBreakdown& b) {
  py::dict d;
  d["l_param"] = b.l_param;
  d["l_val_tmp"] = b.l_val_tmp;
  d["l_val_fre"] = b.l_val_fre;
  d["l_is"] = b.l_is;
  d["alpha"] = b.alpha;
  d["lambda_is"] = b.lambda_is;
  d["total"] = b.total;
  return d;
}

py::dict load_buffer_py(const std::string& path) {
  const auto loaded = load_buffer(path);
  py::list trajectories;
  for (const auto& t : loaded.trajectories) {
    py::dict d;
    d["seed"] = t.seed;
    d["checkpoints"] = from_vectors(t.checkpoints);
    d["train_mse"] = t.train_mse;
    d["test_mse"] = t.test_mse;
    d["train_mae"] = t.train_mae;
    d["test_mae"] = t.test_mae;
    trajectories.append(d);
  }
  py::dict out;
  out["kind"] = loaded.spec.kind == ModelKind::mlp ? "mlp" : "channel_linear";
  out["t_in"] = loaded.spec.t_in;
  out["t_out"] = loaded.spec.t_out;
  out["n_vars"] = loaded.spec.n_vars;
  out["hidden_dims"] = loaded.spec.hidden_dims;
  out["trajectories"] = trajectories;
  return out;
}

py::dict evaluate_py(const Array& synthetic, const std::string& config_text) {
  const auto config = parse_config(config_text);
  const auto data = prepare_data(config);
  const auto spec = resolve_model(config, data);
  const auto s = to_synthetic(synthetic, spec.t_in);
  EvalReport report;
  {
    py::gil_scoped_release release;
    report = train_and_eval(s, data.test, spec, config.eval, data.train.size(), config.distill.isib());
  }
  py::list seeds;
  for (const auto& r : report.per_seed) {
    py::dict d;
    d["seed"] = r.seed;
    d["mse"] = r.mse;
    d["mae"] = r.mae;
    d["diverged"] = r.diverged;
    seeds.append(d);
  }
  py::dict out;
  out["per_seed"] = seeds;
  out["mse_mean"] = report.mse_mean;
  out["mse_std"] = report.mse_std;
  out["mae_mean"] = report.mae_mean;
  out["mae_std"] = report.mae_std;
  out["diverged"] = report.diverged;
  out["condensation_ratio"] = report.condensation_ratio;
  out["diversity"] = report.diversity;
  return out;
}

py::array_t<double> init_synthetic_py(const std::string& config_text, std::uint64_t seed) {
  const auto config = parse_config(config_text);
  const auto data = prepare_data(config);
  return from_synthetic(init_synthetic(data.train, config.distill.samples, seed));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Dataset distillation for time-series forecasting";

  py::register_exception<ddtime::Error>(m, "DdtimeError", PyExc_RuntimeError);

  m.def("mse", [](const Array& a, const Array& p) { return mse(to_vector(a), to_vector(p)); }, py::arg("actual"),
        py::arg("predicted"));
  m.def("mae", [](const Array& a, const Array& p) { return mae(to_vector(a), to_vector(p)); }, py::arg("actual"),
        py::arg("predicted"));

  m.def("dft", [](const Array& x) { return dft(to_vector(x)); }, py::arg("x"),
        "Unnormalized forward DFT of a real sequence.");
  m.def("spectral_l1", [](const Array& a, const Array& b) { return spectral_l1(to_vector(a), to_vector(b)); },
        py::arg("a"), py::arg("b"));

  m.def("value_temporal", [](const Array& s, const Array& t) { return value_temporal(to_matrix(s), to_matrix(t)); },
        py::arg("y_student"), py::arg("y_teacher"));
  m.def("value_frequency", [](const Array& s, const Array& t) { return value_frequency(to_matrix(s), to_matrix(t)); },
        py::arg("y_student"), py::arg("y_teacher"));
  m.def("value_combined",
        [](const Array& s, const Array& t, double alpha) { return value_combined(to_matrix(s), to_matrix(t), alpha); },
        py::arg("y_student"), py::arg("y_teacher"), py::arg("alpha") = 0.8);

  m.def("sample_probabilities",
        [](const Array& x, double tau, double eps) { return sample_probabilities(to_vector(x), {tau, eps, 0.5}); },
        py::arg("sample"), py::arg("tau") = 1.0, py::arg("epsilon") = 1e-8);
  m.def("sym_kl", [](const Array& p, const Array& q) { return sym_kl(to_vector(p), to_vector(q)); }, py::arg("p"),
        py::arg("q"));
  m.def("param_match_loss",
        [](const Array& s, const Array& a, const Array& b) {
          return param_match_loss(to_vector(s), to_vector(a), to_vector(b));
        },
        py::arg("theta_student"), py::arg("theta_start"), py::arg("theta_target"));
  m.def("total_loss",
        [](double p, double tmp, double fre, double is, double alpha, double lambda_is) {
          return breakdown_dict(total_loss(p, tmp, fre, is, alpha, lambda_is));
        },
        py::arg("l_param"), py::arg("l_val_tmp"), py::arg("l_val_fre"), py::arg("l_is"), py::arg("alpha") = 0.8,
        py::arg("lambda_is") = 0.6);

  m.def("isib_loss",
        [](const Array& synthetic, std::size_t t_in, double tau, double eps, double lambda_div) {
          const auto s = to_synthetic(synthetic, t_in);
          return isib_loss(s.sample_views(), {tau, eps, lambda_div});
        },
        py::arg("synthetic"), py::arg("t_in"), py::arg("tau") = 1.0, py::arg("epsilon") = 1e-8,
        py::arg("lambda_div") = 0.5);
  m.def("diversity",
        [](const Array& synthetic, std::size_t t_in, double tau, double eps) {
          return diversity(to_synthetic(synthetic, t_in), {tau, eps, 0.5});
        },
        py::arg("synthetic"), py::arg("t_in"), py::arg("tau") = 1.0, py::arg("epsilon") = 1e-8);

  m.def("load_synthetic",
        [](const std::string& path) {
          const auto s = load_synthetic(path);
          return py::make_tuple(from_synthetic(s), s.t_in());
        },
        py::arg("path"), "Returns (data [samples, n_vars, t_in + t_out], t_in).");
  m.def("save_synthetic",
        [](const Array& synthetic, std::size_t t_in, const std::string& path) {
          save_synthetic(to_synthetic(synthetic, t_in), path);
        },
        py::arg("synthetic"), py::arg("t_in"), py::arg("path"));
  m.def("load_buffer", &load_buffer_py, py::arg("path"));

  m.def("default_config", [] { return serialize_config(RunConfig{}); });
  m.def("normalize_config", [](const std::string& text) { return serialize_config(parse_config(text)); },
        py::arg("text"), "Parses a section.key=value config and prints it back in full.");
  m.def("init_synthetic", &init_synthetic_py, py::arg("config"), py::arg("seed"),
        "Random real windows from the configured training split.");
  m.def("evaluate", &evaluate_py, py::arg("synthetic"), py::arg("config"),
        "Trains fresh students on the synthetic set and scores them on the test split.");
}
