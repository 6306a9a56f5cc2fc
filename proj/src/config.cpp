#include "ddtime/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>
#include <string_view>

#include "ddtime/error.hpp"
#include "ddtime/rng.hpp"

namespace ddtime {
namespace {

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw Error(ErrorCode::config_error, "invalid value '" + std::string(value) + "' for " + std::string(key));
}

double parse_double(std::string_view key, std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) bad_value(key, s);
  return v;
}

std::uint64_t parse_u64(std::string_view key, std::string_view s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) bad_value(key, s);
  return v;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  if (trim(s).empty()) return out;
  std::size_t begin = 0;
  while (true) {
    const auto pos = s.find(',', begin);
    out.push_back(trim(s.substr(begin, pos == std::string_view::npos ? std::string_view::npos : pos - begin)));
    if (pos == std::string_view::npos) break;
    begin = pos + 1;
  }
  return out;
}

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view)> set;
};

template <typename Access>
Field real_field(std::string key, Access acc) {
  return {key, [acc](const RunConfig& c) { return format_double(acc(const_cast<RunConfig&>(c))); },
          [acc, key](RunConfig& c, std::string_view v) { acc(c) = parse_double(key, v); }};
}

template <typename Access>
Field count_field(std::string key, Access acc) {
  return {key, [acc](const RunConfig& c) { return std::to_string(acc(const_cast<RunConfig&>(c))); },
          [acc, key](RunConfig& c, std::string_view v) {
            acc(c) = static_cast<std::remove_reference_t<decltype(acc(c))>>(parse_u64(key, v));
          }};
}

template <typename Access, typename Enum>
Field enum_field(std::string key, Access acc, std::vector<std::pair<Enum, std::string>> names) {
  return {key,
          [acc, names](const RunConfig& c) {
            for (const auto& [e, n] : names) {
              if (e == acc(const_cast<RunConfig&>(c))) return n;
            }
            return std::string("?");
          },
          [acc, names, key](RunConfig& c, std::string_view v) {
            for (const auto& [e, n] : names) {
              if (n == v) {
                acc(c) = e;
                return;
              }
            }
            bad_value(key, v);
          }};
}

template <typename Access>
Field count_list_field(std::string key, Access acc) {
  return {key,
          [acc](const RunConfig& c) {
            std::string out;
            for (auto x : acc(const_cast<RunConfig&>(c))) {
              if (!out.empty()) out += ',';
              out += std::to_string(x);
            }
            return out;
          },
          [acc, key](RunConfig& c, std::string_view v) {
            auto& list = acc(c);
            list.clear();
            for (auto item : split_list(v)) {
              list.push_back(static_cast<typename std::remove_reference_t<decltype(list)>::value_type>(parse_u64(key, item)));
            }
          }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> all = [] {
    std::vector<Field> f;
    f.push_back({"data.path", [](const RunConfig& c) { return c.data.path; },
                 [](RunConfig& c, std::string_view v) { c.data.path = std::string(v); }});
    f.push_back({"data.delimiter",
                 [](const RunConfig& c) {
                   return std::string(c.data.format.delimiter == 0 ? "auto" : c.data.format.delimiter == '\t' ? "tab" : "comma");
                 },
                 [](RunConfig& c, std::string_view v) {
                   if (v == "auto") c.data.format.delimiter = 0;
                   else if (v == "tab") c.data.format.delimiter = '\t';
                   else if (v == "comma") c.data.format.delimiter = ',';
                   else bad_value("data.delimiter", v);
                 }});
    f.push_back(enum_field("data.header", [](RunConfig& c) -> HeaderMode& { return c.data.format.header; },
                           std::vector<std::pair<HeaderMode, std::string>>{
                               {HeaderMode::detect, "detect"}, {HeaderMode::present, "present"}, {HeaderMode::absent, "absent"}}));
    f.push_back(real_field("data.train_ratio", [](RunConfig& c) -> double& { return c.data.split[0]; }));
    f.push_back(real_field("data.val_ratio", [](RunConfig& c) -> double& { return c.data.split[1]; }));
    f.push_back(real_field("data.test_ratio", [](RunConfig& c) -> double& { return c.data.split[2]; }));
    f.push_back(enum_field("data.standardize", [](RunConfig& c) -> StandardizeScope& { return c.data.scope; },
                           std::vector<std::pair<StandardizeScope, std::string>>{{StandardizeScope::train, "train"},
                                                                                 {StandardizeScope::global, "global"}}));
    f.push_back(real_field("data.epsilon", [](RunConfig& c) -> double& { return c.data.epsilon; }));
    f.push_back(count_field("data.t_in", [](RunConfig& c) -> std::size_t& { return c.data.t_in; }));
    f.push_back(count_field("data.t_out", [](RunConfig& c) -> std::size_t& { return c.data.t_out; }));
    f.push_back(count_field("data.stride", [](RunConfig& c) -> std::size_t& { return c.data.stride; }));
    f.push_back(count_field("data.bench_vars", [](RunConfig& c) -> std::size_t& { return c.data.bench_vars; }));
    f.push_back(count_field("data.bench_length", [](RunConfig& c) -> std::size_t& { return c.data.bench_length; }));
    f.push_back(real_field("data.bench_noise", [](RunConfig& c) -> double& { return c.data.bench_noise; }));
    f.push_back(count_field("data.bench_seed", [](RunConfig& c) -> std::uint64_t& { return c.data.bench_seed; }));

    f.push_back(enum_field("model.kind", [](RunConfig& c) -> ModelKind& { return c.model.kind; },
                           std::vector<std::pair<ModelKind, std::string>>{{ModelKind::channel_linear, "channel_linear"},
                                                                          {ModelKind::mlp, "mlp"}}));
    f.push_back(count_list_field("model.hidden_dims", [](RunConfig& c) -> std::vector<std::size_t>& { return c.model.hidden_dims; }));

    f.push_back(count_field("teachers.trajectories", [](RunConfig& c) -> std::size_t& { return c.teachers.trajectories; }));
    f.push_back(count_field("teachers.group_size", [](RunConfig& c) -> std::size_t& { return c.teachers.group_size; }));
    f.push_back(count_field("teachers.epochs", [](RunConfig& c) -> std::size_t& { return c.teachers.train.epochs; }));
    f.push_back(count_field("teachers.batch_size", [](RunConfig& c) -> std::size_t& { return c.teachers.train.batch_size; }));
    f.push_back(real_field("teachers.lr", [](RunConfig& c) -> double& { return c.teachers.train.lr; }));
    f.push_back(real_field("teachers.momentum", [](RunConfig& c) -> double& { return c.teachers.train.momentum; }));

    f.push_back(count_field("distill.samples", [](RunConfig& c) -> std::size_t& { return c.distill.samples; }));
    f.push_back(real_field("distill.alpha", [](RunConfig& c) -> double& { return c.distill.alpha; }));
    f.push_back(real_field("distill.lambda_is", [](RunConfig& c) -> double& { return c.distill.lambda_is; }));
    f.push_back(real_field("distill.lambda_div", [](RunConfig& c) -> double& { return c.distill.lambda_div; }));
    f.push_back(real_field("distill.tau", [](RunConfig& c) -> double& { return c.distill.tau; }));
    f.push_back(real_field("distill.isib_epsilon", [](RunConfig& c) -> double& { return c.distill.isib_epsilon; }));
    f.push_back(real_field("distill.synthetic_lr", [](RunConfig& c) -> double& { return c.distill.synthetic_lr; }));
    f.push_back(real_field("distill.student_lr", [](RunConfig& c) -> double& { return c.distill.student_lr; }));
    f.push_back(count_field("distill.unroll_steps", [](RunConfig& c) -> std::size_t& { return c.distill.unroll_steps; }));
    f.push_back(count_field("distill.segment_span", [](RunConfig& c) -> std::size_t& { return c.distill.segment_span; }));
    f.push_back(count_field("distill.interval", [](RunConfig& c) -> std::size_t& { return c.distill.interval; }));
    f.push_back(real_field("distill.cond_coef", [](RunConfig& c) -> double& { return c.distill.cond_coef; }));
    f.push_back(count_field("distill.iterations", [](RunConfig& c) -> std::size_t& { return c.distill.iterations; }));
    f.push_back(count_field("distill.eval_every", [](RunConfig& c) -> std::size_t& { return c.distill.eval_every; }));
    f.push_back(enum_field("distill.value_source", [](RunConfig& c) -> ValueInputSource& { return c.distill.value_source; },
                           std::vector<std::pair<ValueInputSource, std::string>>{{ValueInputSource::synthetic, "synthetic"},
                                                                                 {ValueInputSource::real, "real"}}));
    f.push_back(count_field("distill.real_batch_size", [](RunConfig& c) -> std::size_t& { return c.distill.real_batch_size; }));
    f.push_back(enum_field("distill.value_teacher", [](RunConfig& c) -> ValueTeacher& { return c.distill.value_teacher; },
                           std::vector<std::pair<ValueTeacher, std::string>>{{ValueTeacher::segment_target, "segment_target"},
                                                                             {ValueTeacher::expert_final, "expert_final"}}));
    f.push_back(enum_field("distill.normalization", [](RunConfig& c) -> ParamNormalization& { return c.distill.normalization; },
                           std::vector<std::pair<ParamNormalization, std::string>>{{ParamNormalization::segment, "segment"},
                                                                                   {ParamNormalization::global, "global"}}));
    f.push_back(real_field("distill.max_grad_norm", [](RunConfig& c) -> double& { return c.distill.max_grad_norm; }));
    f.push_back(count_field("distill.max_resamples", [](RunConfig& c) -> std::size_t& { return c.distill.max_resamples; }));
    f.push_back(real_field("distill.adam_beta1", [](RunConfig& c) -> double& { return c.distill.adam.beta1; }));
    f.push_back(real_field("distill.adam_beta2", [](RunConfig& c) -> double& { return c.distill.adam.beta2; }));
    f.push_back(real_field("distill.adam_eps", [](RunConfig& c) -> double& { return c.distill.adam.eps; }));

    f.push_back(count_field("eval.steps", [](RunConfig& c) -> std::size_t& { return c.eval.steps; }));
    f.push_back(real_field("eval.lr", [](RunConfig& c) -> double& { return c.eval.lr; }));
    f.push_back(enum_field("eval.optimizer", [](RunConfig& c) -> EvalOptimizer& { return c.eval.optimizer; },
                           std::vector<std::pair<EvalOptimizer, std::string>>{{EvalOptimizer::gd, "gd"},
                                                                              {EvalOptimizer::sgd_momentum, "sgd_momentum"}}));
    f.push_back(real_field("eval.momentum", [](RunConfig& c) -> double& { return c.eval.momentum; }));
    f.push_back(count_list_field("eval.seeds", [](RunConfig& c) -> std::vector<std::uint64_t>& { return c.eval.seeds; }));

    f.push_back({"run.out_dir", [](const RunConfig& c) { return c.out_dir; },
                 [](RunConfig& c, std::string_view v) { c.out_dir = std::string(v); }});
    f.push_back(count_field("run.seed", [](RunConfig& c) -> std::uint64_t& { return c.seed; }));
    f.push_back(count_field("run.threads", [](RunConfig& c) -> std::size_t& { return c.threads; }));
    return f;
  }();
  return all;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig config;
  std::istringstream in(text);
  std::set<std::string> seen;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::config_error, "line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key(trim(view.substr(0, eq)));
    const auto value = trim(view.substr(eq + 1));
    const auto& all = fields();
    const auto it = std::find_if(all.begin(), all.end(), [&](const Field& f) { return f.key == key; });
    if (it == all.end()) throw Error(ErrorCode::config_error, "line " + std::to_string(line_no) + ": unknown key " + key);
    if (!seen.insert(key).second) throw Error(ErrorCode::config_error, "duplicate key " + key);
    it->set(config, value);
  }
  config.eval.threads = config.threads;
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::missing_file, path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += f.key + "=" + f.get(config) + "\n";
  return out;
}

bool operator==(const RunConfig& a, const RunConfig& b) { return serialize_config(a) == serialize_config(b); }

RawSeries noisy_sinusoids(std::size_t n_vars, std::size_t length, double noise, std::uint64_t seed) {
  if (n_vars == 0 || length == 0) throw Error(ErrorCode::invalid_argument, "benchmark needs variables and length");
  Rng rng(seed);
  Matrix values(n_vars, length);
  std::vector<std::string> names;
  for (std::size_t v = 0; v < n_vars; ++v) {
    const double period = 20.0 + 9.5 * static_cast<double>(v);
    const double phase = uniform_real(rng, 0.0, 2.0 * std::numbers::pi);
    const double harmonic = uniform_real(rng, 0.2, 0.5);
    for (std::size_t t = 0; t < length; ++t) {
      const double arg = 2.0 * std::numbers::pi * static_cast<double>(t) / period + phase;
      // Box-Muller keeps the noise stream library-independent.
      const double u1 = 1.0 - uniform_real(rng, 0.0, 1.0);
      const double u2 = uniform_real(rng, 0.0, 1.0);
      const double gauss = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
      values(v, t) = std::sin(arg) + harmonic * std::sin(2.0 * arg) + noise * gauss;
    }
    names.push_back("sin" + std::to_string(v));
  }
  return {std::move(values), std::move(names), "<sinusoid benchmark>"};
}

PreparedData prepare_data(const RawSeries& series, const DataConfig& data) {
  const auto parts = split(series, data.split);
  const auto stats = fit_standardization(data.scope == StandardizeScope::train ? parts.train : series, data.epsilon);
  PreparedData out;
  out.stats = stats;
  out.n_vars = series.n_vars();
  out.train = slide_windows(apply_standardization(parts.train, stats), data.t_in, data.t_out, data.stride);
  out.val = slide_windows(apply_standardization(parts.val, stats), data.t_in, data.t_out, data.stride);
  out.test = slide_windows(apply_standardization(parts.test, stats), data.t_in, data.t_out, data.stride);
  return out;
}

PreparedData prepare_data(const RunConfig& config) {
  const auto& d = config.data;
  const RawSeries series = d.path.empty() ? noisy_sinusoids(d.bench_vars, d.bench_length, d.bench_noise, d.bench_seed)
                                          : load_series(d.path, d.format);
  return prepare_data(series, d);
}

ModelSpec resolve_model(const RunConfig& config, const PreparedData& data) {
  ModelSpec spec = config.model;
  spec.t_in = config.data.t_in;
  spec.t_out = config.data.t_out;
  spec.n_vars = data.n_vars;
  validate(spec);
  return spec;
}

}  // namespace ddtime
