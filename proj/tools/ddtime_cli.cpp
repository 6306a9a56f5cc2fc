// ddtime: teacher collection, distillation, evaluation and diversity
// measurement for time-series dataset distillation.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "ddtime/config.hpp"
#include "ddtime/distill.hpp"
#include "ddtime/error.hpp"
#include "ddtime/eval.hpp"
#include "ddtime/expert_buffer.hpp"
#include "ddtime/rng.hpp"

namespace fs = std::filesystem;
using namespace ddtime;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<std::string> out_dir;
};

/// Deletes everything registered unless `commit()` is called.
class OutputGuard {
 public:
  void track(const fs::path& p) { files_.push_back(p); }
  void commit() { files_.clear(); }
  ~OutputGuard() {
    std::error_code ec;
    for (const auto& f : files_) fs::remove(f, ec);
  }

 private:
  std::vector<fs::path> files_;
};

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("ddtime");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("DDTIME_LOG_LEVEL")) {
    const std::string level(env);
    if (level == "error") spdlog::set_level(spdlog::level::err);
    else if (level == "warn") spdlog::set_level(spdlog::level::warn);
    else if (level == "info") spdlog::set_level(spdlog::level::info);
    else if (level == "debug") spdlog::set_level(spdlog::level::debug);
    else spdlog::warn("ignoring DDTIME_LOG_LEVEL={} (expected error, warn, info or debug)", level);
  }
}

RunConfig resolve_config(const GlobalOptions& opts) {
  RunConfig config = opts.config_path.empty() ? RunConfig{} : load_config(opts.config_path);
  if (opts.seed) config.seed = *opts.seed;
  if (opts.threads) config.threads = std::max<std::size_t>(1, *opts.threads);
  if (opts.out_dir) config.out_dir = *opts.out_dir;
  config.eval.threads = config.threads;
  return config;
}

fs::path ensure_writable_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::io_error, "cannot create " + dir.string() + ": " + ec.message());
  const auto probe = dir / ".ddtime_write_probe";
  {
    std::ofstream out(probe);
    if (!out) throw Error(ErrorCode::io_error, "permission denied: cannot write into " + dir.string());
  }
  fs::remove(probe, ec);
  return dir;
}

void write_text(const fs::path& path, const std::string& text, OutputGuard& guard) {
  guard.track(path);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::io_error, "failed writing " + path.string());
}

int cmd_teachers(const RunConfig& config) {
  const auto data = prepare_data(config);
  const auto spec = resolve_model(config, data);
  const fs::path out = ensure_writable_dir(config.out_dir);
  const fs::path buffer_dir = ensure_writable_dir(out / "buffers");
  OutputGuard guard;

  const std::size_t n = config.teachers.trajectories;
  if (n == 0) throw Error(ErrorCode::config_error, "teachers.trajectories must be at least 1");
  spdlog::info("training {} teachers ({} epochs, {} train windows)", n, config.teachers.train.epochs, data.train.size());

  std::vector<ExpertTrajectory> experts(n);
  const std::uint64_t base = derive_seed(config.seed, seed_stream::teachers);
  const std::size_t threads = std::min(config.threads, n);
  std::vector<std::exception_ptr> errors(threads);
  auto work = [&](std::size_t w) {
    try {
      for (std::size_t k = w; k < n; k += threads) {
        experts[k] = train_teacher(data.train, &data.test, spec, config.teachers.train, derive_seed(base, k));
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (threads <= 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  for (std::size_t k = 0; k * config.teachers.group_size < n; ++k) {
    const auto p = buffer_dir / fmt::format("replay_buffer_{}.ddtb", k);
    guard.track(p);
    guard.track(fs::path(p).replace_extension(".json"));
  }
  const auto files = save_buffers(experts, spec, buffer_dir, config.teachers.group_size);

  std::string metrics = "teacher,epoch,train_mse,test_mse,train_mae,test_mae\n";
  for (std::size_t k = 0; k < n; ++k) {
    const auto& t = experts[k];
    for (std::size_t e = 0; e < t.epochs(); ++e) {
      metrics += fmt::format("{},{},{:.17g},{:.17g},{:.17g},{:.17g}\n", k, e + 1, t.train_mse[e], t.test_mse[e],
                             t.train_mae[e], t.test_mae[e]);
    }
  }
  write_text(out / "teacher_metrics.csv", metrics, guard);
  write_text(out / "config.txt", serialize_config(config), guard);
  guard.commit();
  spdlog::info("wrote {} buffer files to {}", files.size(), buffer_dir.string());
  std::cout << files.size() << " buffer files\n";
  return 0;
}

int cmd_distill(const RunConfig& config) {
  const auto data = prepare_data(config);
  const auto spec = resolve_model(config, data);
  const fs::path out = ensure_writable_dir(config.out_dir);
  const auto buffers = load_buffers(out / "buffers");
  if (!(buffers.spec == spec)) {
    throw Error(ErrorCode::config_error, "buffer model spec does not match the configured model");
  }
  OutputGuard guard;
  spdlog::info("distilling {} samples over {} iterations against {} experts", config.distill.samples,
               config.distill.iterations, buffers.trajectories.size());
  const auto result =
      run_distillation(config.distill, spec, buffers.trajectories, data.train, data.val, config.eval, config.seed);

  const auto synth_path = out / "synthetic.ddts";
  guard.track(synth_path);
  save_synthetic(result.best, synth_path);
  write_text(out / "distill_log.csv", log_to_csv(result.log), guard);
  guard.commit();
  if (config.distill.iterations > 0) {
    spdlog::info("best validation MSE {:.6f} at iteration {}", result.best_val_mse, result.best_iteration);
  }
  std::cout << synth_path.string() << '\n';
  return 0;
}

void check_compatible(const SyntheticDataset& s, const ModelSpec& spec) {
  if (s.n_vars() != spec.n_vars || s.t_in() != spec.t_in || s.t_out() != spec.t_out) {
    throw Error(ErrorCode::shape_mismatch,
                fmt::format("synthetic file has N={} t_in={} t_out={}, config expects N={} t_in={} t_out={}", s.n_vars(),
                            s.t_in(), s.t_out(), spec.n_vars, spec.t_in, spec.t_out));
  }
}

int cmd_eval(const RunConfig& config, const std::string& synthetic_path) {
  const auto data = prepare_data(config);
  const auto spec = resolve_model(config, data);
  const fs::path out = ensure_writable_dir(config.out_dir);
  const fs::path path = synthetic_path.empty() ? out / "synthetic.ddts" : fs::path(synthetic_path);
  const auto synthetic = load_synthetic(path);
  check_compatible(synthetic, spec);
  const auto report = train_and_eval(synthetic, data.test, spec, config.eval, data.train.size(), config.distill.isib());
  OutputGuard guard;
  write_text(out / "eval_report.csv", report_to_csv(report), guard);
  write_text(out / "eval_summary.txt", report_summary(report), guard);
  guard.commit();
  std::cout << report_summary(report);
  return 0;
}

int cmd_diversity(const RunConfig& config, const std::string& synthetic_path, std::optional<double> tau) {
  const fs::path out = config.out_dir;
  const fs::path path = synthetic_path.empty() ? out / "synthetic.ddts" : fs::path(synthetic_path);
  const auto synthetic = load_synthetic(path);
  auto isib = config.distill.isib();
  if (tau) isib.tau = *tau;
  const double value = diversity(synthetic, isib);
  const auto text = fmt::format("{:.17g}\n", value);
  ensure_writable_dir(out);
  OutputGuard guard;
  write_text(out / "diversity.txt", text, guard);
  guard.commit();
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"ddtime: distill tiny synthetic training sets for time-series forecasting"};
  app.require_subcommand(1);

  GlobalOptions opts;
  app.add_option("--config", opts.config_path, "Run configuration (section.key=value lines)");
  app.add_option("--seed", opts.seed, "Master seed (overrides run.seed)");
  app.add_option("--threads", opts.threads, "Worker threads; 1 guarantees bit-identical artifacts");
  app.add_option("--out", opts.out_dir, "Output directory (overrides run.out_dir)");

  auto* teachers = app.add_subcommand("teachers", "Train teachers and write DDTB replay buffers");
  auto* distill = app.add_subcommand("distill", "Distill a synthetic dataset from the replay buffers");
  auto* eval = app.add_subcommand("eval", "Train fresh students on a synthetic dataset and report test metrics");
  auto* div = app.add_subcommand("diversity", "Average pairwise symmetric KL of a synthetic dataset");
  auto* show = app.add_subcommand("config", "Print the resolved configuration");

  std::string synthetic_path;
  std::optional<double> tau;
  eval->add_option("--synthetic", synthetic_path, "DDTS file (default <out>/synthetic.ddts)");
  div->add_option("--synthetic", synthetic_path, "DDTS file (default <out>/synthetic.ddts)");
  div->add_option("--tau", tau, "Softmax temperature (default distill.tau)");

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig config = resolve_config(opts);
    if (*teachers) return cmd_teachers(config);
    if (*distill) return cmd_distill(config);
    if (*eval) return cmd_eval(config, synthetic_path);
    if (*div) return cmd_diversity(config, synthetic_path, tau);
    if (*show) {
      std::cout << serialize_config(config);
      return 0;
    }
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 1;
}
