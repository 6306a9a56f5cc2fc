#include "ddtime/distill.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "binary_io.hpp"
#include "ddtime/error.hpp"

namespace ddtime {
namespace {

constexpr std::string_view kMagic = "DDTS";
constexpr double kMinSegmentSq = 1e-20;

}  // namespace

ObjectiveSettings DistillConfig::objective() const {
  return {alpha, lambda_is, isib(), value_source, unroll_steps, student_lr};
}

void validate(const DistillConfig& c) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::config_error, what); };
  if (c.samples == 0) fail("distill.samples must be at least 1");
  if (!(c.alpha >= 0.0 && c.alpha <= 1.0)) fail("distill.alpha must lie in [0, 1]");
  if (!(c.lambda_is >= 0.0)) fail("distill.lambda_is must be non-negative");
  if (!(c.lambda_div > 0.0)) fail("distill.lambda_div must be positive");
  if (!(c.tau > 0.0)) fail("distill.tau must be positive");
  if (!(c.isib_epsilon >= 0.0)) fail("distill.isib_epsilon must be non-negative");
  // A zero synthetic rate freezes the data while still reporting losses.
  if (!(c.synthetic_lr >= 0.0)) fail("distill.synthetic_lr must be non-negative");
  if (!(c.student_lr > 0.0)) fail("distill.student_lr must be positive");
  if (c.unroll_steps == 0) fail("distill.unroll_steps must be at least 1");
  if (c.segment_span == 0) fail("distill.segment_span must be at least 1");
  if (c.interval == 0) fail("distill.interval must be at least 1");
  if (!(c.cond_coef >= 0.0 && c.cond_coef <= 1.0)) fail("distill.cond_coef must lie in [0, 1]");
  if (c.value_source == ValueInputSource::real && c.real_batch_size == 0) fail("distill.real_batch_size must be positive");
  if (!(c.max_grad_norm >= 0.0)) fail("distill.max_grad_norm must be non-negative");
  if (c.max_resamples == 0) fail("distill.max_resamples must be at least 1");
}

SyntheticDataset synthetic_from_windows(std::span<const WindowPair> windows) {
  if (windows.empty()) throw Error(ErrorCode::empty_dataset, "no windows");
  const std::size_t n = windows.front().input.rows();
  const std::size_t t_in = windows.front().input.cols();
  const std::size_t t_out = windows.front().target.cols();
  SyntheticDataset out(windows.size(), n, t_in, t_out);
  auto& data = out.data();
  std::size_t k = 0;
  for (const auto& w : windows) {
    if (w.input.rows() != n || w.target.rows() != n || w.input.cols() != t_in || w.target.cols() != t_out) {
      throw Error(ErrorCode::shape_mismatch, "windows differ in shape");
    }
    for (std::size_t v = 0; v < n; ++v) {
      for (double x : w.input.row(v)) data[k++] = x;
      for (double x : w.target.row(v)) data[k++] = x;
    }
  }
  return out;
}

SyntheticDataset init_synthetic(const WindowedDataset& real_windows, std::size_t samples, std::uint64_t seed) {
  if (real_windows.empty()) throw Error(ErrorCode::empty_dataset, "cannot initialize from an empty dataset");
  if (samples == 0) throw Error(ErrorCode::invalid_argument, "need at least one synthetic sample");
  const auto picked = sample_windows(real_windows, samples, seed);
  return synthetic_from_windows(picked);
}

DistillState DistillState::create(SyntheticDataset synthetic, std::uint64_t master_seed) {
  const std::size_t n = synthetic.data().size();
  return {std::move(synthetic),
          OptimizerState::adam(n),
          Rng(derive_seed(master_seed, seed_stream::segments)),
          Rng(derive_seed(master_seed, seed_stream::real_batches)),
          Rng(derive_seed(master_seed, seed_stream::conditional)),
          0,
          0};
}

StepInfo distill_step(DistillState& state, const DistillConfig& config, const ModelSpec& spec,
                      std::span<const ExpertTrajectory> experts, const WindowedDataset& real_train) {
  validate(config);
  if (experts.empty()) throw Error(ErrorCode::empty_dataset, "no expert trajectories");

  std::optional<SegmentSample> seg;
  std::span<const double> norm_start, norm_target;
  for (std::size_t attempt = 0; attempt < config.max_resamples && !seg; ++attempt) {
    auto cand = sample_segment(experts, config.segment_span, state.segment_rng);
    const auto& expert = experts[cand.expert_index];
    const bool global = config.normalization == ParamNormalization::global;
    const auto& a = global ? expert.checkpoints.front() : cand.theta_start;
    const auto& b = global ? expert.checkpoints.back() : cand.theta_target;
    if (param_sq_distance(b, a) > kMinSegmentSq) {
      seg = std::move(cand);
      norm_start = global ? std::span<const double>(expert.checkpoints.front()) : std::span<const double>(seg->theta_start);
      norm_target = global ? std::span<const double>(expert.checkpoints.back()) : std::span<const double>(seg->theta_target);
    }
  }
  if (!seg) throw Error(ErrorCode::degenerate_segment, "every sampled segment had zero length");

  const auto& teacher = config.value_teacher == ValueTeacher::segment_target
                            ? seg->theta_target
                            : experts[seg->expert_index].checkpoints.back();

  std::vector<WindowPair> real_batch;
  if (config.value_source == ValueInputSource::real) {
    real_batch = sample_windows(real_train, config.real_batch_size, state.real_batch_rng());
  }

  const SegmentRef ref{seg->theta_start, seg->theta_target, norm_start, norm_target, teacher};
  auto res = evaluate_objective(spec, state.synthetic, ref, config.objective(), real_batch, true);
  if (!std::isfinite(res.breakdown.total)) {
    throw Error(ErrorCode::divergence, "non-finite objective at iteration " + std::to_string(state.iteration + 1));
  }
  StepInfo info{res.breakdown, seg->expert_index, seg->start_epoch, res.grad.norm()};
  if (!std::isfinite(info.grad_norm)) throw Error(ErrorCode::divergence, "non-finite meta-gradient");
  if (config.max_grad_norm > 0.0 && info.grad_norm > config.max_grad_norm) {
    res.grad.scale(config.max_grad_norm / info.grad_norm);
  }
  adam_step(state.synthetic.data(), res.grad.flattened(), config.synthetic_lr, config.adam, state.adam);
  ++state.iteration;
  return info;
}

SyntheticDataset conditional_update(const SyntheticDataset& synthetic, const ModelSpec& teacher_spec,
                                    std::span<const double> theta_teacher, double coef) {
  if (!(coef >= 0.0 && coef <= 1.0)) throw Error(ErrorCode::invalid_argument, "coefficient must lie in [0, 1]");
  SyntheticDataset out = synthetic;
  for (std::size_t i = 0; i < synthetic.samples(); ++i) {
    for (std::size_t v = 0; v < synthetic.n_vars(); ++v) {
      const auto pred = forward_row(teacher_spec, theta_teacher, synthetic.input_row(i, v));
      auto y = out.target_row(i, v);
      for (std::size_t k = 0; k < y.size(); ++k) y[k] = (1.0 - coef) * y[k] + coef * pred[k];
    }
  }
  return out;
}

DistillResult run_distillation(const DistillConfig& config, const ModelSpec& spec,
                               std::span<const ExpertTrajectory> experts, const WindowedDataset& train,
                               const WindowedDataset& val, const EvalConfig& eval, std::uint64_t master_seed) {
  validate(config);
  auto init = init_synthetic(train, config.samples, derive_seed(master_seed, seed_stream::synthetic_init));
  DistillResult result{init, init, 0, std::numeric_limits<double>::quiet_NaN(),
                       std::numeric_limits<double>::quiet_NaN(), 0, {}};
  if (config.iterations == 0) return result;
  if (experts.empty()) throw Error(ErrorCode::empty_dataset, "no expert trajectories");

  auto state = DistillState::create(std::move(init), master_seed);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t it = 1; it <= config.iterations; ++it) {
    const auto info = distill_step(state, config, spec, experts, train);
    if (it % config.interval == 0) {
      const auto& expert = experts[uniform_index(state.conditional_rng, experts.size())];
      state.synthetic = conditional_update(state.synthetic, spec, expert.checkpoints.back(), config.cond_coef);
      ++state.conditional_updates;
    }
    LogRow row{it, info.losses, std::nullopt, std::nullopt};
    const bool periodic = config.eval_every > 0 && it % config.eval_every == 0;
    if (periodic || it == config.iterations) {
      const auto report = train_and_eval(state.synthetic, val, spec, eval, train.size(), config.isib());
      if (periodic) {
        row.eval_mse = report.mse_mean;
        row.eval_mae = report.mae_mean;
      }
      if (report.mse_mean < best) {
        best = report.mse_mean;
        result.best = state.synthetic;
        result.best_iteration = it;
      }
      if (it == config.iterations) result.last_val_mse = report.mse_mean;
      spdlog::debug("iteration {}: total {:.6g}, val mse {:.6g}", it, info.losses.total, report.mse_mean);
    }
    spdlog::trace("iteration {}: L_P {:.6g} tmp {:.6g} fre {:.6g} IS {:.6g}", it, info.losses.l_param,
                  info.losses.l_val_tmp, info.losses.l_val_fre, info.losses.l_is);
    result.log.push_back(row);
  }
  if (result.best_iteration == 0) {
    // Every evaluation diverged; fall back to the final state.
    result.best = state.synthetic;
    result.best_iteration = config.iterations;
  }
  result.best_val_mse = best;
  result.last = state.synthetic;
  result.conditional_updates = state.conditional_updates;
  return result;
}

std::string log_to_csv(std::span<const LogRow> log) {
  std::ostringstream out;
  out << "iteration,l_param,l_val_tmp,l_val_fre,l_is,total,eval_mse,eval_mae\n";
  for (const auto& r : log) {
    out << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},", r.iteration, r.losses.l_param,
                       r.losses.l_val_tmp, r.losses.l_val_fre, r.losses.l_is, r.losses.total);
    if (r.eval_mse) out << fmt::format("{:.17g}", *r.eval_mse);
    out << ',';
    if (r.eval_mae) out << fmt::format("{:.17g}", *r.eval_mae);
    out << '\n';
  }
  return out.str();
}

void save_synthetic(const SyntheticDataset& synthetic, const std::filesystem::path& path) {
  detail::ByteWriter w;
  w.put_bytes(kMagic);
  w.put_u16(kSyntheticVersion);
  w.put_u32(static_cast<std::uint32_t>(synthetic.samples()));
  w.put_u32(static_cast<std::uint32_t>(synthetic.n_vars()));
  w.put_u32(static_cast<std::uint32_t>(synthetic.t_in()));
  w.put_u32(static_cast<std::uint32_t>(synthetic.t_out()));
  for (double x : synthetic.data()) w.put_f64(x);
  w.seal();
  w.write_file(path);
}

SyntheticDataset load_synthetic(const std::filesystem::path& path) {
  auto r = detail::ByteReader::from_file(path);
  r.expect_magic(kMagic);
  const auto version = r.u16();
  if (version != kSyntheticVersion) throw Error(ErrorCode::version_mismatch, "synthetic version " + std::to_string(version));
  const std::uint64_t s = r.u32();
  const std::uint64_t n = r.u32();
  const std::uint64_t t_in = r.u32();
  const std::uint64_t t_out = r.u32();
  const std::uint64_t count = s * n * (t_in + t_out);
  r.verify_crc(r.position() + count * 8);
  std::vector<double> data(count);
  for (auto& x : data) x = r.f64();
  return SyntheticDataset(s, n, t_in, t_out, std::move(data));
}

}  // namespace ddtime
