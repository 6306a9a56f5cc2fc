#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ddtime/eval.hpp"
#include "ddtime/expert_buffer.hpp"
#include "ddtime/losses.hpp"
#include "ddtime/metagrad.hpp"
#include "ddtime/models.hpp"
#include "ddtime/rng.hpp"
#include "ddtime/series.hpp"
#include "ddtime/synthetic.hpp"

namespace ddtime {

/// Which frozen model the value terms compare the student against.
enum class ValueTeacher { segment_target, expert_final };

/// Denominator of the parameter term: the sampled segment itself, or the
/// expert's whole run (initial to final checkpoint).
enum class ParamNormalization { segment, global };

struct DistillConfig {
  std::size_t samples = 3;
  double alpha = 0.8;
  double lambda_is = 0.6;
  double lambda_div = 0.5;
  double tau = 1.0;
  double isib_epsilon = 1e-8;
  double synthetic_lr = 0.1;
  double student_lr = 3e-4;
  std::size_t unroll_steps = 20;
  std::size_t segment_span = 1;
  std::size_t interval = 5;
  double cond_coef = 0.01;
  std::size_t iterations = 300;
  std::size_t eval_every = 50;
  ValueInputSource value_source = ValueInputSource::synthetic;
  std::size_t real_batch_size = 32;
  ValueTeacher value_teacher = ValueTeacher::segment_target;
  ParamNormalization normalization = ParamNormalization::segment;
  double max_grad_norm = 0.0;  // 0 disables the guard
  std::size_t max_resamples = 16;
  AdamHyper adam;

  IsibConfig isib() const { return {tau, isib_epsilon, lambda_div}; }
  ObjectiveSettings objective() const;
};

void validate(const DistillConfig& config);

/// Copies windows into a synthetic tensor, input then target along time.
SyntheticDataset synthetic_from_windows(std::span<const WindowPair> windows);

/// S windows drawn uniformly (with replacement) from the real data.
SyntheticDataset init_synthetic(const WindowedDataset& real_windows, std::size_t samples, std::uint64_t seed);

/// Mutable state of the outer loop. Segment, real-batch and
/// conditional-update draws use separate streams so toggling one feature
/// leaves the others' draws untouched.
struct DistillState {
  SyntheticDataset synthetic;
  OptimizerState adam;
  Rng segment_rng;
  Rng real_batch_rng;
  Rng conditional_rng;
  std::size_t iteration = 0;
  std::size_t conditional_updates = 0;

  static DistillState create(SyntheticDataset synthetic, std::uint64_t master_seed);
};

struct StepInfo {
  LossBreakdown losses;
  std::size_t expert_index = 0;
  std::size_t start_epoch = 0;
  double grad_norm = 0.0;
};

/// One refinement of the synthetic data: sample a segment, unroll the
/// student, take the exact meta-gradient of the total objective and apply
/// one Adam step to inputs and targets.
StepInfo distill_step(DistillState& state, const DistillConfig& config, const ModelSpec& spec,
                      std::span<const ExpertTrajectory> experts, const WindowedDataset& real_train);

/// Y <- (1 - coef) Y + coef * teacher(X) for every sample; inputs untouched.
SyntheticDataset conditional_update(const SyntheticDataset& synthetic, const ModelSpec& teacher_spec,
                                    std::span<const double> theta_teacher, double coef);

struct LogRow {
  std::size_t iteration = 0;
  LossBreakdown losses;
  std::optional<double> eval_mse;
  std::optional<double> eval_mae;
};

struct DistillResult {
  SyntheticDataset best;
  SyntheticDataset last;
  std::size_t best_iteration = 0;
  double best_val_mse = 0.0;
  double last_val_mse = 0.0;
  std::size_t conditional_updates = 0;
  std::vector<LogRow> log;
};

/// Full outer loop. Every `interval` iterations the targets are blended
/// with a sampled expert's final forecasts; every `eval_every` iterations
/// (and after the last one) fresh students are scored on `val`, and the
/// best-scoring snapshot is returned. Zero iterations returns the
/// initialization with an empty log.
DistillResult run_distillation(const DistillConfig& config, const ModelSpec& spec,
                               std::span<const ExpertTrajectory> experts, const WindowedDataset& train,
                               const WindowedDataset& val, const EvalConfig& eval, std::uint64_t master_seed);

/// iteration,l_param,l_val_tmp,l_val_fre,l_is,total,eval_mse,eval_mae
std::string log_to_csv(std::span<const LogRow> log);

inline constexpr std::uint16_t kSyntheticVersion = 1;

/// "DDTS" | u16 version | u32 S | u32 N | u32 t_in | u32 t_out |
/// f64 data [S x N x T] | u32 CRC32, little-endian.
void save_synthetic(const SyntheticDataset& synthetic, const std::filesystem::path& path);
SyntheticDataset load_synthetic(const std::filesystem::path& path);

}  // namespace ddtime
