#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "ddtime/losses.hpp"
#include "ddtime/models.hpp"
#include "ddtime/series.hpp"
#include "ddtime/synthetic.hpp"

namespace ddtime {

/// Everything the reverse pass needs to revisit a K-step student unroll:
/// the parameters before each step and a snapshot of the data it ran on.
/// Intermediate activations are recomputed, so storage is
/// K * parameter_count + the synthetic tensor.
struct UnrollTrace {
  ModelSpec spec;
  SyntheticDataset data;
  std::vector<ParameterVector> thetas;  // thetas[t] = parameters before step t
  double lr = 0.0;

  std::size_t steps() const noexcept { return thetas.size(); }
  std::size_t stored_values() const noexcept;
};

struct UnrollResult {
  ParameterVector theta_final;
  UnrollTrace trace;
};

/// K plain gradient-descent steps on the full-batch synthetic MSE.
/// Throws ErrorCode::divergence when a loss goes non-finite.
UnrollResult unroll_student(const ParameterVector& theta_init, const SyntheticDataset& synthetic,
                            const ModelSpec& spec, std::size_t k, double lr);

/// Recomputes the final parameters from a trace.
ParameterVector replay(const UnrollTrace& trace);

/// dL/d(synthetic), split into the input and target slices.
struct SyntheticGradient {
  std::size_t samples = 0;
  std::size_t n_vars = 0;
  std::size_t t_in = 0;
  std::size_t t_out = 0;
  std::vector<double> d_inputs;   // [S x N x t_in]
  std::vector<double> d_targets;  // [S x N x t_out]

  static SyntheticGradient zeros_like(const SyntheticDataset& data);

  std::span<double> input_row(std::size_t i, std::size_t v) {
    return {d_inputs.data() + (i * n_vars + v) * t_in, t_in};
  }
  std::span<double> target_row(std::size_t i, std::size_t v) {
    return {d_targets.data() + (i * n_vars + v) * t_out, t_out};
  }

  /// Interleaved back into the [S x N x T] layout of the dataset.
  std::vector<double> flattened() const;
  double norm() const;
  void scale(double factor);
  void add(const SyntheticGradient& other);
};

/// Exact gradient through every unrolled step plus the direct terms:
/// walks the trace backwards with Hessian-vector and mixed second-order
/// products of the inner MSE.
SyntheticGradient backprop_to_synthetic(const UnrollTrace& trace, std::span<const double> d_theta_final,
                                        const SyntheticGradient& direct_grads);

using SyntheticObjective = std::function<double(const SyntheticDataset&)>;

/// Central differences over every synthetic entry. Test oracle.
SyntheticGradient finite_diff_synthetic(const SyntheticObjective& objective, const SyntheticDataset& synthetic,
                                        double h);

enum class ValueInputSource { synthetic, real };

struct ObjectiveSettings {
  double alpha = 0.8;
  double lambda_is = 0.6;
  IsibConfig isib;
  ValueInputSource value_source = ValueInputSource::synthetic;
  std::size_t unroll_steps = 20;
  double student_lr = 3e-4;
};

/// Parameters one distillation step matches against. The parameter term
/// is ||theta_K - target||^2 / ||norm_target - norm_start||^2, and the value
/// terms compare the student with a frozen model at `teacher`.
struct SegmentRef {
  std::span<const double> start;
  std::span<const double> target;
  std::span<const double> norm_start;
  std::span<const double> norm_target;
  std::span<const double> teacher;
};

struct ObjectiveResult {
  LossBreakdown breakdown;
  ParameterVector theta_final;
  SyntheticGradient grad;  // filled only when requested
};

/// Unrolls the student from `segment.start`, evaluates the total objective
/// and, when `with_grad`, its exact gradient with respect to the synthetic
/// tensor. `real_batch` supplies value-term inputs for ValueInputSource::real.
ObjectiveResult evaluate_objective(const ModelSpec& spec, const SyntheticDataset& synthetic,
                                   const SegmentRef& segment, const ObjectiveSettings& settings,
                                   std::span<const WindowPair> real_batch, bool with_grad);

}  // namespace ddtime
