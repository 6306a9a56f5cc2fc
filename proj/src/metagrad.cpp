#include "ddtime/metagrad.hpp"

#include <cmath>

#include "ddtime/error.hpp"

namespace ddtime {

std::size_t UnrollTrace::stored_values() const noexcept {
  std::size_t n = data.data().size();
  for (const auto& t : thetas) n += t.size();
  return n;
}

UnrollResult unroll_student(const ParameterVector& theta_init, const SyntheticDataset& synthetic,
                            const ModelSpec& spec, std::size_t k, double lr) {
  if (k == 0) throw Error(ErrorCode::invalid_argument, "unroll needs at least one step");
  if (synthetic.t_in() != spec.t_in || synthetic.t_out() != spec.t_out) {
    throw Error(ErrorCode::shape_mismatch, "synthetic windows do not match the model");
  }
  UnrollResult out{theta_init, UnrollTrace{spec, synthetic, {}, lr}};
  out.trace.thetas.reserve(k);
  const auto rows = out.trace.data.rows();
  ParameterVector grad(theta_init.size());
  for (std::size_t step = 0; step < k; ++step) {
    out.trace.thetas.push_back(out.theta_final);
    const double loss = mse_loss_grad(spec, out.theta_final, rows, grad);
    if (!std::isfinite(loss)) {
      throw Error(ErrorCode::divergence, "student loss became non-finite at unroll step " + std::to_string(step));
    }
    for (std::size_t i = 0; i < grad.size(); ++i) out.theta_final[i] -= lr * grad[i];
  }
  return out;
}

ParameterVector replay(const UnrollTrace& trace) {
  if (trace.thetas.empty()) throw Error(ErrorCode::invalid_argument, "empty trace");
  ParameterVector theta = trace.thetas.front();
  const auto rows = trace.data.rows();
  ParameterVector grad(theta.size());
  for (std::size_t step = 0; step < trace.steps(); ++step) {
    mse_loss_grad(trace.spec, theta, rows, grad);
    for (std::size_t i = 0; i < grad.size(); ++i) theta[i] -= trace.lr * grad[i];
  }
  return theta;
}

SyntheticGradient SyntheticGradient::zeros_like(const SyntheticDataset& data) {
  const std::size_t rows = data.samples() * data.n_vars();
  return {data.samples(),
          data.n_vars(),
          data.t_in(),
          data.t_out(),
          std::vector<double>(rows * data.t_in(), 0.0),
          std::vector<double>(rows * data.t_out(), 0.0)};
}

std::vector<double> SyntheticGradient::flattened() const {
  std::vector<double> out;
  out.reserve(d_inputs.size() + d_targets.size());
  for (std::size_t r = 0; r < samples * n_vars; ++r) {
    out.insert(out.end(), d_inputs.begin() + r * t_in, d_inputs.begin() + (r + 1) * t_in);
    out.insert(out.end(), d_targets.begin() + r * t_out, d_targets.begin() + (r + 1) * t_out);
  }
  return out;
}

double SyntheticGradient::norm() const {
  double sum = 0.0;
  for (double g : d_inputs) sum += g * g;
  for (double g : d_targets) sum += g * g;
  return std::sqrt(sum);
}

void SyntheticGradient::scale(double factor) {
  for (double& g : d_inputs) g *= factor;
  for (double& g : d_targets) g *= factor;
}

void SyntheticGradient::add(const SyntheticGradient& other) {
  if (other.d_inputs.size() != d_inputs.size() || other.d_targets.size() != d_targets.size()) {
    throw Error(ErrorCode::shape_mismatch, "synthetic gradients differ in shape");
  }
  for (std::size_t i = 0; i < d_inputs.size(); ++i) d_inputs[i] += other.d_inputs[i];
  for (std::size_t i = 0; i < d_targets.size(); ++i) d_targets[i] += other.d_targets[i];
}

SyntheticGradient backprop_to_synthetic(const UnrollTrace& trace, std::span<const double> d_theta_final,
                                        const SyntheticGradient& direct_grads) {
  const auto& data = trace.data;
  if (direct_grads.samples != data.samples() || direct_grads.n_vars != data.n_vars() ||
      direct_grads.t_in != data.t_in() || direct_grads.t_out != data.t_out() ||
      direct_grads.d_inputs.size() != data.samples() * data.n_vars() * data.t_in() ||
      direct_grads.d_targets.size() != data.samples() * data.n_vars() * data.t_out()) {
    throw Error(ErrorCode::shape_mismatch, "direct gradient does not match the traced data");
  }
  const std::size_t n_params = parameter_count(trace.spec);
  if (d_theta_final.size() != n_params) throw Error(ErrorCode::shape_mismatch, "d_theta_final length");

  SyntheticGradient out = direct_grads;
  if (trace.steps() == 0) return out;

  const auto rows = data.rows();
  SyntheticGradient step_grad = SyntheticGradient::zeros_like(data);
  std::vector<RowAdjoint> adj;
  for (std::size_t i = 0; i < data.samples(); ++i) {
    for (std::size_t v = 0; v < data.n_vars(); ++v) adj.push_back({step_grad.input_row(i, v), step_grad.target_row(i, v)});
  }

  // theta_{t+1} = theta_t - lr g(theta_t, D), so with lambda = dL/dtheta_{t+1}:
  //   dL/dD      += -lr (dg/dD)^T lambda
  //   dL/dtheta_t = lambda - lr H(theta_t) lambda
  ParameterVector lambda(d_theta_final.begin(), d_theta_final.end());
  ParameterVector hv(n_params);
  for (std::size_t t = trace.steps(); t-- > 0;) {
    std::fill(hv.begin(), hv.end(), 0.0);
    std::fill(step_grad.d_inputs.begin(), step_grad.d_inputs.end(), 0.0);
    std::fill(step_grad.d_targets.begin(), step_grad.d_targets.end(), 0.0);
    mse_grad_dot_vjp(trace.spec, trace.thetas[t], rows, lambda, hv, adj);
    for (std::size_t i = 0; i < out.d_inputs.size(); ++i) out.d_inputs[i] -= trace.lr * step_grad.d_inputs[i];
    for (std::size_t i = 0; i < out.d_targets.size(); ++i) out.d_targets[i] -= trace.lr * step_grad.d_targets[i];
    for (std::size_t i = 0; i < n_params; ++i) lambda[i] -= trace.lr * hv[i];
  }
  return out;
}

SyntheticGradient finite_diff_synthetic(const SyntheticObjective& objective, const SyntheticDataset& synthetic,
                                        double h) {
  if (!(h > 0.0)) throw Error(ErrorCode::invalid_argument, "finite-difference step must be positive");
  SyntheticDataset probe = synthetic;
  std::vector<double> flat(synthetic.data().size());
  for (std::size_t k = 0; k < flat.size(); ++k) {
    const double saved = probe.data()[k];
    probe.data()[k] = saved + h;
    const double up = objective(probe);
    probe.data()[k] = saved - h;
    const double down = objective(probe);
    probe.data()[k] = saved;
    flat[k] = (up - down) / (2.0 * h);
  }
  SyntheticGradient out = SyntheticGradient::zeros_like(synthetic);
  const std::size_t len = synthetic.length();
  for (std::size_t r = 0; r < synthetic.samples() * synthetic.n_vars(); ++r) {
    for (std::size_t c = 0; c < synthetic.t_in(); ++c) out.d_inputs[r * synthetic.t_in() + c] = flat[r * len + c];
    for (std::size_t c = 0; c < synthetic.t_out(); ++c) {
      out.d_targets[r * synthetic.t_out() + c] = flat[r * len + synthetic.t_in() + c];
    }
  }
  return out;
}

ObjectiveResult evaluate_objective(const ModelSpec& spec, const SyntheticDataset& synthetic,
                                   const SegmentRef& segment, const ObjectiveSettings& settings,
                                   std::span<const WindowPair> real_batch, bool with_grad) {
  const std::size_t n_params = parameter_count(spec);
  if (segment.start.size() != n_params || segment.target.size() != n_params || segment.teacher.size() != n_params ||
      segment.norm_start.size() != n_params || segment.norm_target.size() != n_params) {
    throw Error(ErrorCode::shape_mismatch, "segment parameters do not match the model");
  }
  validate(settings.isib);

  auto unroll = unroll_student(ParameterVector(segment.start.begin(), segment.start.end()), synthetic, spec,
                               settings.unroll_steps, settings.student_lr);
  const auto& theta = unroll.theta_final;

  const double denom = param_sq_distance(segment.norm_target, segment.norm_start);
  if (!(denom > 0.0)) throw Error(ErrorCode::degenerate_segment, "normalizing segment has zero length");
  const double l_param = param_sq_distance(theta, segment.target) / denom;

  ParameterVector d_theta(n_params, 0.0);
  SyntheticGradient direct = SyntheticGradient::zeros_like(synthetic);
  if (with_grad) {
    for (std::size_t i = 0; i < n_params; ++i) d_theta[i] = 2.0 * (theta[i] - segment.target[i]) / denom;
  }

  // Value terms: student vs frozen teacher on the chosen inputs.
  std::vector<Matrix> inputs;
  if (settings.value_source == ValueInputSource::synthetic) {
    for (std::size_t i = 0; i < synthetic.samples(); ++i) inputs.push_back(synthetic.input(i));
  } else {
    if (real_batch.empty()) throw Error(ErrorCode::empty_batch, "value term on real inputs needs a batch");
    for (const auto& p : real_batch) inputs.push_back(p.input);
  }
  const double n_inputs = static_cast<double>(inputs.size());
  double l_tmp = 0.0;
  double l_fre = 0.0;
  ParameterVector teacher_scratch(n_params);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Matrix y_s = forward(spec, theta, inputs[i]);
    const Matrix y_t = forward(spec, segment.teacher, inputs[i]);
    l_tmp += value_temporal(y_s, y_t) / n_inputs;
    l_fre += value_frequency(y_s, y_t) / n_inputs;
    if (!with_grad) continue;

    const Matrix g_tmp = value_temporal_grad(y_s, y_t);
    const Matrix g_fre = value_frequency_grad(y_s, y_t);
    Matrix adj_s(y_s.rows(), y_s.cols());
    Matrix adj_t(y_s.rows(), y_s.cols());
    for (std::size_t k = 0; k < adj_s.size(); ++k) {
      adj_s.values()[k] = ((1.0 - settings.alpha) * g_tmp.values()[k] + settings.alpha * g_fre.values()[k]) / n_inputs;
      adj_t.values()[k] = -adj_s.values()[k];
    }
    const bool on_synthetic = settings.value_source == ValueInputSource::synthetic;
    for (std::size_t v = 0; v < inputs[i].rows(); ++v) {
      std::span<double> dx = on_synthetic ? direct.input_row(i, v) : std::span<double>{};
      forward_vjp(spec, theta, inputs[i].row(v), adj_s.row(v), d_theta, dx);
      if (on_synthetic) forward_vjp(spec, segment.teacher, inputs[i].row(v), adj_t.row(v), teacher_scratch, dx);
    }
  }

  const auto views = synthetic.sample_views();
  double l_is = 0.0;
  if (with_grad) {
    std::vector<std::vector<double>> isib_grads;
    l_is = isib_loss_grad(views, settings.isib, isib_grads);
    if (settings.lambda_is != 0.0) {
      const std::size_t len = synthetic.length();
      for (std::size_t i = 0; i < synthetic.samples(); ++i) {
        for (std::size_t v = 0; v < synthetic.n_vars(); ++v) {
          const double* g = isib_grads[i].data() + v * len;
          auto din = direct.input_row(i, v);
          auto dout = direct.target_row(i, v);
          for (std::size_t c = 0; c < synthetic.t_in(); ++c) din[c] += settings.lambda_is * g[c];
          for (std::size_t c = 0; c < synthetic.t_out(); ++c) dout[c] += settings.lambda_is * g[synthetic.t_in() + c];
        }
      }
    }
  } else {
    l_is = isib_loss(views, settings.isib);
  }

  ObjectiveResult result{total_loss(l_param, l_tmp, l_fre, l_is, settings.alpha, settings.lambda_is),
                         theta, SyntheticGradient{}};
  if (with_grad) result.grad = backprop_to_synthetic(unroll.trace, d_theta, direct);
  return result;
}

}  // namespace ddtime
