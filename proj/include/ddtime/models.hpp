#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ddtime/matrix.hpp"
#include "ddtime/series.hpp"

namespace ddtime {

enum class ModelKind : std::uint16_t { channel_linear = 0, mlp = 1 };

/// Both kinds map one variable's input window (t_in) to its forecast
/// (t_out) and share weights across variables. A ChannelLinear model is a
/// feed-forward net with no hidden layers; an Mlp has tanh hidden layers.
struct ModelSpec {
  ModelKind kind = ModelKind::channel_linear;
  std::size_t t_in = 24;
  std::size_t t_out = 24;
  std::size_t n_vars = 1;
  std::vector<std::size_t> hidden_dims;

  /// t_in, hidden..., t_out
  std::vector<std::size_t> layer_widths() const;
  bool operator==(const ModelSpec&) const = default;
};

void validate(const ModelSpec& spec);

/// Layout: per layer, the [out x in] weight block row-major, then the bias.
using ParameterVector = std::vector<double>;

std::size_t parameter_count(const ModelSpec& spec);

ParameterVector init_params(const ModelSpec& spec, std::uint64_t seed);

/// One variable's forecast.
std::vector<double> forward_row(const ModelSpec& spec, std::span<const double> params,
                                std::span<const double> x);

/// x: [n_vars x t_in] -> [n_vars x t_out]
Matrix forward(const ModelSpec& spec, std::span<const double> params, const Matrix& x);

/// One regression row: a single variable's input window and target.
struct Row {
  std::span<const double> x;
  std::span<const double> y;
};

std::vector<Row> rows_of(std::span<const WindowPair> batch);

/// Mean squared error over all rows and horizon steps.
double mse_loss(const ModelSpec& spec, std::span<const double> params, std::span<const Row> rows);

/// Same loss; writes its exact gradient into `grad` (overwritten).
double mse_loss_grad(const ModelSpec& spec, std::span<const double> params, std::span<const Row> rows,
                     std::span<double> grad);

struct LossAndGrad {
  double loss = 0.0;
  ParameterVector grad;
};

LossAndGrad loss_and_grad(const ModelSpec& spec, const ParameterVector& params,
                          std::span<const WindowPair> batch);

/// Vector-Jacobian product of one forward row: given dL/d(output), adds
/// dL/d(params) into `d_params` and, when non-empty, dL/dx into `d_x`.
void forward_vjp(const ModelSpec& spec, std::span<const double> params, std::span<const double> x,
                 std::span<const double> d_out, std::span<double> d_params, std::span<double> d_x);

/// Per-row adjoint buffers for second-order products; either may be empty.
struct RowAdjoint {
  std::span<double> dx;
  std::span<double> dy;
};

/// Second-order product of the MSE gradient g(params, rows) against a fixed
/// direction v. Accumulates
///   d_params += H v          (Hessian in parameters, symmetric)
///   adj[r]   += (dg/d row_r)^T v
/// i.e. the gradient of <g, v> with respect to parameters and data.
void mse_grad_dot_vjp(const ModelSpec& spec, std::span<const double> params, std::span<const Row> rows,
                      std::span<const double> v, std::span<double> d_params,
                      std::span<const RowAdjoint> adj);

enum class OptimizerKind { sgd_momentum, adam };

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::sgd_momentum;
  std::vector<double> first;   // velocity (SGD) or first moment (Adam)
  std::vector<double> second;  // Adam only
  std::uint64_t step = 0;

  static OptimizerState sgd(std::size_t n);
  static OptimizerState adam(std::size_t n);
  bool operator==(const OptimizerState&) const = default;
};

/// v <- momentum * v + grad; params <- params - lr * v
void sgd_momentum_step(std::span<double> params, std::span<const double> grad, double lr,
                       double momentum, OptimizerState& state);

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam.
void adam_step(std::span<double> params, std::span<const double> grad, double lr, const AdamHyper& hyper,
               OptimizerState& state);

double param_sq_distance(std::span<const double> a, std::span<const double> b);

}  // namespace ddtime
