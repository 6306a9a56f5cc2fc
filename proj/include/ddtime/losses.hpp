#pragma once

#include <span>
#include <vector>

#include "ddtime/matrix.hpp"

namespace ddtime {

/// Components of the distillation objective. `alpha` and `lambda_is` are
/// kept so `total` can be recomputed from the parts.
struct LossBreakdown {
  double l_param = 0.0;
  double l_val_tmp = 0.0;
  double l_val_fre = 0.0;
  double l_is = 0.0;
  double alpha = 0.0;
  double lambda_is = 0.0;
  double total = 0.0;

  /// l_param + (1 - alpha) l_val_tmp + alpha l_val_fre + lambda_is l_is
  double recompute_total() const;
};

LossBreakdown total_loss(double l_param, double l_val_tmp, double l_val_fre, double l_is, double alpha,
                         double lambda_is);

/// Settings for the per-sample softmax distributions used by the diversity
/// regularizer and the diversity metric.
struct IsibConfig {
  double tau = 1.0;
  double epsilon = 1e-8;
  double lambda_div = 0.5;
};

void validate(const IsibConfig& cfg);

// Value terms compare student and teacher forecasts, both [d x t_out].

/// Mean squared difference over all entries.
double value_temporal(const Matrix& y_s, const Matrix& y_t);
Matrix value_temporal_grad(const Matrix& y_s, const Matrix& y_t);

/// Mean over variables of the spectral L1 distance of the forecasts.
double value_frequency(const Matrix& y_s, const Matrix& y_t);
Matrix value_frequency_grad(const Matrix& y_s, const Matrix& y_t);

/// (1 - alpha) * temporal + alpha * frequency
double value_combined(const Matrix& y_s, const Matrix& y_t, double alpha);

/// Standardize the flattened sample, divide by tau, softmax.
std::vector<double> sample_probabilities(std::span<const double> sample, const IsibConfig& cfg);

/// 0.5 * (KL(p||q) + KL(q||p)), natural log.
double sym_kl(std::span<const double> p, std::span<const double> q);

using SampleView = std::span<const double>;

/// Mean over unordered pairs of exp(-lambda_div * sym_kl(p_i, p_j)); 0 when
/// there is a single sample.
double isib_loss(std::span<const SampleView> samples, const IsibConfig& cfg);

/// isib_loss plus its gradient with respect to every sample entry.
double isib_loss_grad(std::span<const SampleView> samples, const IsibConfig& cfg,
                      std::vector<std::vector<double>>& grads);

/// Mean pairwise symmetric KL. Requires at least two samples.
double mean_sym_kl(std::span<const SampleView> samples, const IsibConfig& cfg);

/// ||theta_s - target||^2 / ||target - start||^2
double param_match_loss(std::span<const double> theta_s, std::span<const double> theta_start,
                        std::span<const double> theta_target);

}  // namespace ddtime
