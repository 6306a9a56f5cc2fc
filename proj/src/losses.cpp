#include "ddtime/losses.hpp"

#include <algorithm>
#include <cmath>

#include "ddtime/error.hpp"
#include "ddtime/models.hpp"
#include "ddtime/spectral.hpp"

namespace ddtime {
namespace {

void check_same_shape(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.empty()) {
    throw Error(ErrorCode::shape_mismatch, "forecast shapes differ");
  }
}

/// Standardized, temperature-scaled logits of one sample plus what the
/// backward pass needs.
struct SampleLogits {
  std::vector<double> centered;  // z - mean
  std::vector<double> logits;    // centered * scale
  std::vector<double> log_prob;
  std::vector<double> prob;
  double sigma = 0.0;
  double scale = 0.0;  // 1 / (tau * (sigma + eps))
};

SampleLogits make_logits(std::span<const double> z, const IsibConfig& cfg) {
  if (z.empty()) throw Error(ErrorCode::invalid_argument, "empty sample");
  const double n = static_cast<double>(z.size());
  SampleLogits out;
  double mean = 0.0;
  for (double x : z) mean += x;
  mean /= n;
  out.centered.resize(z.size());
  double var = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out.centered[i] = z[i] - mean;
    var += out.centered[i] * out.centered[i];
  }
  out.sigma = std::sqrt(var / n);
  const double denom = cfg.tau * (out.sigma + cfg.epsilon);
  // A constant sample with epsilon = 0 has all-zero logits.
  out.scale = denom > 0.0 ? 1.0 / denom : 0.0;
  out.logits.resize(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out.logits[i] = out.centered[i] * out.scale;

  const double peak = *std::max_element(out.logits.begin(), out.logits.end());
  double total = 0.0;
  for (double s : out.logits) total += std::exp(s - peak);
  const double lse = peak + std::log(total);
  out.log_prob.resize(z.size());
  out.prob.resize(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    out.log_prob[i] = out.logits[i] - lse;
    out.prob[i] = std::exp(out.log_prob[i]);
  }
  return out;
}

double sym_kl_logits(const SampleLogits& a, const SampleLogits& b) {
  double sum = 0.0;
  for (std::size_t m = 0; m < a.prob.size(); ++m) {
    sum += (a.prob[m] - b.prob[m]) * (a.log_prob[m] - b.log_prob[m]);
  }
  return 0.5 * sum;
}

// d sym_kl / d(logits of a), scaled by `weight` and added to `out`.
void sym_kl_logit_grad(const SampleLogits& a, const SampleLogits& b, double weight, std::vector<double>& out) {
  double mean_diff = 0.0;
  for (std::size_t m = 0; m < a.prob.size(); ++m) mean_diff += a.prob[m] * (a.log_prob[m] - b.log_prob[m]);
  for (std::size_t m = 0; m < a.prob.size(); ++m) {
    const double diff = a.log_prob[m] - b.log_prob[m];
    out[m] += weight * 0.5 * ((a.prob[m] - b.prob[m]) + a.prob[m] * (diff - mean_diff));
  }
}

// Chain d/d(logits) back through the per-sample standardization.
std::vector<double> logits_to_sample_grad(const SampleLogits& s, const std::vector<double>& g,
                                          const IsibConfig& cfg) {
  const std::size_t n = g.size();
  double g_mean = 0.0;
  double g_dot_u = 0.0;
  for (std::size_t m = 0; m < n; ++m) {
    g_mean += g[m];
    g_dot_u += g[m] * s.centered[m];
  }
  g_mean /= static_cast<double>(n);
  std::vector<double> out(n);
  const double sigma_term = s.sigma > 0.0 ? s.scale / (s.sigma + cfg.epsilon) * g_dot_u /
                                                (static_cast<double>(n) * s.sigma)
                                          : 0.0;
  for (std::size_t m = 0; m < n; ++m) out[m] = s.scale * (g[m] - g_mean) - sigma_term * s.centered[m];
  return out;
}

std::vector<SampleLogits> all_logits(std::span<const SampleView> samples, const IsibConfig& cfg) {
  std::vector<SampleLogits> out;
  out.reserve(samples.size());
  for (auto s : samples) {
    if (!out.empty() && s.size() != out.front().prob.size()) {
      throw Error(ErrorCode::shape_mismatch, "samples differ in size");
    }
    out.push_back(make_logits(s, cfg));
  }
  return out;
}

}  // namespace

double LossBreakdown::recompute_total() const {
  return l_param + (1.0 - alpha) * l_val_tmp + alpha * l_val_fre + lambda_is * l_is;
}

LossBreakdown total_loss(double l_param, double l_val_tmp, double l_val_fre, double l_is, double alpha,
                         double lambda_is) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorCode::invalid_argument, "alpha must lie in [0, 1]");
  if (!(lambda_is >= 0.0)) throw Error(ErrorCode::invalid_argument, "lambda_is must be non-negative");
  LossBreakdown b{l_param, l_val_tmp, l_val_fre, l_is, alpha, lambda_is, 0.0};
  b.total = b.recompute_total();
  return b;
}

void validate(const IsibConfig& cfg) {
  if (!(cfg.tau > 0.0)) throw Error(ErrorCode::invalid_argument, "tau must be positive");
  if (!(cfg.lambda_div > 0.0)) throw Error(ErrorCode::invalid_argument, "lambda_div must be positive");
  if (!(cfg.epsilon >= 0.0)) throw Error(ErrorCode::invalid_argument, "epsilon must be non-negative");
}

double value_temporal(const Matrix& y_s, const Matrix& y_t) {
  check_same_shape(y_s, y_t);
  double sum = 0.0;
  for (std::size_t i = 0; i < y_s.size(); ++i) {
    const double e = y_s.values()[i] - y_t.values()[i];
    sum += e * e;
  }
  return sum / static_cast<double>(y_s.size());
}

Matrix value_temporal_grad(const Matrix& y_s, const Matrix& y_t) {
  check_same_shape(y_s, y_t);
  Matrix g(y_s.rows(), y_s.cols());
  const double scale = 2.0 / static_cast<double>(y_s.size());
  for (std::size_t i = 0; i < y_s.size(); ++i) g.values()[i] = scale * (y_s.values()[i] - y_t.values()[i]);
  return g;
}

double value_frequency(const Matrix& y_s, const Matrix& y_t) {
  check_same_shape(y_s, y_t);
  double sum = 0.0;
  for (std::size_t r = 0; r < y_s.rows(); ++r) sum += spectral_l1(y_s.row(r), y_t.row(r));
  return sum / static_cast<double>(y_s.rows());
}

Matrix value_frequency_grad(const Matrix& y_s, const Matrix& y_t) {
  check_same_shape(y_s, y_t);
  Matrix g(y_s.rows(), y_s.cols());
  const double scale = 1.0 / static_cast<double>(y_s.rows());
  for (std::size_t r = 0; r < y_s.rows(); ++r) {
    const auto row = spectral_l1_grad(y_s.row(r), y_t.row(r));
    for (std::size_t c = 0; c < row.size(); ++c) g(r, c) = scale * row[c];
  }
  return g;
}

double value_combined(const Matrix& y_s, const Matrix& y_t, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorCode::invalid_argument, "alpha must lie in [0, 1]");
  return (1.0 - alpha) * value_temporal(y_s, y_t) + alpha * value_frequency(y_s, y_t);
}

std::vector<double> sample_probabilities(std::span<const double> sample, const IsibConfig& cfg) {
  return make_logits(sample, cfg).prob;
}

double sym_kl(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw Error(ErrorCode::length_mismatch, "distributions differ in length");
  double sp = 0.0;
  double sq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] > 0.0) || !(q[i] > 0.0)) throw Error(ErrorCode::zero_probability, "entry " + std::to_string(i));
    sp += p[i];
    sq += q[i];
  }
  if (std::abs(sp - 1.0) > 1e-9 || std::abs(sq - 1.0) > 1e-9) {
    throw Error(ErrorCode::invalid_argument, "distributions must sum to 1");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += (p[i] - q[i]) * (std::log(p[i]) - std::log(q[i]));
  return 0.5 * sum;
}

double isib_loss(std::span<const SampleView> samples, const IsibConfig& cfg) {
  validate(cfg);
  if (samples.size() < 2) return 0.0;
  const auto logits = all_logits(samples, cfg);
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    for (std::size_t j = i + 1; j < logits.size(); ++j) {
      sum += std::exp(-cfg.lambda_div * sym_kl_logits(logits[i], logits[j]));
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

double isib_loss_grad(std::span<const SampleView> samples, const IsibConfig& cfg,
                      std::vector<std::vector<double>>& grads) {
  validate(cfg);
  grads.assign(samples.size(), {});
  for (std::size_t i = 0; i < samples.size(); ++i) grads[i].assign(samples[i].size(), 0.0);
  if (samples.size() < 2) return 0.0;

  const auto logits = all_logits(samples, cfg);
  const std::size_t n_pairs = samples.size() * (samples.size() - 1) / 2;
  std::vector<std::vector<double>> logit_grads(samples.size(), std::vector<double>(samples[0].size(), 0.0));
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    for (std::size_t j = i + 1; j < logits.size(); ++j) {
      const double w = std::exp(-cfg.lambda_div * sym_kl_logits(logits[i], logits[j]));
      sum += w;
      const double d_kl = -cfg.lambda_div * w / static_cast<double>(n_pairs);
      sym_kl_logit_grad(logits[i], logits[j], d_kl, logit_grads[i]);
      sym_kl_logit_grad(logits[j], logits[i], d_kl, logit_grads[j]);
    }
  }
  for (std::size_t i = 0; i < samples.size(); ++i) grads[i] = logits_to_sample_grad(logits[i], logit_grads[i], cfg);
  return sum / static_cast<double>(n_pairs);
}

double mean_sym_kl(std::span<const SampleView> samples, const IsibConfig& cfg) {
  validate(cfg);
  if (samples.size() < 2) throw Error(ErrorCode::invalid_argument, "diversity needs at least two samples");
  const auto logits = all_logits(samples, cfg);
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    for (std::size_t j = i + 1; j < logits.size(); ++j) {
      sum += sym_kl_logits(logits[i], logits[j]);
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

double param_match_loss(std::span<const double> theta_s, std::span<const double> theta_start,
                        std::span<const double> theta_target) {
  const double denom = param_sq_distance(theta_target, theta_start);
  if (!(denom > 0.0)) throw Error(ErrorCode::degenerate_segment, "segment start equals target");
  return param_sq_distance(theta_s, theta_target) / denom;
}

}  // namespace ddtime
