#include "ddtime/models.hpp"

#include <cmath>
#include <string>

#include "ddtime/error.hpp"
#include "ddtime/rng.hpp"

namespace ddtime {
namespace {

struct Layer {
  std::size_t in;
  std::size_t out;
  std::size_t w_off;
  std::size_t b_off;
};

std::vector<Layer> layers_of(const ModelSpec& spec) {
  const auto widths = spec.layer_widths();
  std::vector<Layer> layers;
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    Layer layer{widths[l], widths[l + 1], off, off + widths[l] * widths[l + 1]};
    off = layer.b_off + layer.out;
    layers.push_back(layer);
  }
  return layers;
}

void check_params(const ModelSpec& spec, std::span<const double> params) {
  if (params.size() != parameter_count(spec)) {
    throw Error(ErrorCode::shape_mismatch, "parameter vector has " + std::to_string(params.size()) +
                                               " entries, spec needs " + std::to_string(parameter_count(spec)));
  }
}

// z = W a + b
void affine(const Layer& layer, std::span<const double> params, std::span<const double> a,
            std::span<double> z) {
  for (std::size_t o = 0; o < layer.out; ++o) {
    const double* w = params.data() + layer.w_off + o * layer.in;
    double acc = params[layer.b_off + o];
    for (std::size_t i = 0; i < layer.in; ++i) acc += w[i] * a[i];
    z[o] = acc;
  }
}

// out += W^T delta
void affine_transpose(const Layer& layer, std::span<const double> params, std::span<const double> delta,
                      std::span<double> out) {
  for (std::size_t o = 0; o < layer.out; ++o) {
    const double* w = params.data() + layer.w_off + o * layer.in;
    for (std::size_t i = 0; i < layer.in; ++i) out[i] += w[i] * delta[o];
  }
}

// dW += delta a^T
void outer_accumulate(const Layer& layer, std::span<const double> delta, std::span<const double> a,
                      std::span<double> d_params) {
  for (std::size_t o = 0; o < layer.out; ++o) {
    double* dw = d_params.data() + layer.w_off + o * layer.in;
    for (std::size_t i = 0; i < layer.in; ++i) dw[i] += delta[o] * a[i];
  }
}

/// Activations of one forward pass: acts[0] = x, acts[l + 1] = layer l output.
struct Activations {
  std::vector<std::vector<double>> acts;

  void run(const std::vector<Layer>& layers, std::span<const double> params, std::span<const double> x) {
    acts.resize(layers.size() + 1);
    acts[0].assign(x.begin(), x.end());
    for (std::size_t l = 0; l < layers.size(); ++l) {
      acts[l + 1].resize(layers[l].out);
      affine(layers[l], params, acts[l], acts[l + 1]);
      if (l + 1 < layers.size()) {
        for (double& v : acts[l + 1]) v = std::tanh(v);
      }
    }
  }

  std::span<const double> output() const { return acts.back(); }
};

/// Reverse pass from d(output) through the cached activations.
void backprop(const std::vector<Layer>& layers, std::span<const double> params, const Activations& cache,
              std::vector<double> delta, std::span<double> d_params, std::span<double> d_x) {
  for (std::size_t l = layers.size(); l-- > 0;) {
    const Layer& layer = layers[l];
    outer_accumulate(layer, delta, cache.acts[l], d_params);
    for (std::size_t o = 0; o < layer.out; ++o) d_params[layer.b_off + o] += delta[o];
    if (l == 0 && d_x.empty()) break;
    std::vector<double> d_in(layer.in, 0.0);
    affine_transpose(layer, params, delta, d_in);
    if (l == 0) {
      for (std::size_t i = 0; i < layer.in; ++i) d_x[i] += d_in[i];
    } else {
      const auto& t = cache.acts[l];
      for (std::size_t i = 0; i < layer.in; ++i) d_in[i] *= 1.0 - t[i] * t[i];
      delta = std::move(d_in);
    }
  }
}

void check_rows(const ModelSpec& spec, std::span<const Row> rows) {
  if (rows.empty()) throw Error(ErrorCode::empty_batch, "no rows");
  for (const auto& r : rows) {
    if (r.x.size() != spec.t_in || r.y.size() != spec.t_out) {
      throw Error(ErrorCode::shape_mismatch, "row does not match model window sizes");
    }
  }
}

}  // namespace

std::vector<std::size_t> ModelSpec::layer_widths() const {
  std::vector<std::size_t> w{t_in};
  if (kind == ModelKind::mlp) w.insert(w.end(), hidden_dims.begin(), hidden_dims.end());
  w.push_back(t_out);
  return w;
}

void validate(const ModelSpec& spec) {
  if (spec.t_in == 0 || spec.t_out == 0 || spec.n_vars == 0) {
    throw Error(ErrorCode::invalid_argument, "model window sizes and variable count must be positive");
  }
  if (spec.kind == ModelKind::mlp) {
    if (spec.hidden_dims.empty()) throw Error(ErrorCode::invalid_argument, "mlp needs at least one hidden layer");
    for (auto h : spec.hidden_dims) {
      if (h == 0) throw Error(ErrorCode::invalid_argument, "hidden width must be positive");
    }
  }
}

std::size_t parameter_count(const ModelSpec& spec) {
  const auto widths = spec.layer_widths();
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) n += widths[l] * widths[l + 1] + widths[l + 1];
  return n;
}

ParameterVector init_params(const ModelSpec& spec, std::uint64_t seed) {
  validate(spec);
  Rng rng(seed);
  ParameterVector params(parameter_count(spec), 0.0);
  for (const auto& layer : layers_of(spec)) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
    for (std::size_t k = 0; k < layer.in * layer.out; ++k) {
      params[layer.w_off + k] = uniform_real(rng, -bound, bound);
    }
  }
  return params;
}

std::vector<double> forward_row(const ModelSpec& spec, std::span<const double> params,
                                std::span<const double> x) {
  check_params(spec, params);
  if (x.size() != spec.t_in) throw Error(ErrorCode::shape_mismatch, "input row length differs from t_in");
  Activations cache;
  cache.run(layers_of(spec), params, x);
  return std::move(cache.acts.back());
}

Matrix forward(const ModelSpec& spec, std::span<const double> params, const Matrix& x) {
  check_params(spec, params);
  if (x.cols() != spec.t_in) throw Error(ErrorCode::shape_mismatch, "input width differs from t_in");
  if (x.rows() != spec.n_vars) throw Error(ErrorCode::shape_mismatch, "input rows differ from n_vars");
  const auto layers = layers_of(spec);
  Matrix out(x.rows(), spec.t_out);
  Activations cache;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    cache.run(layers, params, x.row(r));
    const auto y = cache.output();
    std::copy(y.begin(), y.end(), out.row(r).begin());
  }
  return out;
}

std::vector<Row> rows_of(std::span<const WindowPair> batch) {
  std::vector<Row> rows;
  for (const auto& p : batch) {
    if (p.input.rows() != p.target.rows()) throw Error(ErrorCode::shape_mismatch, "input/target variable count");
    for (std::size_t v = 0; v < p.input.rows(); ++v) rows.push_back({p.input.row(v), p.target.row(v)});
  }
  return rows;
}

double mse_loss(const ModelSpec& spec, std::span<const double> params, std::span<const Row> rows) {
  check_params(spec, params);
  check_rows(spec, rows);
  const auto layers = layers_of(spec);
  Activations cache;
  double sum = 0.0;
  for (const auto& r : rows) {
    cache.run(layers, params, r.x);
    const auto out = cache.output();
    for (std::size_t k = 0; k < spec.t_out; ++k) sum += (out[k] - r.y[k]) * (out[k] - r.y[k]);
  }
  return sum / static_cast<double>(rows.size() * spec.t_out);
}

double mse_loss_grad(const ModelSpec& spec, std::span<const double> params, std::span<const Row> rows,
                     std::span<double> grad) {
  check_params(spec, params);
  check_rows(spec, rows);
  if (grad.size() != params.size()) throw Error(ErrorCode::shape_mismatch, "gradient buffer size");
  std::fill(grad.begin(), grad.end(), 0.0);
  const auto layers = layers_of(spec);
  const double scale = 2.0 / static_cast<double>(rows.size() * spec.t_out);
  Activations cache;
  double sum = 0.0;
  for (const auto& r : rows) {
    cache.run(layers, params, r.x);
    const auto out = cache.output();
    std::vector<double> delta(spec.t_out);
    for (std::size_t k = 0; k < spec.t_out; ++k) {
      const double e = out[k] - r.y[k];
      sum += e * e;
      delta[k] = scale * e;
    }
    backprop(layers, params, cache, std::move(delta), grad, {});
  }
  return sum / static_cast<double>(rows.size() * spec.t_out);
}

LossAndGrad loss_and_grad(const ModelSpec& spec, const ParameterVector& params,
                          std::span<const WindowPair> batch) {
  if (batch.empty()) throw Error(ErrorCode::empty_batch, "loss_and_grad needs at least one window");
  const auto rows = rows_of(batch);
  LossAndGrad out{0.0, ParameterVector(params.size())};
  out.loss = mse_loss_grad(spec, params, rows, out.grad);
  return out;
}

void forward_vjp(const ModelSpec& spec, std::span<const double> params, std::span<const double> x,
                 std::span<const double> d_out, std::span<double> d_params, std::span<double> d_x) {
  check_params(spec, params);
  if (x.size() != spec.t_in || d_out.size() != spec.t_out || d_params.size() != params.size() ||
      (!d_x.empty() && d_x.size() != spec.t_in)) {
    throw Error(ErrorCode::shape_mismatch, "forward_vjp buffer sizes");
  }
  const auto layers = layers_of(spec);
  Activations cache;
  cache.run(layers, params, x);
  backprop(layers, params, cache, std::vector<double>(d_out.begin(), d_out.end()), d_params, d_x);
}

void mse_grad_dot_vjp(const ModelSpec& spec, std::span<const double> params, std::span<const Row> rows,
                      std::span<const double> v, std::span<double> d_params,
                      std::span<const RowAdjoint> adj) {
  check_params(spec, params);
  check_rows(spec, rows);
  if (v.size() != params.size() || d_params.size() != params.size() || adj.size() != rows.size()) {
    throw Error(ErrorCode::shape_mismatch, "mse_grad_dot_vjp buffer sizes");
  }
  const auto layers = layers_of(spec);
  const std::size_t n_layers = layers.size();
  const double scale = 2.0 / static_cast<double>(rows.size() * spec.t_out);

  Activations cache;
  // tangents[l] = d(acts[l]) along v; ztan[l] = d(pre-activation of layer l) along v
  std::vector<std::vector<double>> tangents(n_layers + 1), ztan(n_layers);

  for (std::size_t r = 0; r < rows.size(); ++r) {
    cache.run(layers, params, rows[r].x);
    const auto& a = cache.acts;

    tangents[0].assign(spec.t_in, 0.0);
    for (std::size_t l = 0; l < n_layers; ++l) {
      const Layer& layer = layers[l];
      ztan[l].assign(layer.out, 0.0);
      affine(layer, v, a[l], ztan[l]);  // V a + c
      for (std::size_t o = 0; o < layer.out; ++o) {
        const double* w = params.data() + layer.w_off + o * layer.in;
        double acc = 0.0;
        for (std::size_t i = 0; i < layer.in; ++i) acc += w[i] * tangents[l][i];
        ztan[l][o] += acc;
      }
      tangents[l + 1] = ztan[l];
      if (l + 1 < n_layers) {
        for (std::size_t o = 0; o < layer.out; ++o) tangents[l + 1][o] *= 1.0 - a[l + 1][o] * a[l + 1][o];
      }
    }

    // phi = scale * (out - y) . tangent(out)
    std::vector<double> a_bar(spec.t_out), t_bar(spec.t_out);
    for (std::size_t k = 0; k < spec.t_out; ++k) {
      a_bar[k] = scale * tangents[n_layers][k];
      t_bar[k] = scale * (a[n_layers][k] - rows[r].y[k]);
      if (!adj[r].dy.empty()) adj[r].dy[k] -= a_bar[k];
    }

    for (std::size_t l = n_layers; l-- > 0;) {
      const Layer& layer = layers[l];
      std::vector<double> z_bar(layer.out), zt_bar(layer.out);
      if (l + 1 == n_layers) {
        z_bar = a_bar;
        zt_bar = t_bar;
      } else {
        for (std::size_t o = 0; o < layer.out; ++o) {
          const double t = a[l + 1][o];
          const double d1 = 1.0 - t * t;
          const double d2 = -2.0 * t * d1;
          zt_bar[o] = d1 * t_bar[o];
          z_bar[o] = d1 * a_bar[o] + d2 * ztan[l][o] * t_bar[o];
        }
      }
      outer_accumulate(layer, zt_bar, tangents[l], d_params);
      outer_accumulate(layer, z_bar, a[l], d_params);
      for (std::size_t o = 0; o < layer.out; ++o) d_params[layer.b_off + o] += z_bar[o];

      if (l == 0 && adj[r].dx.empty()) break;
      std::vector<double> next_a_bar(layer.in, 0.0), next_t_bar(layer.in, 0.0);
      affine_transpose(layer, v, zt_bar, next_a_bar);
      affine_transpose(layer, params, z_bar, next_a_bar);
      if (l == 0) {
        for (std::size_t i = 0; i < layer.in; ++i) adj[r].dx[i] += next_a_bar[i];
        break;
      }
      affine_transpose(layer, params, zt_bar, next_t_bar);
      a_bar = std::move(next_a_bar);
      t_bar = std::move(next_t_bar);
    }
  }
}

OptimizerState OptimizerState::sgd(std::size_t n) {
  return {OptimizerKind::sgd_momentum, std::vector<double>(n, 0.0), {}, 0};
}

OptimizerState OptimizerState::adam(std::size_t n) {
  return {OptimizerKind::adam, std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0};
}

void sgd_momentum_step(std::span<double> params, std::span<const double> grad, double lr,
                       double momentum, OptimizerState& state) {
  if (state.first.empty()) state = OptimizerState::sgd(params.size());
  if (grad.size() != params.size() || state.first.size() != params.size() ||
      state.kind != OptimizerKind::sgd_momentum) {
    throw Error(ErrorCode::shape_mismatch, "sgd state does not track these parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.first[i] = momentum * state.first[i] + grad[i];
    params[i] -= lr * state.first[i];
  }
  ++state.step;
}

void adam_step(std::span<double> params, std::span<const double> grad, double lr, const AdamHyper& hyper,
               OptimizerState& state) {
  if (!(hyper.beta1 >= 0.0 && hyper.beta1 < 1.0 && hyper.beta2 >= 0.0 && hyper.beta2 < 1.0)) {
    throw Error(ErrorCode::invalid_argument, "adam betas must lie in [0, 1)");
  }
  if (state.first.empty()) state = OptimizerState::adam(params.size());
  if (grad.size() != params.size() || state.first.size() != params.size() ||
      state.second.size() != params.size() || state.kind != OptimizerKind::adam) {
    throw Error(ErrorCode::shape_mismatch, "adam state does not track these parameters");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(hyper.beta1, t);
  const double c2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.first[i] = hyper.beta1 * state.first[i] + (1.0 - hyper.beta1) * grad[i];
    state.second[i] = hyper.beta2 * state.second[i] + (1.0 - hyper.beta2) * grad[i] * grad[i];
    const double m_hat = state.first[i] / c1;
    const double v_hat = state.second[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + hyper.eps);
  }
}

double param_sq_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::length_mismatch, "parameter vectors differ in length");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]) * (a[i] - b[i]);
  return sum;
}

}  // namespace ddtime
