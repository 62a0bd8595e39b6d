#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "tqn/rng.hpp"

namespace tqn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Raised when optimization produces a non-finite loss; the harness aborts the
// run with diagnostics instead of continuing on garbage.
struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NetworkConfig {
  int input_size = 0;
  std::vector<int> hidden;  // trunk widths, ReLU activations
  int output_size = 0;      // one Q-value per action, linear
  bool dueling = false;
  int stream_hidden = 64;  // width of the value/advantage stream hidden layer

  bool operator==(const NetworkConfig&) const = default;
};

inline void validate(const NetworkConfig& config) {
  if (config.input_size < 1) throw std::invalid_argument("network: input size must be >= 1");
  if (config.output_size < 1) throw std::invalid_argument("network: output size must be >= 1");
  for (int width : config.hidden)
    if (width < 1) throw std::invalid_argument("network: hidden widths must be >= 1");
  if (config.dueling && config.stream_hidden < 1)
    throw std::invalid_argument("network: stream width must be >= 1");
}

struct DenseLayer {
  Matrix w;  // out x in
  Vector b;
};

// Parameters in a fixed canonical layer order (trunk first, then the plain
// output layer, or the value stream followed by the advantage stream). The
// order is load-bearing: initialization draws, Adam state, soft updates, and
// checkpoints all walk it.
struct QNetworkParams {
  NetworkConfig config;
  std::vector<DenseLayer> layers;
};

namespace detail {

// (out, in) shapes of every layer in canonical order.
inline std::vector<std::pair<int, int>> layer_shapes(const NetworkConfig& config) {
  validate(config);
  std::vector<std::pair<int, int>> shapes;
  int width = config.input_size;
  for (int h : config.hidden) {
    shapes.emplace_back(h, width);
    width = h;
  }
  if (!config.dueling) {
    shapes.emplace_back(config.output_size, width);
  } else {
    shapes.emplace_back(config.stream_hidden, width);  // value stream hidden
    shapes.emplace_back(1, config.stream_hidden);      // value output
    shapes.emplace_back(config.stream_hidden, width);  // advantage stream hidden
    shapes.emplace_back(config.output_size, config.stream_hidden);  // advantage output
  }
  return shapes;
}

}  // namespace detail

// Uniform init in ±sqrt(6 / (fan_in + fan_out)), zero biases. Weights are
// filled row-major so the draw order is pinned.
inline QNetworkParams make_network(const NetworkConfig& config, Rng& rng) {
  QNetworkParams params;
  params.config = config;
  for (const auto& [out, in] : detail::layer_shapes(config)) {
    DenseLayer layer{Matrix::Zero(out, in), Vector::Zero(out)};
    const double limit = std::sqrt(6.0 / (in + out));
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) layer.w(r, c) = uniform_real(rng, -limit, limit);
    params.layers.push_back(std::move(layer));
  }
  return params;
}

inline QNetworkParams make_zero_network(const NetworkConfig& config) {
  QNetworkParams params;
  params.config = config;
  for (const auto& [out, in] : detail::layer_shapes(config))
    params.layers.push_back({Matrix::Zero(out, in), Vector::Zero(out)});
  return params;
}

// Q_a = v + A_a - mean(A): the mean-subtracted aggregation that pins the
// value/advantage decomposition to a unique solution.
inline Vector dueling_combine(double v, const Vector& advantages) {
  if (advantages.size() == 0) throw std::domain_error("dueling_combine: empty advantage vector");
  return (advantages.array() + (v - advantages.mean())).matrix();
}

namespace detail {

struct ForwardCache {
  std::vector<Vector> trunk_in;   // input to each trunk layer
  std::vector<Vector> trunk_pre;  // pre-activation of each trunk layer
  Vector trunk_out;               // final trunk activation (or the raw input)
  Vector value_pre, value_act;    // dueling value stream
  Vector adv_pre, adv_act;        // dueling advantage stream
  Vector advantages;
  double value = 0.0;
  Vector q;
};

inline ForwardCache forward_cached(const QNetworkParams& params, const Vector& input) {
  const NetworkConfig& config = params.config;
  if (input.size() != config.input_size)
    throw std::domain_error("forward_q: input length " + std::to_string(input.size()) +
                            " does not match network input size " +
                            std::to_string(config.input_size));
  ForwardCache cache;
  const std::size_t trunk_count = config.hidden.size();
  Vector h = input;
  for (std::size_t i = 0; i < trunk_count; ++i) {
    cache.trunk_in.push_back(h);
    Vector pre = params.layers[i].w * h + params.layers[i].b;
    cache.trunk_pre.push_back(pre);
    h = pre.cwiseMax(0.0);
  }
  cache.trunk_out = h;
  if (!config.dueling) {
    const DenseLayer& out = params.layers[trunk_count];
    cache.q = out.w * h + out.b;
    return cache;
  }
  const DenseLayer& vh = params.layers[trunk_count];
  const DenseLayer& vo = params.layers[trunk_count + 1];
  const DenseLayer& ah = params.layers[trunk_count + 2];
  const DenseLayer& ao = params.layers[trunk_count + 3];
  cache.value_pre = vh.w * h + vh.b;
  cache.value_act = cache.value_pre.cwiseMax(0.0);
  cache.value = (vo.w * cache.value_act + vo.b)(0);
  cache.adv_pre = ah.w * h + ah.b;
  cache.adv_act = cache.adv_pre.cwiseMax(0.0);
  cache.advantages = ao.w * cache.adv_act + ao.b;
  cache.q = dueling_combine(cache.value, cache.advantages);
  return cache;
}

// Accumulates parameter gradients for one sample given dL/dQ. Returns nothing;
// grads mirrors params.layers.
inline void backward(const QNetworkParams& params, const ForwardCache& cache, const Vector& dq,
                     std::vector<DenseLayer>& grads) {
  const NetworkConfig& config = params.config;
  const std::size_t trunk_count = config.hidden.size();
  Vector dtrunk;  // dL/d(trunk output)
  if (!config.dueling) {
    const DenseLayer& out = params.layers[trunk_count];
    grads[trunk_count].w.noalias() += dq * cache.trunk_out.transpose();
    grads[trunk_count].b += dq;
    dtrunk.noalias() = out.w.transpose() * dq;
  } else {
    const DenseLayer& vh = params.layers[trunk_count];
    const DenseLayer& vo = params.layers[trunk_count + 1];
    const DenseLayer& ah = params.layers[trunk_count + 2];
    const DenseLayer& ao = params.layers[trunk_count + 3];
    // Q_a = v + A_a - mean(A): dv = sum(dq), dA = dq - mean(dq).
    const double dv = dq.sum();
    const Vector da = (dq.array() - dq.mean()).matrix();

    grads[trunk_count + 1].w.noalias() += dv * cache.value_act.transpose();
    grads[trunk_count + 1].b(0) += dv;
    Vector dvalue_act = vo.w.transpose() * dv;
    Vector dvalue_pre =
        (cache.value_pre.array() > 0.0).select(dvalue_act.array(), 0.0).matrix();
    grads[trunk_count].w.noalias() += dvalue_pre * cache.trunk_out.transpose();
    grads[trunk_count].b += dvalue_pre;

    grads[trunk_count + 3].w.noalias() += da * cache.adv_act.transpose();
    grads[trunk_count + 3].b += da;
    Vector dadv_act = ao.w.transpose() * da;
    Vector dadv_pre = (cache.adv_pre.array() > 0.0).select(dadv_act.array(), 0.0).matrix();
    grads[trunk_count + 2].w.noalias() += dadv_pre * cache.trunk_out.transpose();
    grads[trunk_count + 2].b += dadv_pre;

    dtrunk.noalias() = vh.w.transpose() * dvalue_pre;
    dtrunk.noalias() += ah.w.transpose() * dadv_pre;
  }
  for (std::size_t i = trunk_count; i-- > 0;) {
    const Vector dpre = (cache.trunk_pre[i].array() > 0.0).select(dtrunk.array(), 0.0).matrix();
    grads[i].w.noalias() += dpre * cache.trunk_in[i].transpose();
    grads[i].b += dpre;
    if (i > 0) dtrunk.noalias() = params.layers[i].w.transpose() * dpre;
  }
}

}  // namespace detail

inline Vector forward_q(const QNetworkParams& params, const Vector& input) {
  return detail::forward_cached(params, input).q;
}

struct AdamState {
  double learning_rate = 0.01;
  static constexpr double beta1 = 0.9;
  static constexpr double beta2 = 0.999;
  static constexpr double epsilon = 1e-8;
  long step = 0;
  std::vector<DenseLayer> m;  // first moments, mirroring params.layers
  std::vector<DenseLayer> v;  // second moments
};

inline AdamState make_adam(const QNetworkParams& params, double learning_rate) {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("adam: learning rate must be > 0");
  AdamState adam;
  adam.learning_rate = learning_rate;
  for (const DenseLayer& layer : params.layers) {
    adam.m.push_back({Matrix::Zero(layer.w.rows(), layer.w.cols()), Vector::Zero(layer.b.size())});
    adam.v.push_back({Matrix::Zero(layer.w.rows(), layer.w.cols()), Vector::Zero(layer.b.size())});
  }
  return adam;
}

namespace detail {

template <class Tensor>
inline void adam_apply(Tensor& param, Tensor& m, Tensor& v, const Tensor& grad,
                       const AdamState& adam, double bias1, double bias2) {
  m = AdamState::beta1 * m + (1.0 - AdamState::beta1) * grad;
  v = (AdamState::beta2 * v.array() + (1.0 - AdamState::beta2) * grad.array().square()).matrix();
  const auto m_hat = m.array() / bias1;
  const auto v_hat = v.array() / bias2;
  param.array() -= adam.learning_rate * m_hat / (v_hat.sqrt() + AdamState::epsilon);
}

}  // namespace detail

struct LossGradients {
  double loss = 0.0;
  std::vector<double> abs_td_errors;  // per sample, for priority refresh
  std::vector<DenseLayer> grads;      // mirrors params.layers
};

// Weighted squared-TD-error loss and its parameter gradients:
//   loss = mean_i is_weight_i * (Q(input_i)[action_i] - target_i)^2
// with gradients flowing only through the taken action's output.
inline LossGradients compute_loss_gradients(const QNetworkParams& params,
                                            const std::vector<Vector>& inputs,
                                            const std::vector<int>& actions,
                                            const std::vector<double>& targets,
                                            const std::vector<double>& is_weights) {
  const std::size_t n = inputs.size();
  if (n == 0) throw std::invalid_argument("loss gradients: empty batch");
  if (actions.size() != n || targets.size() != n || is_weights.size() != n)
    throw std::invalid_argument("loss gradients: batch arrays differ in length");

  LossGradients result;
  result.grads.reserve(params.layers.size());
  for (const DenseLayer& layer : params.layers)
    result.grads.push_back(
        {Matrix::Zero(layer.w.rows(), layer.w.cols()), Vector::Zero(layer.b.size())});

  result.abs_td_errors.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(targets[i])) throw TrainingError("loss gradients: non-finite target");
    const auto cache = detail::forward_cached(params, inputs[i]);
    if (actions[i] < 0 || actions[i] >= cache.q.size())
      throw std::invalid_argument("loss gradients: action index out of range");
    const double td = cache.q(actions[i]) - targets[i];
    result.abs_td_errors.push_back(std::abs(td));
    result.loss += is_weights[i] * td * td;
    Vector dq = Vector::Zero(cache.q.size());
    dq(actions[i]) = 2.0 * is_weights[i] * td / static_cast<double>(n);
    detail::backward(params, cache, dq, result.grads);
  }
  result.loss /= static_cast<double>(n);
  if (!std::isfinite(result.loss))
    throw TrainingError("loss gradients: loss diverged to non-finite");
  return result;
}

struct StepDiagnostics {
  double loss = 0.0;
  std::vector<double> abs_td_errors;  // per sample, for priority refresh
};

// One Adam update on the weighted squared-TD-error loss.
inline StepDiagnostics gradient_step(QNetworkParams& params, AdamState& adam,
                                     const std::vector<Vector>& inputs,
                                     const std::vector<int>& actions,
                                     const std::vector<double>& targets,
                                     const std::vector<double>& is_weights) {
  if (adam.m.size() != params.layers.size())
    throw std::invalid_argument("gradient_step: Adam state does not mirror the parameters");
  LossGradients lg = compute_loss_gradients(params, inputs, actions, targets, is_weights);

  ++adam.step;
  const double bias1 = 1.0 - std::pow(AdamState::beta1, static_cast<double>(adam.step));
  const double bias2 = 1.0 - std::pow(AdamState::beta2, static_cast<double>(adam.step));
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    detail::adam_apply(params.layers[i].w, adam.m[i].w, adam.v[i].w, lg.grads[i].w, adam, bias1,
                       bias2);
    detail::adam_apply(params.layers[i].b, adam.m[i].b, adam.v[i].b, lg.grads[i].b, adam, bias1,
                       bias2);
  }
  return {lg.loss, std::move(lg.abs_td_errors)};
}

// target <- (1 - rate) * target + rate * online, elementwise.
inline void soft_update(QNetworkParams& target, const QNetworkParams& online, double rate) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw std::invalid_argument("soft_update: rate outside [0, 1]");
  if (!(target.config == online.config))
    throw std::invalid_argument("soft_update: mismatched network configurations");
  for (std::size_t i = 0; i < target.layers.size(); ++i) {
    target.layers[i].w = (1.0 - rate) * target.layers[i].w + rate * online.layers[i].w;
    target.layers[i].b = (1.0 - rate) * target.layers[i].b + rate * online.layers[i].b;
  }
}

}  // namespace tqn
