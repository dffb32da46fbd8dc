#include "probekit/numerics.hpp"

#include <algorithm>
#include <cmath>

#include "probekit/error.hpp"

namespace probekit {

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw domain_error("log_sum_exp: empty sequence");
  const double m = *std::max_element(values.begin(), values.end());
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - m);
  return m + std::log(acc);
}

std::vector<double> stable_softmax(std::span<const double> values) {
  if (values.empty()) throw domain_error("stable_softmax: empty sequence");
  const double m = *std::max_element(values.begin(), values.end());
  std::vector<double> out(values.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = std::exp(values[i] - m);
    acc += out[i];
  }
  for (double& v : out) v /= acc;
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double bce_loss(double p, int label) {
  p = std::clamp(p, kBceProbClamp, 1.0 - kBceProbClamp);
  return label ? -std::log(p) : -std::log(1.0 - p);
}

double bce_with_logit(double z, int label) { return bce_loss(sigmoid(z), label); }

AdamWState::AdamWState(const std::vector<Matrix>& params, AdamWConfig cfg) : config(cfg) {
  first_moment.reserve(params.size());
  second_moment.reserve(params.size());
  for (const Matrix& p : params) {
    first_moment.emplace_back(p.rows(), p.cols());
    second_moment.emplace_back(p.rows(), p.cols());
  }
}

void adamw_step(std::vector<Matrix>& params, const std::vector<Matrix>& grads,
                AdamWState& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size())
    throw contract_error("adamw_step: parameter/gradient count mismatch");
  const AdamWConfig& c = state.config;
  state.step += 1;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < params.size(); ++t) {
    require_same_shape(params[t], grads[t], "adamw_step");
    require_same_shape(params[t], state.first_moment[t], "adamw_step");
    double* p = params[t].data();
    const double* g = grads[t].data();
    double* m = state.first_moment[t].data();
    double* v = state.second_moment[t].data();
    const std::size_t n = params[t].size();
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= c.learning_rate * (m_hat / (std::sqrt(v_hat) + c.epsilon) +
                                 c.weight_decay * p[i]);
    }
  }
}

std::vector<Matrix> finite_diff_grad(
    const std::function<double(const std::vector<Matrix>&)>& f,
    const std::vector<Matrix>& params, double h) {
  std::vector<Matrix> grads;
  grads.reserve(params.size());
  std::vector<Matrix> work = params;
  for (std::size_t t = 0; t < params.size(); ++t) {
    Matrix g(params[t].rows(), params[t].cols());
    for (std::size_t i = 0; i < params[t].size(); ++i) {
      const double saved = work[t].data()[i];
      work[t].data()[i] = saved + h;
      const double up = f(work);
      work[t].data()[i] = saved - h;
      const double down = f(work);
      work[t].data()[i] = saved;
      g.data()[i] = (up - down) / (2.0 * h);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

}  // namespace probekit
