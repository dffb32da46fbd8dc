#ifndef PROBEKIT_NUMERICS_HPP
#define PROBEKIT_NUMERICS_HPP

#include <functional>
#include <span>
#include <vector>

#include "probekit/matrix.hpp"

namespace probekit {

// log(sum_j exp(v_j)) via the max-shift trick; safe for |v| up to ~700.
double log_sum_exp(std::span<const double> values);

// Softmax invariant under adding a constant; outputs sum to 1.
std::vector<double> stable_softmax(std::span<const double> values);

// Numerically stable on both tails.
double sigmoid(double x);

// log(1 + e^x) without overflow.
double softplus(double x);

// Binary cross entropy on a probability; p is clamped into
// [1e-12, 1 - 1e-12] so saturated sigmoids keep the loss finite.
double bce_loss(double p, int label);

// BCE(sigmoid(z), label) computed directly from the logit.
double bce_with_logit(double z, int label);

inline constexpr double kBceProbClamp = 1e-12;

struct AdamWConfig {
  double learning_rate = 1e-4;
  double weight_decay = 3e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamWState {
  AdamWState() = default;
  AdamWState(const std::vector<Matrix>& params, AdamWConfig config);

  std::uint64_t step = 0;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  AdamWConfig config;
};

// One bias-corrected AdamW update with decoupled weight decay: the decay
// term subtracts lr * wd * p directly instead of being folded into the
// gradient. Params are updated in place; the step counter advances.
void adamw_step(std::vector<Matrix>& params, const std::vector<Matrix>& grads,
                AdamWState& state);

// Central-difference gradient oracle, (f(p+h) - f(p-h)) / 2h per coordinate.
// Test-side reference for the analytic gradients; intentionally simple.
std::vector<Matrix> finite_diff_grad(
    const std::function<double(const std::vector<Matrix>&)>& f,
    const std::vector<Matrix>& params, double h);

}  // namespace probekit

#endif  // PROBEKIT_NUMERICS_HPP
