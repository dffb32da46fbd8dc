#ifndef PROBEKIT_STATS_HPP
#define PROBEKIT_STATS_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "probekit/evaluation.hpp"
#include "probekit/training.hpp"

namespace probekit {

struct BootstrapConfig {
  std::size_t iterations = 20000;
  std::size_t k = 100;  // best-of-k selection size
  double low_percentile = 2.5;
  double high_percentile = 97.5;
  std::uint64_t seed = 0;
};

enum class CiMethod : std::uint8_t { KdeBootstrap, Binomial, CascadeQuadrature };

struct ConfidenceInterval {
  double low = 0.0;
  double high = 0.0;
  CiMethod method = CiMethod::KdeBootstrap;
};

// Probability that sweep A's best-of-k-by-validation record beats sweep B's
// under seed-level bootstrap resampling; ties count one half. Each side's
// resampling stream is derived from the sweep's content, so comparing a
// sweep against itself returns exactly 0.5 and
// compare(A, B) + compare(B, A) == 1 holds exactly.
double bootstrap_best_of_k_compare(const SeedSweep& a, const SeedSweep& b,
                                   const BootstrapConfig& config);

// Smoothed bootstrap of the argmin-validation statistic: logit-transform test
// losses, fit a 2-D Gaussian KDE over (val, logit-test) pairs with per-axis
// Scott bandwidth N^(-1/6) * sigma, resample N synthetic seeds per iteration,
// select by validation, invert, and report the percentile interval.
ConfidenceInterval kde_bootstrap_ci(const SeedSweep& sweep,
                                    const BootstrapConfig& config);

// Analytic interval for deterministic classifiers: weighted error plus/minus
// 1.96 * sqrt(sum_g (w_g / sum w)^2 p_g (1 - p_g) / n_g), clipped to [0, 1].
ConfidenceInterval binomial_ci(const RateReport& report, const WeightScheme& scheme);

struct HalfWidths {
  double below = 0.0;
  double above = 0.0;
};

// Quadrature combination of probe and expensive-model uncertainties at
// deferral fraction f, preserving asymmetry.
ConfidenceInterval cascade_ci(double point_estimate, const HalfWidths& probe,
                              const HalfWidths& expensive, double deferral_fraction);

// Percentile with linear interpolation between order statistics.
double percentile(std::vector<double> values, double pct);

// Row-beats-column probability matrix over named sweeps.
std::string format_significance_table(std::span<const std::string> names,
                                      std::span<const SeedSweep> sweeps,
                                      const BootstrapConfig& config);

std::string format_ci_report(std::span<const std::string> names,
                             std::span<const SeedSweep> sweeps,
                             const BootstrapConfig& config);

}  // namespace probekit

#endif  // PROBEKIT_STATS_HPP
