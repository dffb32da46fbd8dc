#include "probekit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "probekit/error.hpp"
#include "probekit/numerics.hpp"
#include "probekit/rng.hpp"

namespace probekit {

namespace {

struct SweepPoint {
  std::uint64_t seed;
  double val;
  double test;
};

std::vector<SweepPoint> usable_points(const SeedSweep& sweep) {
  std::vector<SweepPoint> out;
  for (const SeedRecord& r : sweep.records)
    if (!r.degenerate) out.push_back(SweepPoint{r.seed, r.validation_loss, r.test_loss});
  return out;
}

std::uint64_t content_hash(const std::vector<SweepPoint>& points) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  for (const SweepPoint& p : points) {
    mix(p.seed);
    std::uint64_t bits;
    std::memcpy(&bits, &p.val, 8);
    mix(bits);
    std::memcpy(&bits, &p.test, 8);
    mix(bits);
  }
  return h;
}

// Argmin-validation over a resampled multiset; ties resolve to the lowest
// seed, matching sweep selection.
const SweepPoint& select_resampled(const std::vector<SweepPoint>& points,
                                   std::span<const std::size_t> draws) {
  const SweepPoint* best = &points[draws[0]];
  for (std::size_t i = 1; i < draws.size(); ++i) {
    const SweepPoint& cand = points[draws[i]];
    if (cand.val < best->val || (cand.val == best->val && cand.seed < best->seed))
      best = &cand;
  }
  return *best;
}

}  // namespace

double bootstrap_best_of_k_compare(const SeedSweep& a, const SeedSweep& b,
                                   const BootstrapConfig& config) {
  if (config.iterations == 0 || config.k == 0)
    throw validation_error("bootstrap config: iterations and k must be >= 1");
  const std::vector<SweepPoint> pa = usable_points(a);
  const std::vector<SweepPoint> pb = usable_points(b);
  if (pa.empty() || pb.empty())
    throw domain_error("bootstrap_best_of_k_compare: empty usable sweep");

  // Streams keyed by sweep content, not argument position: identical sweeps
  // draw identically, which makes the tie rule exact.
  Rng rng_a(mix_seed(config.seed, content_hash(pa)));
  Rng rng_b(mix_seed(config.seed, content_hash(pb)));

  std::vector<std::size_t> draws_a(config.k), draws_b(config.k);
  double wins = 0.0;
  for (std::size_t it = 0; it < config.iterations; ++it) {
    for (std::size_t i = 0; i < config.k; ++i)
      draws_a[i] = static_cast<std::size_t>(rng_a.below(pa.size()));
    for (std::size_t i = 0; i < config.k; ++i)
      draws_b[i] = static_cast<std::size_t>(rng_b.below(pb.size()));
    const double ta = select_resampled(pa, draws_a).test;
    const double tb = select_resampled(pb, draws_b).test;
    if (ta < tb)
      wins += 1.0;
    else if (ta == tb)
      wins += 0.5;
  }
  return wins / static_cast<double>(config.iterations);
}

double percentile(std::vector<double> values, double pct) {
  if (values.empty()) throw domain_error("percentile: empty sample");
  std::sort(values.begin(), values.end());
  const double pos = pct / 100.0 * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
  if (lo == hi) return values[lo];
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

ConfidenceInterval kde_bootstrap_ci(const SeedSweep& sweep,
                                    const BootstrapConfig& config) {
  const std::vector<SweepPoint> points = usable_points(sweep);
  if (points.empty()) throw domain_error("kde_bootstrap_ci: empty usable sweep");
  const std::size_t n = points.size();

  std::vector<double> vals(n), logits(n);
  for (std::size_t i = 0; i < n; ++i) {
    vals[i] = points[i].val;
    const double t = std::clamp(points[i].test, 1e-9, 1.0 - 1e-9);
    logits[i] = std::log(t / (1.0 - t));
  }

  auto sample_std = [n](const std::vector<double>& x) {
    if (n < 2) return 0.0;
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    double acc = 0.0;
    for (double v : x) acc += (v - mean) * (v - mean);
    return std::sqrt(acc / static_cast<double>(n - 1));
  };
  // Scott's rule in two dimensions: N^(-1/(d+4)) with d = 2.
  const double factor = std::pow(static_cast<double>(n), -1.0 / 6.0);
  const double h_val = factor * sample_std(vals);
  const double h_logit = factor * sample_std(logits);

  Rng rng = Rng(config.seed).fork("kde-bootstrap");
  std::vector<double> selected;
  selected.reserve(config.iterations);
  for (std::size_t it = 0; it < config.iterations; ++it) {
    double best_val = 0.0, best_logit = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t idx = static_cast<std::size_t>(rng.below(n));
      const double v = vals[idx] + h_val * rng.normal();
      const double l = logits[idx] + h_logit * rng.normal();
      if (i == 0 || v < best_val) {
        best_val = v;
        best_logit = l;
      }
    }
    selected.push_back(sigmoid(best_logit));
  }

  ConfidenceInterval ci;
  ci.method = CiMethod::KdeBootstrap;
  ci.low = std::clamp(percentile(selected, config.low_percentile), 0.0, 1.0);
  ci.high = std::clamp(percentile(selected, config.high_percentile), 0.0, 1.0);
  return ci;
}

ConfidenceInterval binomial_ci(const RateReport& report, const WeightScheme& scheme) {
  if (report.rates.empty()) throw domain_error("binomial_ci: empty report");
  double weight_sum = 0.0;
  for (const RoleRate& r : report.rates) weight_sum += scheme.weight_for(r.role);
  double variance = 0.0;
  for (const RoleRate& r : report.rates) {
    const double share = scheme.weight_for(r.role) / weight_sum;
    variance += share * share * r.rate * (1.0 - r.rate) / static_cast<double>(r.count);
  }
  const double mean = weighted_error(report, scheme);
  const double margin = 1.96 * std::sqrt(variance);
  ConfidenceInterval ci;
  ci.method = CiMethod::Binomial;
  ci.low = std::clamp(mean - margin, 0.0, 1.0);
  ci.high = std::clamp(mean + margin, 0.0, 1.0);
  return ci;
}

ConfidenceInterval cascade_ci(double point_estimate, const HalfWidths& probe,
                              const HalfWidths& expensive, double deferral_fraction) {
  if (deferral_fraction < 0.0 || deferral_fraction > 1.0)
    throw validation_error("cascade_ci: deferral fraction must lie in [0, 1]");
  const double keep = 1.0 - deferral_fraction;
  const double lo = std::sqrt((keep * probe.below) * (keep * probe.below) +
                              (deferral_fraction * expensive.below) *
                                  (deferral_fraction * expensive.below));
  const double hi = std::sqrt((keep * probe.above) * (keep * probe.above) +
                              (deferral_fraction * expensive.above) *
                                  (deferral_fraction * expensive.above));
  ConfidenceInterval ci;
  ci.method = CiMethod::CascadeQuadrature;
  ci.low = std::clamp(point_estimate - lo, 0.0, 1.0);
  ci.high = std::clamp(point_estimate + hi, 0.0, 1.0);
  return ci;
}

std::string format_significance_table(std::span<const std::string> names,
                                      std::span<const SeedSweep> sweeps,
                                      const BootstrapConfig& config) {
  if (names.size() != sweeps.size())
    throw contract_error("format_significance_table: misaligned inputs");
  std::ostringstream out;
  out.precision(6);
  out << "row_beats_column";
  for (const std::string& name : names) out << '\t' << name;
  out << '\n';
  for (std::size_t i = 0; i < sweeps.size(); ++i) {
    out << names[i];
    for (std::size_t j = 0; j < sweeps.size(); ++j)
      out << '\t' << bootstrap_best_of_k_compare(sweeps[i], sweeps[j], config);
    out << '\n';
  }
  return out.str();
}

std::string format_ci_report(std::span<const std::string> names,
                             std::span<const SeedSweep> sweeps,
                             const BootstrapConfig& config) {
  if (names.size() != sweeps.size())
    throw contract_error("format_ci_report: misaligned inputs");
  std::ostringstream out;
  out.precision(6);
  out << "method\tbest_val_test\tci_low\tci_high\tusable_seeds\n";
  for (std::size_t i = 0; i < sweeps.size(); ++i) {
    const SweepSummary summary = sweep_summary(sweeps[i]);
    const ConfidenceInterval ci = kde_bootstrap_ci(sweeps[i], config);
    out << names[i] << '\t' << summary.best_val_test << '\t' << ci.low << '\t'
        << ci.high << '\t' << summary.usable_count << '\n';
  }
  return out.str();
}

}  // namespace probekit
