#ifndef PROBEKIT_EVALUATION_HPP
#define PROBEKIT_EVALUATION_HPP

#include <span>
#include <string>
#include <vector>

#include "probekit/dataset.hpp"
#include "probekit/probe.hpp"

namespace probekit {

// Role weights for the aggregate error. MAIN is 5:2:50 (FNR : hard-negative
// FPR : overtriggering FPR); ALT swaps the FNR weight down to 1.
struct WeightScheme {
  double fnr_weight = 5.0;
  double hardneg_fpr_weight = 2.0;
  double overtrigger_fpr_weight = 50.0;
  std::string name = "main";

  static WeightScheme main() { return WeightScheme{5.0, 2.0, 50.0, "main"}; }
  static WeightScheme alt() { return WeightScheme{1.0, 2.0, 50.0, "alt"}; }
  static WeightScheme from_name(std::string_view name);

  double weight_for(DatasetRole role) const;
};

struct RoleRate {
  DatasetRole role = DatasetRole::ScOvertrigger;
  double rate = 0.0;        // FPR for benign roles, FNR for attack roles
  std::size_t count = 0;
};

struct RateReport {
  std::vector<RoleRate> rates;            // roles with at least one example
  std::vector<DatasetRole> empty_roles;   // flagged, excluded from the aggregate
  double weighted = 0.0;
};

// Classification fires strictly above tau: decision = 1 iff p > tau.
struct ThresholdPolicy {
  double tau = 0.5;
};

double probe_probability(const ProbeSpec& spec, const ProbeParams& params,
                         const Matrix& x);

// One probability per example under the spec's eval aggregation, order
// preserved.
std::vector<double> score_dataset(const ProbeSpec& spec, const ProbeParams& params,
                                  std::span<const LabeledExample> examples);

RateReport eval_rates(std::span<const double> probabilities, std::span<const int> labels,
                      std::span<const DatasetRole> roles, double tau,
                      const WeightScheme& scheme);

// Weighted mean of per-role rates; roles absent from the report drop out of
// both numerator and denominator.
double weighted_error(const RateReport& report, const WeightScheme& scheme);

// Exhaustive minimizer over thresholds at every distinct predicted
// probability plus the 0/1 boundaries; ties resolve toward the larger tau
// (fires less).
ThresholdPolicy select_threshold(std::span<const double> probabilities,
                                 std::span<const int> labels,
                                 std::span<const DatasetRole> roles,
                                 const WeightScheme& scheme);

// Rank-based AUROC with ties counted one half.
double compute_auroc(std::span<const double> scores, std::span<const int> labels);

std::string format_rate_report(const RateReport& report, const WeightScheme& scheme,
                               double tau);

void write_scores_file(const std::string& path,
                       std::span<const LabeledExample> examples,
                       std::span<const double> probabilities, Split split);

}  // namespace probekit

#endif  // PROBEKIT_EVALUATION_HPP
