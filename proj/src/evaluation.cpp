#include "probekit/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "probekit/error.hpp"
#include "probekit/numerics.hpp"

namespace probekit {

WeightScheme WeightScheme::from_name(std::string_view name) {
  if (name == "main") return main();
  if (name == "alt") return alt();
  throw validation_error("unknown weight scheme: " + std::string(name) +
                         " (expected main or alt)");
}

double WeightScheme::weight_for(DatasetRole role) const {
  if (role_is_attack(role)) return fnr_weight;
  if (role_is_hard_negative(role)) return hardneg_fpr_weight;
  return overtrigger_fpr_weight;
}

double probe_probability(const ProbeSpec& spec, const ProbeParams& params,
                         const Matrix& x) {
  return sigmoid(eval_logit(spec, params, x) + params.bias());
}

std::vector<double> score_dataset(const ProbeSpec& spec, const ProbeParams& params,
                                  std::span<const LabeledExample> examples) {
  std::vector<double> out;
  out.reserve(examples.size());
  for (const LabeledExample& e : examples)
    out.push_back(probe_probability(spec, params, e.activations));
  return out;
}

RateReport eval_rates(std::span<const double> probabilities, std::span<const int> labels,
                      std::span<const DatasetRole> roles, double tau,
                      const WeightScheme& scheme) {
  if (probabilities.size() != labels.size() || probabilities.size() != roles.size())
    throw contract_error("eval_rates: misaligned inputs");
  std::array<std::size_t, kRoleCount> errors{};
  std::array<std::size_t, kRoleCount> counts{};
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const std::size_t r = static_cast<std::size_t>(roles[i]);
    counts[r] += 1;
    const bool fired = probabilities[i] > tau;
    if (labels[i] == 1 ? !fired : fired) errors[r] += 1;
  }
  RateReport report;
  for (std::size_t r = 0; r < kRoleCount; ++r) {
    if (counts[r] == 0) continue;
    report.rates.push_back(RoleRate{static_cast<DatasetRole>(r),
                                    static_cast<double>(errors[r]) /
                                        static_cast<double>(counts[r]),
                                    counts[r]});
  }
  for (std::size_t r = 0; r < kRoleCount; ++r)
    if (counts[r] == 0) report.empty_roles.push_back(static_cast<DatasetRole>(r));
  report.weighted = weighted_error(report, scheme);
  return report;
}

double weighted_error(const RateReport& report, const WeightScheme& scheme) {
  if (report.rates.empty()) throw domain_error("weighted_error: empty report");
  double num = 0.0, den = 0.0;
  for (const RoleRate& r : report.rates) {
    const double w = scheme.weight_for(r.role);
    num += w * r.rate;
    den += w;
  }
  return num / den;
}

ThresholdPolicy select_threshold(std::span<const double> probabilities,
                                 std::span<const int> labels,
                                 std::span<const DatasetRole> roles,
                                 const WeightScheme& scheme) {
  if (probabilities.size() != labels.size() || probabilities.size() != roles.size())
    throw contract_error("select_threshold: misaligned inputs");
  bool has_pos = false, has_neg = false;
  for (int l : labels) (l == 1 ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg)
    throw domain_error("select_threshold: validation data must contain both polarities");

  std::vector<double> candidates(probabilities.begin(), probabilities.end());
  candidates.push_back(0.0);
  candidates.push_back(1.0);
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  double best_tau = 1.0;
  double best_err = std::numeric_limits<double>::infinity();
  for (double tau : candidates) {
    const double err = eval_rates(probabilities, labels, roles, tau, scheme).weighted;
    // <= so equal losses resolve toward the larger tau (candidates ascend)
    if (err <= best_err) {
      best_err = err;
      best_tau = tau;
    }
  }
  return ThresholdPolicy{best_tau};
}

double compute_auroc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw contract_error("compute_auroc: misaligned inputs");
  std::size_t n_pos = 0, n_neg = 0;
  for (int l : labels) (l == 1 ? n_pos : n_neg) += 1;
  if (n_pos == 0 || n_neg == 0)
    throw domain_error("compute_auroc: both classes must be present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Midranks over tied groups.
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]] == 1) pos_rank_sum += midrank;
    i = j + 1;
  }
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

std::string format_rate_report(const RateReport& report, const WeightScheme& scheme,
                               double tau) {
  std::ostringstream out;
  out << "role\terror\trate\tcount\tweight\n";
  for (const RoleRate& r : report.rates) {
    out << role_name(r.role) << '\t' << (role_is_attack(r.role) ? "FNR" : "FPR") << '\t'
        << r.rate << '\t' << r.count << '\t' << scheme.weight_for(r.role) << '\n';
  }
  for (DatasetRole role : report.empty_roles)
    out << role_name(role) << "\t-\t-\t0\t-\n";
  out << "weighted_error\t" << report.weighted << "\tscheme=" << scheme.name
      << "\ttau=" << tau << '\n';
  return out.str();
}

void write_scores_file(const std::string& path,
                       std::span<const LabeledExample> examples,
                       std::span<const double> probabilities, Split split) {
  if (examples.size() != probabilities.size())
    throw contract_error("write_scores_file: misaligned inputs");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw io_error("cannot open for writing: " + path);
  out.precision(17);
  for (std::size_t i = 0; i < examples.size(); ++i)
    out << examples[i].path << '\t' << probabilities[i] << '\t' << examples[i].label
        << '\t' << role_name(examples[i].role) << '\t' << split_name(split) << '\n';
  if (!out) throw io_error("write failed: " + path);
}

}  // namespace probekit
