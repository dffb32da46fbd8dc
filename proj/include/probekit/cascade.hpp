#ifndef PROBEKIT_CASCADE_HPP
#define PROBEKIT_CASCADE_HPP

#include <span>
#include <string>
#include <vector>

#include "probekit/dataset.hpp"
#include "probekit/evaluation.hpp"

namespace probekit {

// Two probe-logit thresholds: negative below t0, positive at or above t1,
// defer to the expensive classifier inside the open band (t0, t1).
struct CascadePolicy {
  double t0 = 0.0;
  double t1 = 0.0;
};

// Per-sample losses, sorted ascending by probe logit. Each loss is the
// sample's contribution to the weighted error under the given decision, so
// summing per-sample losses over a policy reproduces weighted_error exactly.
struct SampleLoss {
  double logit = 0.0;
  double loss_neg = 0.0;   // loss if the probe classifies negative
  double loss_pos = 0.0;   // loss if the probe classifies positive
  double loss_llm = 0.0;   // loss if deferred
  std::size_t example = 0; // original index, stable tie-break
};

std::vector<SampleLoss> build_sample_losses(std::span<const double> logits,
                                            std::span<const int> labels,
                                            std::span<const DatasetRole> roles,
                                            std::span<const int> llm_decisions,
                                            const WeightScheme& scheme);

struct CascadeOutcome {
  std::vector<int> decisions;
  double deferral_fraction = 0.0;
  double cost = 0.0;            // per-sample: 1 probe unit + deferral * multiplier
  double weighted_error = 0.0;
};

CascadeOutcome apply_cascade(std::span<const double> logits,
                             std::span<const int> llm_decisions,
                             std::span<const int> labels,
                             std::span<const DatasetRole> roles,
                             const CascadePolicy& policy, const WeightScheme& scheme,
                             double cost_multiplier);

// Symmetric band around a decision threshold; delta = 0 defers nothing.
CascadePolicy band_cascade(double center, double half_width);

// L[k]: added error when the probe takes the k lowest-logit samples as
// negative; R[k]: the k highest as positive. Both length N+1 with curve(0)=0.
struct SavingsCurves {
  std::vector<double> left;
  std::vector<double> right;
};

SavingsCurves savings_curves(std::span<const SampleLoss> sorted_samples);

struct HullPoint {
  std::size_t k = 0;
  double y = 0.0;
};

// Minimal lower-hull vertex set over points (k, curve[k]); slopes strictly
// increase between consecutive edges.
std::vector<HullPoint> lower_convex_hull(std::span<const double> curve);

// Piecewise-linear interpolation of a hull at integer k.
double hull_value_at(std::span<const HullPoint> hull, std::size_t k);

enum class EdgeSource : std::uint8_t { Left, Right };

struct FrontierVertex {
  std::size_t saved = 0;       // LLM calls avoided (k_left + k_right)
  double added_error = 0.0;    // over the defer-everything baseline
  std::size_t k_left = 0;
  std::size_t k_right = 0;
};

struct FrontierEdge {
  EdgeSource source = EdgeSource::Left;
  std::size_t dk = 0;
  double dy = 0.0;
};

struct Frontier {
  std::vector<FrontierVertex> vertices;  // strictly increasing slopes along the walk
  std::vector<FrontierEdge> edges;       // edges[i] connects vertices[i] -> vertices[i+1]
};

// Merges the two hulls' edge lists by slope, truncating at k_left + k_right
// = total_samples; equals the Pareto frontier of the Minkowski sum of the
// two curves.
Frontier minkowski_frontier(std::span<const HullPoint> left_hull,
                            std::span<const HullPoint> right_hull,
                            std::size_t total_samples);

// (k_left, k_right) composition the frontier walk realizes at a savings
// level; interpolates along at most one source curve.
struct FrontierComposition {
  std::size_t k_left = 0;
  std::size_t k_right = 0;
};
FrontierComposition frontier_composition_at(const Frontier& frontier, std::size_t saved);

// Frontier value at an integer savings level through the shared hull
// interpolation, so oracle comparisons see identical arithmetic.
double frontier_value_at(const Frontier& frontier, std::span<const HullPoint> left_hull,
                         std::span<const HullPoint> right_hull, std::size_t saved);

// Minimizes cost_weight * (calls not saved) + error_weight * added_error over
// vertices; no randomization needed at a vertex. Also maps the winning vertex
// back to deterministic thresholds against the sorted samples.
struct OptimalVertex {
  std::size_t index = 0;
  FrontierVertex vertex;
  CascadePolicy policy;
};

OptimalVertex optimal_vertex(const Frontier& frontier,
                             std::span<const SampleLoss> sorted_samples,
                             double cost_weight, double error_weight);

CascadePolicy vertex_policy(std::span<const SampleLoss> sorted_samples,
                            std::size_t k_left, std::size_t k_right);

// Mock expensive-scorer file: lines of (example id, decision, optional
// probability).
struct ExpensiveScore {
  std::string id;
  int decision = 0;
  double probability = -1.0;  // negative when absent
};
std::vector<ExpensiveScore> load_expensive_scores(const std::string& path);
void save_expensive_scores(std::span<const ExpensiveScore> scores,
                           const std::string& path);

void write_frontier_file(const Frontier& frontier,
                         std::span<const SampleLoss> sorted_samples,
                         double base_error, double cost_multiplier,
                         const std::string& path);

}  // namespace probekit

#endif  // PROBEKIT_CASCADE_HPP
