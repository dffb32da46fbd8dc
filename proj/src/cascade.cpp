#include "probekit/cascade.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "probekit/error.hpp"

namespace probekit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_sorted(std::span<const SampleLoss> samples, const char* where) {
  for (std::size_t i = 1; i < samples.size(); ++i) {
    const SampleLoss& a = samples[i - 1];
    const SampleLoss& b = samples[i];
    if (a.logit > b.logit || (a.logit == b.logit && a.example > b.example))
      throw contract_error(std::string(where) + ": samples not sorted by probe logit");
  }
}

}  // namespace

std::vector<SampleLoss> build_sample_losses(std::span<const double> logits,
                                            std::span<const int> labels,
                                            std::span<const DatasetRole> roles,
                                            std::span<const int> llm_decisions,
                                            const WeightScheme& scheme) {
  const std::size_t n = logits.size();
  if (labels.size() != n || roles.size() != n || llm_decisions.size() != n)
    throw contract_error("build_sample_losses: misaligned inputs");
  if (n == 0) throw domain_error("build_sample_losses: no samples");

  std::array<std::size_t, kRoleCount> role_counts{};
  for (DatasetRole r : roles) role_counts[static_cast<std::size_t>(r)] += 1;
  double weight_sum = 0.0;
  for (std::size_t r = 0; r < kRoleCount; ++r)
    if (role_counts[r] > 0) weight_sum += scheme.weight_for(static_cast<DatasetRole>(r));

  std::vector<SampleLoss> samples(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = static_cast<std::size_t>(roles[i]);
    // Per-sample unit: one misclassification in this role moves the weighted
    // error by exactly this much.
    const double unit =
        scheme.weight_for(roles[i]) /
        (weight_sum * static_cast<double>(role_counts[r]));
    samples[i].logit = logits[i];
    samples[i].example = i;
    samples[i].loss_neg = labels[i] == 1 ? unit : 0.0;
    samples[i].loss_pos = labels[i] == 0 ? unit : 0.0;
    samples[i].loss_llm = llm_decisions[i] != labels[i] ? unit : 0.0;
  }
  std::sort(samples.begin(), samples.end(), [](const SampleLoss& a, const SampleLoss& b) {
    return a.logit != b.logit ? a.logit < b.logit : a.example < b.example;
  });
  return samples;
}

CascadeOutcome apply_cascade(std::span<const double> logits,
                             std::span<const int> llm_decisions,
                             std::span<const int> labels,
                             std::span<const DatasetRole> roles,
                             const CascadePolicy& policy, const WeightScheme& scheme,
                             double cost_multiplier) {
  const std::size_t n = logits.size();
  if (labels.size() != n || roles.size() != n || llm_decisions.size() != n)
    throw contract_error("apply_cascade: misaligned inputs");
  if (policy.t0 > policy.t1) throw contract_error("apply_cascade: requires t0 <= t1");
  if (n == 0) throw domain_error("apply_cascade: no samples");

  CascadeOutcome out;
  out.decisions.resize(n);
  std::size_t deferred = 0;
  std::array<std::size_t, kRoleCount> errors{};
  std::array<std::size_t, kRoleCount> counts{};
  for (std::size_t i = 0; i < n; ++i) {
    int decision;
    if (logits[i] <= policy.t0) {
      decision = 0;
    } else if (logits[i] >= policy.t1) {
      decision = 1;
    } else {
      decision = llm_decisions[i];
      ++deferred;
    }
    out.decisions[i] = decision;
    const std::size_t r = static_cast<std::size_t>(roles[i]);
    counts[r] += 1;
    if (decision != labels[i]) errors[r] += 1;
  }
  out.deferral_fraction = static_cast<double>(deferred) / static_cast<double>(n);
  out.cost = 1.0 + out.deferral_fraction * cost_multiplier;

  double num = 0.0, den = 0.0;
  for (std::size_t r = 0; r < kRoleCount; ++r) {
    if (counts[r] == 0) continue;
    const double w = scheme.weight_for(static_cast<DatasetRole>(r));
    num += w * static_cast<double>(errors[r]) / static_cast<double>(counts[r]);
    den += w;
  }
  out.weighted_error = num / den;
  return out;
}

CascadePolicy band_cascade(double center, double half_width) {
  if (half_width < 0.0) throw contract_error("band_cascade: half width must be >= 0");
  return CascadePolicy{center - half_width, center + half_width};
}

SavingsCurves savings_curves(std::span<const SampleLoss> sorted_samples) {
  require_sorted(sorted_samples, "savings_curves");
  const std::size_t n = sorted_samples.size();
  SavingsCurves curves;
  curves.left.resize(n + 1, 0.0);
  curves.right.resize(n + 1, 0.0);
  for (std::size_t k = 1; k <= n; ++k) {
    const SampleLoss& s = sorted_samples[k - 1];
    curves.left[k] = curves.left[k - 1] + (s.loss_neg - s.loss_llm);
  }
  for (std::size_t k = 1; k <= n; ++k) {
    const SampleLoss& s = sorted_samples[n - k];
    curves.right[k] = curves.right[k - 1] + (s.loss_pos - s.loss_llm);
  }
  return curves;
}

std::vector<HullPoint> lower_convex_hull(std::span<const double> curve) {
  std::vector<HullPoint> hull;
  auto cross = [](const HullPoint& a, const HullPoint& b, const HullPoint& c) {
    return (static_cast<double>(b.k) - static_cast<double>(a.k)) * (c.y - a.y) -
           (b.y - a.y) * (static_cast<double>(c.k) - static_cast<double>(a.k));
  };
  for (std::size_t k = 0; k < curve.size(); ++k) {
    const HullPoint p{k, curve[k]};
    // cross <= 0 also drops collinear interior points, keeping slopes
    // strictly increasing.
    while (hull.size() >= 2 && cross(hull[hull.size() - 2], hull.back(), p) <= 0.0)
      hull.pop_back();
    hull.push_back(p);
  }
  return hull;
}

double hull_value_at(std::span<const HullPoint> hull, std::size_t k) {
  if (hull.empty()) throw contract_error("hull_value_at: empty hull");
  if (k < hull.front().k || k > hull.back().k)
    throw contract_error("hull_value_at: k outside hull domain");
  std::size_t lo = 0, hi = hull.size() - 1;
  while (lo + 1 < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (hull[mid].k <= k)
      lo = mid;
    else
      hi = mid;
  }
  if (hull[lo].k == k) return hull[lo].y;
  if (hull[hi].k == k) return hull[hi].y;
  const HullPoint& a = hull[lo];
  const HullPoint& b = hull[hi];
  const double t = static_cast<double>(k - a.k) / static_cast<double>(b.k - a.k);
  return a.y + (b.y - a.y) * t;
}

Frontier minkowski_frontier(std::span<const HullPoint> left_hull,
                            std::span<const HullPoint> right_hull,
                            std::size_t total_samples) {
  struct Edge {
    double slope;
    std::size_t dk;
    double dy;
    EdgeSource source;
  };
  auto edges_of = [](std::span<const HullPoint> hull, EdgeSource source) {
    std::vector<Edge> edges;
    for (std::size_t i = 1; i < hull.size(); ++i) {
      const std::size_t dk = hull[i].k - hull[i - 1].k;
      const double dy = hull[i].y - hull[i - 1].y;
      edges.push_back(Edge{dy / static_cast<double>(dk), dk, dy, source});
    }
    return edges;
  };
  std::vector<Edge> left = edges_of(left_hull, EdgeSource::Left);
  std::vector<Edge> right = edges_of(right_hull, EdgeSource::Right);

  Frontier frontier;
  frontier.vertices.push_back(FrontierVertex{0, 0.0, 0, 0});

  std::size_t li = 0, ri = 0;
  std::size_t saved = 0, k_left = 0, k_right = 0;
  double err = 0.0;
  while ((li < left.size() || ri < right.size()) && saved < total_samples) {
    // Flattest marginal rate first; ties prefer the left curve.
    const bool take_left =
        ri >= right.size() ||
        (li < left.size() && left[li].slope <= right[ri].slope);
    const Edge& e = take_left ? left[li] : right[ri];
    std::size_t steps = e.dk;
    double dy = e.dy;
    bool truncated = false;
    if (saved + steps > total_samples) {
      steps = total_samples - saved;
      dy = e.slope * static_cast<double>(steps);
      truncated = true;
    }
    saved += steps;
    err += dy;
    if (take_left)
      k_left += steps;
    else
      k_right += steps;
    frontier.vertices.push_back(FrontierVertex{saved, err, k_left, k_right});
    frontier.edges.push_back(FrontierEdge{e.source, steps, dy});
    if (truncated) break;
    if (take_left)
      ++li;
    else
      ++ri;
  }
  return frontier;
}

FrontierComposition frontier_composition_at(const Frontier& frontier, std::size_t saved) {
  if (frontier.vertices.empty() || saved > frontier.vertices.back().saved)
    throw contract_error("frontier_composition_at: savings level out of range");
  for (std::size_t i = 0; i < frontier.vertices.size(); ++i) {
    const FrontierVertex& v = frontier.vertices[i];
    if (v.saved == saved) return FrontierComposition{v.k_left, v.k_right};
    if (v.saved > saved) {
      const FrontierVertex& prev = frontier.vertices[i - 1];
      const std::size_t offset = saved - prev.saved;
      FrontierComposition c{prev.k_left, prev.k_right};
      if (frontier.edges[i - 1].source == EdgeSource::Left)
        c.k_left += offset;
      else
        c.k_right += offset;
      return c;
    }
  }
  throw contract_error("frontier_composition_at: unreachable");
}

double frontier_value_at(const Frontier& frontier, std::span<const HullPoint> left_hull,
                         std::span<const HullPoint> right_hull, std::size_t saved) {
  const FrontierComposition c = frontier_composition_at(frontier, saved);
  return hull_value_at(left_hull, c.k_left) + hull_value_at(right_hull, c.k_right);
}

CascadePolicy vertex_policy(std::span<const SampleLoss> sorted_samples,
                            std::size_t k_left, std::size_t k_right) {
  require_sorted(sorted_samples, "vertex_policy");
  const std::size_t n = sorted_samples.size();
  if (k_left + k_right > n)
    throw contract_error("vertex_policy: k_left + k_right exceeds sample count");
  CascadePolicy policy;
  if (k_left == 0)
    policy.t0 = -kInf;
  else if (k_left == n)
    policy.t0 = kInf;
  else
    policy.t0 = 0.5 * (sorted_samples[k_left - 1].logit + sorted_samples[k_left].logit);
  if (k_right == 0)
    policy.t1 = kInf;
  else if (k_right == n)
    policy.t1 = -kInf;
  else
    policy.t1 =
        0.5 * (sorted_samples[n - k_right - 1].logit + sorted_samples[n - k_right].logit);
  return policy;
}

OptimalVertex optimal_vertex(const Frontier& frontier,
                             std::span<const SampleLoss> sorted_samples,
                             double cost_weight, double error_weight) {
  if (frontier.vertices.empty()) throw domain_error("optimal_vertex: empty frontier");
  const double n = static_cast<double>(sorted_samples.size());
  std::size_t best = 0;
  double best_value = kInf;
  for (std::size_t i = 0; i < frontier.vertices.size(); ++i) {
    const FrontierVertex& v = frontier.vertices[i];
    const double value = cost_weight * (n - static_cast<double>(v.saved)) +
                         error_weight * v.added_error;
    if (value < best_value) {
      best_value = value;
      best = i;
    }
  }
  const FrontierVertex& v = frontier.vertices[best];
  return OptimalVertex{best, v, vertex_policy(sorted_samples, v.k_left, v.k_right)};
}

std::vector<ExpensiveScore> load_expensive_scores(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open expensive-score file: " + path);
  std::vector<ExpensiveScore> scores;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    ExpensiveScore s;
    std::string decision;
    if (!(fields >> s.id >> decision))
      throw validation_error("expensive-score file: malformed line " +
                             std::to_string(line_no) + " in " + path);
    if (decision != "0" && decision != "1")
      throw validation_error("expensive-score file: decision must be 0 or 1 at line " +
                             std::to_string(line_no) + " in " + path);
    s.decision = decision == "1" ? 1 : 0;
    double prob;
    if (fields >> prob) s.probability = prob;
    scores.push_back(std::move(s));
  }
  return scores;
}

void save_expensive_scores(std::span<const ExpensiveScore> scores,
                           const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw io_error("cannot open for writing: " + path);
  out.precision(17);
  for (const ExpensiveScore& s : scores) {
    out << s.id << '\t' << s.decision;
    if (s.probability >= 0.0) out << '\t' << s.probability;
    out << '\n';
  }
  if (!out) throw io_error("write failed: " + path);
}

void write_frontier_file(const Frontier& frontier,
                         std::span<const SampleLoss> sorted_samples,
                         double base_error, double cost_multiplier,
                         const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw io_error("cannot open for writing: " + path);
  out.precision(17);
  const double n = static_cast<double>(sorted_samples.size());
  out << "saved\tdeferral_fraction\tcost\tadded_error\ttotal_error\tk_left\tk_right"
         "\tt0\tt1\tedge\n";
  for (std::size_t i = 0; i < frontier.vertices.size(); ++i) {
    const FrontierVertex& v = frontier.vertices[i];
    const double deferral = (n - static_cast<double>(v.saved)) / n;
    const CascadePolicy policy = vertex_policy(sorted_samples, v.k_left, v.k_right);
    out << v.saved << '\t' << deferral << '\t' << 1.0 + deferral * cost_multiplier
        << '\t' << v.added_error << '\t' << base_error + v.added_error << '\t'
        << v.k_left << '\t' << v.k_right << '\t' << policy.t0 << '\t' << policy.t1
        << '\t'
        << (i == 0 ? "-"
                   : (frontier.edges[i - 1].source == EdgeSource::Left ? "left" : "right"))
        << '\n';
  }
  if (!out) throw io_error("write failed: " + path);
}

}  // namespace probekit
