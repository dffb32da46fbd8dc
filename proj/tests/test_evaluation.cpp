#include <cmath>
#include <vector>

#include "doctest.h"
#include "probekit/error.hpp"
#include "probekit/evaluation.hpp"
#include "probekit/numerics.hpp"
#include "test_support.hpp"

using namespace probekit;
using namespace probekit::testsupport;

namespace {

std::vector<DatasetRole> fill_roles(std::span<const int> labels) {
  std::vector<DatasetRole> roles;
  for (int l : labels)
    roles.push_back(l == 1 ? DatasetRole::ScAttack : DatasetRole::ScOvertrigger);
  return roles;
}

}  // namespace

TEST_CASE("weight scheme presets") {
  const WeightScheme main = WeightScheme::main();
  CHECK(main.fnr_weight == 5.0);
  CHECK(main.hardneg_fpr_weight == 2.0);
  CHECK(main.overtrigger_fpr_weight == 50.0);
  const WeightScheme alt = WeightScheme::alt();
  CHECK(alt.fnr_weight == 1.0);
  CHECK(alt.weight_for(DatasetRole::ScHardNegative) == 2.0);
  CHECK(alt.weight_for(DatasetRole::LcRandomTraffic) == 50.0);
  CHECK_THROWS_AS(WeightScheme::from_name("median"), validation_error);
}

TEST_CASE("score_dataset basics") {
  ProbeSpec spec = ProbeSpec::make(Architecture::LinearMean, 3);
  ProbeParams zero;
  zero.tensors.push_back({"weight", Matrix(1, 3)});
  zero.tensors.push_back({"bias", Matrix::scalar(0.0)});

  Rng rng(1);
  std::vector<LabeledExample> examples;
  examples.push_back(LabeledExample{random_matrix(rng, 3, 4), 0,
                                    DatasetRole::ScOvertrigger, ""});
  CHECK(score_dataset(spec, zero, examples)[0] == 0.5);

  ProbeParams biased = zero;
  biased.at("bias")(0, 0) = 60.0;
  CHECK(score_dataset(spec, biased, examples)[0] == doctest::Approx(1.0).epsilon(1e-15));

  // Random probe matches sigmoid(forward + b).
  ProbeParams p = init_params(spec, 5);
  p.at("bias")(0, 0) = 0.3;
  const double expected =
      sigmoid(forward_linear_mean(p, examples[0].activations) + 0.3);
  CHECK(score_dataset(spec, p, examples)[0] == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("eval_rates hand cases") {
  const WeightScheme scheme = WeightScheme::main();
  {
    const std::vector<double> probs{0.9, 0.2};
    const std::vector<int> labels{1, 0};
    const auto roles = fill_roles(labels);
    const RateReport r = eval_rates(probs, labels, roles, 0.5, scheme);
    REQUIRE(r.rates.size() == 2);
    for (const RoleRate& roleRate : r.rates) CHECK(roleRate.rate == 0.0);
    CHECK(r.weighted == 0.0);
  }
  {
    // tau = 1.0: nothing fires, so FPR 0 and FNR 1.
    const std::vector<double> probs{0.9, 0.8, 0.2};
    const std::vector<int> labels{1, 1, 0};
    const auto roles = fill_roles(labels);
    const RateReport r = eval_rates(probs, labels, roles, 1.0, scheme);
    for (const RoleRate& roleRate : r.rates)
      CHECK(roleRate.rate == (role_is_attack(roleRate.role) ? 1.0 : 0.0));
  }
  {
    // tau = 0 with strictly positive probabilities: everything fires, FNR 0.
    const std::vector<double> probs{0.9, 0.01, 0.2};
    const std::vector<int> labels{1, 1, 0};
    const auto roles = fill_roles(labels);
    const RateReport r = eval_rates(probs, labels, roles, 0.0, scheme);
    for (const RoleRate& roleRate : r.rates)
      CHECK(roleRate.rate == (role_is_attack(roleRate.role) ? 0.0 : 1.0));
  }
  {
    // Mixed six-example case, counted by hand: attacks 2/3 caught at 0.5,
    // benigns 1/3 misfire.
    const std::vector<double> probs{0.9, 0.6, 0.3, 0.7, 0.4, 0.1};
    const std::vector<int> labels{1, 1, 1, 0, 0, 0};
    const auto roles = fill_roles(labels);
    const RateReport r = eval_rates(probs, labels, roles, 0.5, scheme);
    for (const RoleRate& roleRate : r.rates) {
      if (role_is_attack(roleRate.role))
        CHECK(roleRate.rate == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
      else
        CHECK(roleRate.rate == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    }
    // (50 * 1/3 + 5 * 1/3) / 55 = 1/3.
    CHECK(r.weighted == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
}

TEST_CASE("weighted_error worked example and bounds") {
  RateReport report;
  report.rates.push_back(RoleRate{DatasetRole::ScOvertrigger, 0.01, 100});
  report.rates.push_back(RoleRate{DatasetRole::ScAttack, 0.10, 100});
  const double main_err = weighted_error(report, WeightScheme::main());
  CHECK(std::abs(main_err - 1.0 / 55.0) < 1e-12);
  const double alt_err = weighted_error(report, WeightScheme::alt());
  CHECK(std::abs(alt_err - 0.6 / 51.0) < 1e-12);

  RateReport zeros = report;
  zeros.rates[0].rate = 0.0;
  zeros.rates[1].rate = 0.0;
  CHECK(weighted_error(zeros, WeightScheme::main()) == 0.0);

  RateReport ones = report;
  ones.rates[0].rate = 1.0;
  ones.rates[1].rate = 1.0;
  CHECK(weighted_error(ones, WeightScheme::main()) == doctest::Approx(1.0).epsilon(1e-15));

  // Convex combination stays within [min rate, max rate].
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    RateReport random_report;
    double lo = 1.0, hi = 0.0;
    for (std::size_t r = 0; r < kRoleCount; ++r) {
      const double rate = rng.uniform();
      random_report.rates.push_back(RoleRate{static_cast<DatasetRole>(r), rate, 10});
      lo = std::min(lo, rate);
      hi = std::max(hi, rate);
    }
    const double err = weighted_error(random_report, WeightScheme::main());
    CHECK(err >= lo - 1e-15);
    CHECK(err <= hi + 1e-15);
  }
}

TEST_CASE("select_threshold separable, tied, and degenerate cases") {
  const WeightScheme scheme = WeightScheme::main();
  {
    const std::vector<double> probs{0.1, 0.2, 0.8, 0.9};
    const std::vector<int> labels{0, 0, 1, 1};
    const auto roles = fill_roles(labels);
    const ThresholdPolicy policy = select_threshold(probs, labels, roles, scheme);
    CHECK(policy.tau == 0.2);  // the largest zero-error candidate
    CHECK(eval_rates(probs, labels, roles, policy.tau, scheme).weighted == 0.0);
  }
  {
    // One shared score: all-negative beats all-positive under main weights,
    // and the tie between tau = 0.5 and tau = 1 resolves to the larger.
    const std::vector<double> probs{0.5, 0.5};
    const std::vector<int> labels{0, 1};
    const auto roles = fill_roles(labels);
    CHECK(select_threshold(probs, labels, roles, scheme).tau == 1.0);
  }
  {
    const std::vector<double> probs{0.7, 0.7, 0.7};
    const std::vector<int> labels{0, 1, 1};
    const auto roles = fill_roles(labels);
    CHECK(select_threshold(probs, labels, roles, scheme).tau == 1.0);
  }
  {
    const std::vector<double> probs{0.4, 0.6};
    const std::vector<int> labels{0, 0};
    const auto roles = fill_roles(labels);
    CHECK_THROWS_AS(select_threshold(probs, labels, roles, scheme), domain_error);
  }
}

TEST_CASE("select_threshold matches a dense-grid oracle") {
  Rng rng(7);
  const WeightScheme scheme = WeightScheme::main();
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 4 + rng.below(12);
    std::vector<double> probs(n);
    std::vector<int> labels(n);
    labels[0] = 0;
    labels[1] = 1;
    for (std::size_t i = 0; i < n; ++i) {
      probs[i] = rng.uniform();
      if (i >= 2) labels[i] = static_cast<int>(rng.below(2));
    }
    const auto roles = fill_roles(labels);
    const ThresholdPolicy policy = select_threshold(probs, labels, roles, scheme);
    const double achieved =
        eval_rates(probs, labels, roles, policy.tau, scheme).weighted;
    double best_grid = 1e300;
    for (int g = 0; g <= 10000; ++g) {
      const double tau = static_cast<double>(g) / 10000.0;
      best_grid = std::min(
          best_grid, eval_rates(probs, labels, roles, tau, scheme).weighted);
    }
    CHECK(achieved <= best_grid + 1e-12);
  }
}

TEST_CASE("threshold selection is invariant under monotone score transforms") {
  Rng rng(9);
  const WeightScheme scheme = WeightScheme::main();
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 6 + rng.below(10);
    std::vector<double> probs(n), squashed(n);
    std::vector<int> labels(n);
    labels[0] = 0;
    labels[1] = 1;
    for (std::size_t i = 0; i < n; ++i) {
      probs[i] = rng.uniform();
      if (i >= 2) labels[i] = static_cast<int>(rng.below(2));
      squashed[i] = probs[i] / (2.0 - probs[i]);  // strictly increasing on [0, 1]
    }
    const auto roles = fill_roles(labels);
    const ThresholdPolicy a = select_threshold(probs, labels, roles, scheme);
    const ThresholdPolicy b = select_threshold(squashed, labels, roles, scheme);
    for (std::size_t i = 0; i < n; ++i)
      CHECK((probs[i] > a.tau) == (squashed[i] > b.tau));
    CHECK(eval_rates(probs, labels, roles, a.tau, scheme).weighted ==
          doctest::Approx(eval_rates(squashed, labels, roles, b.tau, scheme).weighted)
              .epsilon(1e-13));
  }
}

TEST_CASE("auroc basics and brute force") {
  {
    const std::vector<double> scores{0.1, 0.2, 0.8, 0.9};
    const std::vector<int> labels{0, 0, 1, 1};
    CHECK(compute_auroc(scores, labels) == 1.0);
  }
  {
    const std::vector<double> scores{0.5, 0.5, 0.5, 0.5};
    const std::vector<int> labels{0, 1, 0, 1};
    CHECK(compute_auroc(scores, labels) == 0.5);
  }
  {
    const std::vector<double> scores{0.9, 0.3, 0.5, 0.5, 0.1};
    const std::vector<int> labels{1, 0, 1, 0, 0};
    // Pairwise brute force with half-credit ties.
    double wins = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (labels[i] != 1) continue;
      for (std::size_t j = 0; j < scores.size(); ++j) {
        if (labels[j] != 0) continue;
        ++pairs;
        if (scores[i] > scores[j]) wins += 1.0;
        else if (scores[i] == scores[j]) wins += 0.5;
      }
    }
    CHECK(compute_auroc(scores, labels) ==
          doctest::Approx(wins / static_cast<double>(pairs)).epsilon(1e-15));
  }
  {
    const std::vector<double> scores{0.2, 0.4};
    const std::vector<int> labels{1, 1};
    CHECK_THROWS_AS(compute_auroc(scores, labels), domain_error);
  }
}

TEST_CASE("auroc is invariant under strictly increasing transforms") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 5 + rng.below(20);
    std::vector<double> scores(n), mapped(n);
    std::vector<int> labels(n);
    labels[0] = 0;
    labels[1] = 1;
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = rng.normal();
      if (i >= 2) labels[i] = static_cast<int>(rng.below(2));
      mapped[i] = std::exp(scores[i]) + 3.0 * scores[i];
    }
    CHECK(compute_auroc(scores, labels) ==
          doctest::Approx(compute_auroc(mapped, labels)).epsilon(1e-14));
  }
}

TEST_CASE("rate report formatting includes the weighted line") {
  RateReport report;
  report.rates.push_back(RoleRate{DatasetRole::ScOvertrigger, 0.01, 100});
  report.rates.push_back(RoleRate{DatasetRole::ScAttack, 0.10, 50});
  report.weighted = weighted_error(report, WeightScheme::main());
  const std::string text = format_rate_report(report, WeightScheme::main(), 0.5);
  CHECK(text.find("SC_OT") != std::string::npos);
  CHECK(text.find("FNR") != std::string::npos);
  CHECK(text.find("weighted_error") != std::string::npos);
}
