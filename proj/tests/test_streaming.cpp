#include <cmath>
#include <vector>

#include "doctest.h"
#include "probekit/error.hpp"
#include "probekit/evaluation.hpp"
#include "probekit/numerics.hpp"
#include "probekit/streaming.hpp"
#include "test_support.hpp"

using namespace probekit;
using namespace probekit::testsupport;

namespace {

std::vector<double> column_of(const Matrix& x, std::size_t j) {
  std::vector<double> token(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) token[i] = x(i, j);
  return token;
}

constexpr Architecture kAllArchitectures[] = {
    Architecture::LinearMean,       Architecture::LinearEma,
    Architecture::MlpMean,          Architecture::Attention,
    Architecture::MultiMax,         Architecture::RollingAttention,
    Architecture::AlphaEvolveEarly, Architecture::AlphaEvolveGatedBipolar,
};

}  // namespace

TEST_CASE("softmax streaming hand recursion") {
  // Scores all zero, values 2 then 4: A_1 = 2, beta_2 = 1/2, A_2 = 3.
  ProbeSpec spec = ProbeSpec::make(Architecture::Attention, 2);
  spec.mlp_widths = {};
  spec.heads = 1;
  ProbeParams p;
  Matrix q(1, 2), v(1, 2);
  q(0, 1) = 1.0;  // second coordinate always zero below
  v(0, 0) = 1.0;
  p.tensors.push_back({"query", q});
  p.tensors.push_back({"value", v});
  p.tensors.push_back({"bias", Matrix::scalar(0.0)});

  ProbeStream stream(spec, p);
  CHECK(stream.update(std::vector<double>{2.0, 0.0}) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(stream.update(std::vector<double>{4.0, 0.0}) == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("single token equals the batch forward exactly") {
  Rng rng(1);
  for (Architecture arch : kAllArchitectures) {
    Rng local = rng.fork(static_cast<std::uint64_t>(arch));
    ProbeSpec spec = small_spec(arch, local);
    const ProbeParams params = init_params(spec, 3);
    const Matrix x = random_matrix(local, spec.input_dim, 1);
    ProbeStream stream(spec, params);
    const double streamed = stream.update(column_of(x, 0));
    CHECK(streamed == eval_logit(spec, params, x));
  }
}

TEST_CASE("streaming equals batch on every prefix for every architecture") {
  Rng rng(2);
  for (Architecture arch : kAllArchitectures) {
    for (int trial = 0; trial < 3; ++trial) {
      Rng local = rng.fork(static_cast<std::uint64_t>(arch) * 10 + trial);
      ProbeSpec spec = small_spec(arch, local);
      const ProbeParams params = init_params(spec, local.next_u64());
      const std::size_t n = 1 + local.below(160);
      const Matrix x = random_matrix(local, spec.input_dim, n);
      INFO("architecture ", architecture_name(arch), " n ", n);
      CHECK(stream_batch_deviation(spec, params, x) < 1e-9);
    }
  }
}

TEST_CASE("long random stream stays within 1e-9 of batch") {
  Rng rng(3);
  ProbeSpec spec = ProbeSpec::make(Architecture::Attention, 6);
  spec.mlp_widths = {};
  spec.heads = 3;
  const ProbeParams params = init_params(spec, 5);
  const std::size_t n = 1000;
  // Tokens scaled so per-head scores reach roughly +/-30.
  const Matrix x = random_matrix(rng, 6, n, 18.0);
  ProbeStream stream(spec, params);
  double streamed = 0.0;
  for (std::size_t j = 0; j < n; ++j) streamed = stream.update(column_of(x, j));
  const double batch = eval_logit(spec, params, x);
  CHECK(std::isfinite(streamed));
  CHECK(std::abs(streamed - batch) < 1e-9);
}

TEST_CASE("per-token scores of several hundred stay finite") {
  ProbeSpec spec = ProbeSpec::make(Architecture::Attention, 2);
  spec.mlp_widths = {};
  spec.heads = 1;
  ProbeParams p;
  Matrix q(1, 2), v(1, 2);
  q(0, 0) = 1.0;
  v(0, 1) = 1.0;
  p.tensors.push_back({"query", q});
  p.tensors.push_back({"value", v});
  p.tensors.push_back({"bias", Matrix::scalar(0.0)});
  ProbeStream stream(spec, p);
  Rng rng(4);
  for (int j = 0; j < 64; ++j) {
    const double score = -500.0 + 1000.0 * rng.uniform();
    const double logit = stream.update(std::vector<double>{score, rng.normal()});
    CHECK(std::isfinite(logit));
  }
}

TEST_CASE("stream_score matches score_dataset end to end") {
  Rng rng(5);
  ProbeSpec spec = ProbeSpec::make(Architecture::RollingAttention, 5);
  spec.mlp_widths = {4};
  spec.heads = 2;
  spec.window = 3;
  ProbeParams params = init_params(spec, 7);
  params.at("bias")(0, 0) = 0.4;
  const Matrix x = random_matrix(rng, 5, 40);

  std::vector<LabeledExample> examples;
  examples.push_back(LabeledExample{x, 1, DatasetRole::ScAttack, ""});
  const double batch_prob = score_dataset(spec, params, examples)[0];

  ProbeStream stream(spec, params);
  for (std::size_t j = 0; j < x.cols(); ++j) stream.update(column_of(x, j));
  CHECK(std::abs(stream.score() - batch_prob) < 1e-12);

  // Monotone in the bias.
  ProbeParams higher = params;
  higher.at("bias")(0, 0) = 1.4;
  ProbeStream stream2(spec, higher);
  for (std::size_t j = 0; j < x.cols(); ++j) stream2.update(column_of(x, j));
  CHECK(stream2.score() > stream.score());
}

TEST_CASE("empty stream refuses to score") {
  ProbeSpec spec = ProbeSpec::make(Architecture::MultiMax, 4);
  spec.mlp_widths = {};
  const ProbeParams params = init_params(spec, 1);
  ProbeStream stream(spec, params);
  CHECK_THROWS_AS(stream.logit(), domain_error);
  CHECK_THROWS_AS(stream.score(), domain_error);
  CHECK(stream.tokens_seen() == 0);

  // Two fresh streams are interchangeable: same updates, same state.
  ProbeStream a(spec, params), b(spec, params);
  const std::vector<double> token{1.0, -2.0, 0.5, 3.0};
  CHECK(a.update(token) == b.update(token));
}

TEST_CASE("dimension mismatch is rejected") {
  ProbeSpec spec = ProbeSpec::make(Architecture::LinearMean, 3);
  const ProbeParams params = init_params(spec, 1);
  ProbeStream stream(spec, params);
  CHECK_THROWS_AS(stream.update(std::vector<double>{1.0, 2.0}), contract_error);
}

TEST_CASE("state footprint tracks the window, not the sequence") {
  ProbeSpec spec = ProbeSpec::make(Architecture::RollingAttention, 4);
  spec.mlp_widths = {};
  spec.heads = 2;
  spec.window = 7;
  const ProbeParams params = init_params(spec, 2);
  ProbeStream stream(spec, params);
  CHECK(stream.ring_capacity() == 7);

  ProbeSpec plain = ProbeSpec::make(Architecture::Attention, 4);
  plain.mlp_widths = {};
  const ProbeParams pp = init_params(plain, 2);
  ProbeStream fixed(plain, pp);
  CHECK(fixed.ring_capacity() == 0);
}

TEST_CASE("rolling streaming tracks the window max exactly") {
  // Window means computed identically in stream and batch order: exact match.
  Rng rng(6);
  ProbeSpec spec = ProbeSpec::make(Architecture::RollingAttention, 3);
  spec.mlp_widths = {};
  spec.heads = 2;
  spec.window = 4;
  const ProbeParams params = init_params(spec, 11);
  const Matrix x = random_matrix(rng, 3, 64);
  ProbeStream stream(spec, params);
  double streamed = 0.0;
  for (std::size_t j = 0; j < x.cols(); ++j) streamed = stream.update(column_of(x, j));
  CHECK(streamed == eval_logit(spec, params, x));
}

TEST_CASE("eval aggregation drives the stream for attention-family probes") {
  Rng rng(7);
  ProbeSpec spec = ProbeSpec::make(Architecture::MultiMax, 4);
  spec.mlp_widths = {3};
  spec.heads = 2;
  spec.train_aggregation = Aggregation::Softmax;  // "Attn Trained" variant
  spec.eval_aggregation = Aggregation::HardMax;
  const ProbeParams params = init_params(spec, 13);
  const Matrix x = random_matrix(rng, 4, 30);
  ProbeStream stream(spec, params);
  double streamed = 0.0;
  for (std::size_t j = 0; j < x.cols(); ++j) streamed = stream.update(column_of(x, j));
  CHECK(streamed == doctest::Approx(forward_multimax(params, x)).epsilon(1e-12));
}
