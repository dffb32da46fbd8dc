#ifndef PROBEKIT_STREAMING_HPP
#define PROBEKIT_STREAMING_HPP

#include <span>
#include <vector>

#include "probekit/probe.hpp"

namespace probekit {

// Incremental single-pass inference. Per-head state is O(1) for softmax and
// hard-max aggregation (running average plus log-normalizer, or a running
// max) and O(w) for rolling windows (a ring buffer of the last w score/value
// pairs). The softmax recursion follows
//   A_{n+1} = A_n + beta_{n+1} (v_{n+1} - A_n),  beta_{n+1} = exp(s_{n+1} - l_{n+1})
// with the log-normalizer l maintained by max-shifted updates, so scores of
// several hundred never materialize sum(e^s).
//
// A stream is owned by one consumer at a time; the referenced spec and params
// must outlive it. Distinct sequences stream independently in parallel.
class ProbeStream {
 public:
  ProbeStream(const ProbeSpec& spec, const ProbeParams& params);

  // Consumes one token activation (length d) and returns the logit over the
  // prefix seen so far.
  double update(std::span<const double> token);

  // Aggregate logit over tokens consumed so far; requires at least one token.
  double logit() const;

  // sigmoid(logit + b); requires at least one token.
  double score() const;

  std::size_t tokens_seen() const { return tokens_; }

  // Structural memory bound: per-head ring capacity (0 when no ring exists).
  std::size_t ring_capacity() const { return ring_capacity_; }

 private:
  const ProbeSpec* spec_;
  const ProbeParams* params_;
  Aggregation mode_ = Aggregation::Softmax;
  std::size_t tokens_ = 0;
  std::size_t ring_capacity_ = 0;

  double running_mean_ = 0.0;  // linear / mlp mean
  double ema_ = 0.0;
  double ema_max_ = 0.0;
  std::vector<double> head_avg_;      // softmax running averages
  std::vector<double> head_lognorm_;  // softmax log-normalizers
  std::vector<double> head_max_;      // hard-max / rolling running maxima
  std::vector<double> ring_scores_;   // heads x window, chronological ring
  std::vector<double> ring_values_;
  std::vector<double> pool_max_;      // gated bipolar per-coordinate extrema
  std::vector<double> pool_min_;
};

// Max |streaming - batch| logit deviation over every prefix of a sequence.
double stream_batch_deviation(const ProbeSpec& spec, const ProbeParams& params,
                              const Matrix& sequence);

}  // namespace probekit

#endif  // PROBEKIT_STREAMING_HPP
