#ifndef PROBEKIT_TRAINING_HPP
#define PROBEKIT_TRAINING_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "probekit/dataset.hpp"
#include "probekit/evaluation.hpp"
#include "probekit/probe.hpp"

namespace probekit {

struct TrainConfig {
  std::size_t epochs = 1000;
  double learning_rate = 1e-4;
  double weight_decay = 3e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::uint64_t seed = 0;

  void validate() const;
};

// Validation losses at this sentinel mark failed runs.
inline constexpr double kMaxPenaltyLoss = 1.0;

struct TrainResult {
  ProbeParams params;
  std::vector<double> loss_history;  // one mean full-batch loss per epoch
};

// Full-batch AdamW on mean BCE (plus architecture regularizers) for exactly
// config.epochs steps. Deterministic for fixed (spec, config, data) and any
// worker count: gradients accumulate over a fixed shard structure. Throws
// domain_error on single-class data or a non-finite loss.
TrainResult train_probe(const ProbeSpec& spec, std::span<const LabeledExample> examples,
                        const TrainConfig& config, std::size_t workers = 1);

struct SeedRecord {
  std::uint64_t seed = 0;
  double validation_loss = 0.0;  // weighted val error at this seed's own threshold
  double test_loss = 0.0;        // weighted test error at the same threshold
  double tau = 0.5;
  bool degenerate = false;
  ProbeParams params;
  std::string params_path;  // filled when the sweep is persisted
};

struct SeedSweep {
  std::vector<SeedRecord> records;  // sorted by seed

  std::vector<const SeedRecord*> usable() const;
};

// One probe per seed; each record carries the weighted validation loss at its
// own selected threshold and the test loss at that threshold. Failed seeds
// are marked degenerate instead of aborting the sweep; throws domain_error if
// no seed remains usable.
SeedSweep run_seed_sweep(const ProbeSpec& spec,
                         std::span<const LabeledExample> train_examples,
                         std::span<const LabeledExample> val_examples,
                         std::span<const LabeledExample> test_examples,
                         const TrainConfig& config_template,
                         std::span<const std::uint64_t> seeds,
                         const WeightScheme& scheme, std::size_t workers = 1);

SeedSweep run_seed_sweep(const ProbeSpec& spec, const SplitManifest& manifest,
                         const TrainConfig& config_template,
                         std::span<const std::uint64_t> seeds,
                         const WeightScheme& scheme, std::size_t workers = 1);

// Argmin validation loss over usable records, ties to the lowest seed.
const SeedRecord& select_best_seed(const SeedSweep& sweep);

struct SweepSummary {
  double median_test = 0.0;    // tau_med; even-sized sweeps average the two central
  double best_val_test = 0.0;  // tau_best
  double oracle_test = 0.0;    // tau_oracle
  double delta_best = 0.0;     // tau_med - tau_best (negative when selection hurt)
  double delta_oracle = 0.0;   // tau_med - tau_oracle
  std::uint64_t best_seed = 0;
  std::size_t usable_count = 0;
};

SweepSummary sweep_summary(const SeedSweep& sweep);

// Structured text table: seed, validation loss, test loss, degenerate flag,
// params file path.
void save_sweep_table(const SeedSweep& sweep, const std::string& path);
SeedSweep load_sweep_table(const std::string& path);  // params stay on disk

}  // namespace probekit

#endif  // PROBEKIT_TRAINING_HPP
