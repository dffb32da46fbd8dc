#include "probekit/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "probekit/error.hpp"
#include "probekit/numerics.hpp"

namespace probekit {

namespace {

// Fixed shard structure so gradient accumulation order never depends on the
// worker count; shard partials are reduced in shard order.
constexpr std::size_t kGradShards = 16;

void parallel_shards(std::size_t shards, std::size_t workers,
                     const std::function<void(std::size_t)>& fn) {
  if (workers <= 1) {
    for (std::size_t s = 0; s < shards; ++s) fn(s);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  const std::size_t n = std::min(workers, shards);
  pool.reserve(n);
  for (std::size_t w = 0; w < n; ++w)
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t s = next.fetch_add(1);
        if (s >= shards) return;
        fn(s);
      }
    });
  for (std::thread& t : pool) t.join();
}

struct BatchGrad {
  double loss = 0.0;
  std::vector<Matrix> grads;
};

BatchGrad batch_gradient(const ProbeSpec& spec, const ProbeParams& params,
                         std::span<const LabeledExample> examples,
                         std::size_t workers) {
  const std::size_t count = examples.size();
  std::vector<double> shard_loss(kGradShards, 0.0);
  std::vector<std::vector<Matrix>> shard_grads(kGradShards);

  parallel_shards(kGradShards, workers, [&](std::size_t shard) {
    const std::size_t lo = shard * count / kGradShards;
    const std::size_t hi = (shard + 1) * count / kGradShards;
    if (lo == hi) return;
    std::vector<Matrix> acc;
    double loss = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      LossAndGrads lg =
          training_loss_grad(spec, params, examples[i].activations, examples[i].label);
      loss += lg.loss;
      if (acc.empty()) {
        acc = std::move(lg.grads);
      } else {
        for (std::size_t t = 0; t < acc.size(); ++t) acc[t] += lg.grads[t];
      }
    }
    shard_loss[shard] = loss;
    shard_grads[shard] = std::move(acc);
  });

  BatchGrad out;
  for (std::size_t shard = 0; shard < kGradShards; ++shard) {
    out.loss += shard_loss[shard];
    if (shard_grads[shard].empty()) continue;
    if (out.grads.empty()) {
      out.grads = std::move(shard_grads[shard]);
    } else {
      for (std::size_t t = 0; t < out.grads.size(); ++t)
        out.grads[t] += shard_grads[shard][t];
    }
  }
  const double inv = 1.0 / static_cast<double>(count);
  out.loss *= inv;
  for (Matrix& g : out.grads) g *= inv;
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (learning_rate <= 0.0)
    throw validation_error("train config: learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
    throw validation_error("train config: betas must lie in [0, 1)");
}

TrainResult train_probe(const ProbeSpec& spec, std::span<const LabeledExample> examples,
                        const TrainConfig& config, std::size_t workers) {
  spec.validate();
  config.validate();
  if (examples.empty()) throw domain_error("train_probe: empty training split");
  bool has_pos = false, has_neg = false;
  for (const LabeledExample& e : examples) (e.label == 1 ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg)
    throw domain_error("train_probe: training split must contain both labels");

  TrainResult result;
  result.params = init_params(spec, config.seed);
  result.loss_history.reserve(config.epochs);

  std::vector<Matrix> values = result.params.values();
  AdamWConfig opt;
  opt.learning_rate = config.learning_rate;
  opt.weight_decay = config.weight_decay;
  opt.beta1 = config.beta1;
  opt.beta2 = config.beta2;
  AdamWState state(values, opt);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const BatchGrad batch = batch_gradient(spec, result.params, examples, workers);
    if (!std::isfinite(batch.loss))
      throw domain_error("train_probe: non-finite loss at epoch " +
                         std::to_string(epoch));
    result.loss_history.push_back(batch.loss);
    adamw_step(values, batch.grads, state);
    result.params.assign_values(values);
  }
  return result;
}

std::vector<const SeedRecord*> SeedSweep::usable() const {
  std::vector<const SeedRecord*> out;
  for (const SeedRecord& r : records)
    if (!r.degenerate) out.push_back(&r);
  return out;
}

SeedSweep run_seed_sweep(const ProbeSpec& spec,
                         std::span<const LabeledExample> train_examples,
                         std::span<const LabeledExample> val_examples,
                         std::span<const LabeledExample> test_examples,
                         const TrainConfig& config_template,
                         std::span<const std::uint64_t> seeds,
                         const WeightScheme& scheme, std::size_t workers) {
  if (seeds.empty()) throw domain_error("run_seed_sweep: need at least one seed");

  std::vector<std::uint64_t> unique_seeds(seeds.begin(), seeds.end());
  std::sort(unique_seeds.begin(), unique_seeds.end());
  unique_seeds.erase(std::unique(unique_seeds.begin(), unique_seeds.end()),
                     unique_seeds.end());

  std::vector<int> val_labels, test_labels;
  std::vector<DatasetRole> val_roles, test_roles;
  for (const LabeledExample& e : val_examples) {
    val_labels.push_back(e.label);
    val_roles.push_back(e.role);
  }
  for (const LabeledExample& e : test_examples) {
    test_labels.push_back(e.label);
    test_roles.push_back(e.role);
  }

  SeedSweep sweep;
  sweep.records.resize(unique_seeds.size());

  parallel_shards(unique_seeds.size(), workers, [&](std::size_t i) {
    SeedRecord& rec = sweep.records[i];
    rec.seed = unique_seeds[i];
    TrainConfig config = config_template;
    config.seed = rec.seed;
    try {
      TrainResult trained = train_probe(spec, train_examples, config, 1);
      const std::vector<double> val_probs =
          score_dataset(spec, trained.params, val_examples);
      const ThresholdPolicy policy =
          select_threshold(val_probs, val_labels, val_roles, scheme);
      rec.tau = policy.tau;
      rec.validation_loss =
          eval_rates(val_probs, val_labels, val_roles, policy.tau, scheme).weighted;
      const std::vector<double> test_probs =
          score_dataset(spec, trained.params, test_examples);
      rec.test_loss =
          eval_rates(test_probs, test_labels, test_roles, policy.tau, scheme).weighted;
      rec.params = std::move(trained.params);
      rec.degenerate = !std::isfinite(rec.validation_loss) ||
                       !std::isfinite(rec.test_loss) ||
                       rec.validation_loss >= kMaxPenaltyLoss;
    } catch (const error&) {
      rec.degenerate = true;
      rec.validation_loss = kMaxPenaltyLoss;
      rec.test_loss = kMaxPenaltyLoss;
    }
  });

  if (sweep.usable().empty())
    throw domain_error("run_seed_sweep: zero usable seeds (all degenerate)");
  return sweep;
}

SeedSweep run_seed_sweep(const ProbeSpec& spec, const SplitManifest& manifest,
                         const TrainConfig& config_template,
                         std::span<const std::uint64_t> seeds,
                         const WeightScheme& scheme, std::size_t workers) {
  const std::vector<LabeledExample> train = load_examples(manifest, Split::Train);
  const std::vector<LabeledExample> val = load_examples(manifest, Split::Val);
  const std::vector<LabeledExample> test = load_examples(manifest, Split::Test);
  return run_seed_sweep(spec, train, val, test, config_template, seeds, scheme, workers);
}

const SeedRecord& select_best_seed(const SeedSweep& sweep) {
  const std::vector<const SeedRecord*> usable = sweep.usable();
  if (usable.empty()) throw domain_error("select_best_seed: empty sweep");
  const SeedRecord* best = usable.front();
  for (const SeedRecord* r : usable) {
    if (r->validation_loss < best->validation_loss ||
        (r->validation_loss == best->validation_loss && r->seed < best->seed))
      best = r;
  }
  return *best;
}

SweepSummary sweep_summary(const SeedSweep& sweep) {
  const std::vector<const SeedRecord*> usable = sweep.usable();
  if (usable.empty()) throw domain_error("sweep_summary: empty sweep");

  std::vector<double> test_losses;
  test_losses.reserve(usable.size());
  for (const SeedRecord* r : usable) test_losses.push_back(r->test_loss);
  std::sort(test_losses.begin(), test_losses.end());

  SweepSummary s;
  s.usable_count = usable.size();
  const std::size_t n = test_losses.size();
  s.median_test = (n % 2 == 1) ? test_losses[n / 2]
                               : 0.5 * (test_losses[n / 2 - 1] + test_losses[n / 2]);
  const SeedRecord& best = select_best_seed(sweep);
  s.best_val_test = best.test_loss;
  s.best_seed = best.seed;
  s.oracle_test = test_losses.front();
  s.delta_best = s.median_test - s.best_val_test;
  s.delta_oracle = s.median_test - s.oracle_test;
  return s;
}

void save_sweep_table(const SeedSweep& sweep, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw io_error("cannot open for writing: " + path);
  out.precision(17);
  out << "seed\tvalidation_loss\ttest_loss\tdegenerate\tparams_path\n";
  for (const SeedRecord& r : sweep.records)
    out << r.seed << '\t' << r.validation_loss << '\t' << r.test_loss << '\t'
        << (r.degenerate ? 1 : 0) << '\t' << (r.params_path.empty() ? "-" : r.params_path)
        << '\n';
  if (!out) throw io_error("write failed: " + path);
}

SeedSweep load_sweep_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open sweep table: " + path);
  SeedSweep sweep;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    std::istringstream fields(line);
    SeedRecord rec;
    std::string degenerate, params_path;
    if (!(fields >> rec.seed >> rec.validation_loss >> rec.test_loss >> degenerate >>
          params_path))
      throw validation_error("sweep table: malformed line in " + path);
    rec.degenerate = degenerate == "1";
    rec.params_path = params_path == "-" ? "" : params_path;
    sweep.records.push_back(std::move(rec));
  }
  return sweep;
}

}  // namespace probekit
