// probekit command-line front end: synthetic data generation, probe training,
// seed sweeps, evaluation, cascade frontiers, uncertainty reports, and the
// streaming-vs-batch checker.
//
// Exit codes: 0 success, 1 validation error, 2 I/O error.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "probekit/cascade.hpp"
#include "probekit/dataset.hpp"
#include "probekit/error.hpp"
#include "probekit/evaluation.hpp"
#include "probekit/numerics.hpp"
#include "probekit/probe.hpp"
#include "probekit/rng.hpp"
#include "probekit/stats.hpp"
#include "probekit/streaming.hpp"
#include "probekit/training.hpp"

namespace fs = std::filesystem;
using namespace probekit;

namespace {

std::vector<std::size_t> parse_size_list(const std::string& text) {
  std::vector<std::size_t> out;
  if (text.empty() || text == "none") return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(static_cast<std::size_t>(std::stoull(item)));
  }
  return out;
}

// Comma list with .. ranges: "0,5,10..12" -> 0,5,10,11,12.
std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const std::size_t dots = item.find("..");
    if (dots == std::string::npos) {
      out.push_back(std::stoull(item));
    } else {
      const std::uint64_t lo = std::stoull(item.substr(0, dots));
      const std::uint64_t hi = std::stoull(item.substr(dots + 2));
      if (hi < lo) throw validation_error("seed range must be ascending: " + item);
      for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
    }
  }
  if (out.empty()) throw validation_error("seed list is empty");
  return out;
}

struct SpecFlags {
  std::string spec_file;  // optional flat key=value probe spec; flags override
  std::string arch = "linear_mean";
  std::size_t dim = 64;
  std::string mlp_widths = "100,100";
  std::size_t heads = 10;
  std::size_t window = 10;
  double ema_alpha = 0.5;
  std::string train_agg;  // empty keeps the architecture default
  std::string eval_agg;
};

void add_spec_flags(CLI::App* cmd, SpecFlags& flags) {
  cmd->add_option("--spec", flags.spec_file,
                  "Probe spec file with flat key=value lines (arch, dim, mlp_widths, "
                  "heads, window, ema_alpha, train_agg, eval_agg); flags override");
  cmd->add_option("--arch", flags.arch,
                  "Probe architecture: linear_mean, linear_ema, mlp_mean, attention, "
                  "multimax, rolling_attention, alphaevolve_early, gated_bipolar")
      ->capture_default_str();
  cmd->add_option("--dim", flags.dim, "Activation dimension d")->capture_default_str();
  cmd->add_option("--mlp-widths", flags.mlp_widths,
                  "Comma-separated MLP hidden widths; 'none' for no transform")
      ->capture_default_str();
  cmd->add_option("--heads", flags.heads, "Attention heads H")->capture_default_str();
  cmd->add_option("--window", flags.window, "Rolling window width w")
      ->capture_default_str();
  cmd->add_option("--ema-alpha", flags.ema_alpha, "EMA decay alpha")
      ->capture_default_str();
  cmd->add_option("--train-agg", flags.train_agg,
                  "Training aggregation: softmax, hardmax, rolling_mean "
                  "(default per architecture)");
  cmd->add_option("--eval-agg", flags.eval_agg,
                  "Evaluation aggregation (default per architecture)");
}

// Merges an optional probe-spec file under explicitly-passed flags.
SpecFlags merge_spec_file(const CLI::App* cmd, SpecFlags flags) {
  if (flags.spec_file.empty()) return flags;
  std::ifstream in(flags.spec_file);
  if (!in) throw io_error("cannot open probe spec file: " + flags.spec_file);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") != std::string::npos)
        throw validation_error("probe spec file: malformed line " +
                               std::to_string(line_no) + " in " + flags.spec_file);
      continue;
    }
    auto trim = [](std::string s) {
      const std::size_t a = s.find_first_not_of(" \t\r");
      const std::size_t b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto overridden = [&](const char* flag) { return cmd->count(flag) > 0; };
    if (key == "arch") {
      if (!overridden("--arch")) flags.arch = value;
    } else if (key == "dim") {
      if (!overridden("--dim")) flags.dim = std::stoull(value);
    } else if (key == "mlp_widths") {
      if (!overridden("--mlp-widths")) flags.mlp_widths = value;
    } else if (key == "heads") {
      if (!overridden("--heads")) flags.heads = std::stoull(value);
    } else if (key == "window") {
      if (!overridden("--window")) flags.window = std::stoull(value);
    } else if (key == "ema_alpha") {
      if (!overridden("--ema-alpha")) flags.ema_alpha = std::stod(value);
    } else if (key == "train_agg") {
      if (!overridden("--train-agg")) flags.train_agg = value;
    } else if (key == "eval_agg") {
      if (!overridden("--eval-agg")) flags.eval_agg = value;
    } else {
      throw validation_error("probe spec file: unknown key '" + key + "' in " +
                             flags.spec_file);
    }
  }
  return flags;
}

ProbeSpec build_spec(const SpecFlags& flags) {
  ProbeSpec spec = ProbeSpec::make(architecture_from_name(flags.arch), flags.dim);
  spec.mlp_widths = parse_size_list(flags.mlp_widths);
  spec.heads = flags.heads;
  spec.window = flags.window;
  spec.ema_alpha = flags.ema_alpha;
  if (!flags.train_agg.empty())
    spec.train_aggregation = aggregation_from_name(flags.train_agg);
  if (!flags.eval_agg.empty())
    spec.eval_aggregation = aggregation_from_name(flags.eval_agg);
  spec.validate();
  return spec;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw io_error("cannot create output directory: " + dir);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw io_error("cannot open for writing: " + path);
  out << text;
  if (!out) throw io_error("write failed: " + path);
}

Split parse_split(const std::string& name) { return split_from_name(name); }

struct ScoredSplit {
  std::vector<LabeledExample> examples;
  std::vector<double> probabilities;
  std::vector<int> labels;
  std::vector<DatasetRole> roles;
};

ScoredSplit score_split(const ProbeSpec& spec, const ProbeParams& params,
                        const SplitManifest& manifest, Split split) {
  ScoredSplit scored;
  scored.examples = load_examples(manifest, split);
  if (scored.examples.empty())
    throw validation_error("manifest has no examples in split " +
                           std::string(split_name(split)));
  scored.probabilities = score_dataset(spec, params, scored.examples);
  for (const LabeledExample& e : scored.examples) {
    scored.labels.push_back(e.label);
    scored.roles.push_back(e.role);
  }
  return scored;
}

double select_tau_on_validation(const ProbeSpec& spec, const ProbeParams& params,
                                const SplitManifest& manifest,
                                const WeightScheme& scheme) {
  const ScoredSplit val = score_split(spec, params, manifest, Split::Val);
  return select_threshold(val.probabilities, val.labels, val.roles, scheme).tau;
}

int run_gen_data(const std::string& out_dir, SyntheticConfig config, double scale,
                 std::size_t workers) {
  if (scale != 1.0) config.scale_counts(scale);
  ensure_dir(out_dir);
  const SplitManifest manifest = gen_synthetic(config, out_dir, workers);
  std::size_t per_split[kSplitCount] = {};
  for (const ManifestEntry& e : manifest.entries)
    per_split[static_cast<std::size_t>(e.split)] += 1;
  std::cout << "manifest: " << (fs::path(out_dir) / "manifest.tsv").string() << '\n'
            << "examples: train=" << per_split[0] << " val=" << per_split[1]
            << " test=" << per_split[2] << '\n';
  return 0;
}

int run_train(const std::string& manifest_path, const std::string& out_dir,
              const SpecFlags& spec_flags, TrainConfig config, std::size_t workers) {
  const ProbeSpec spec = build_spec(spec_flags);
  const SplitManifest manifest = load_manifest(manifest_path);
  const std::vector<LabeledExample> train = load_examples(manifest, Split::Train);
  const TrainResult result = train_probe(spec, train, config, workers);
  ensure_dir(out_dir);
  const std::string probe_path = (fs::path(out_dir) / "probe.bin").string();
  write_probe_file(probe_path, spec, result.params);
  std::ostringstream history;
  history.precision(17);
  history << "epoch\tloss\n";
  for (std::size_t e = 0; e < result.loss_history.size(); ++e)
    history << e << '\t' << result.loss_history[e] << '\n';
  write_text((fs::path(out_dir) / "loss_history.tsv").string(), history.str());
  std::cout << "probe: " << probe_path << '\n';
  if (!result.loss_history.empty())
    std::cout << "final_loss: " << result.loss_history.back() << '\n';
  return 0;
}

int run_sweep(const std::string& manifest_path, const std::string& out_dir,
              const SpecFlags& spec_flags, TrainConfig config,
              const std::string& seeds_text, const std::string& weights,
              std::size_t workers) {
  const ProbeSpec spec = build_spec(spec_flags);
  const WeightScheme scheme = WeightScheme::from_name(weights);
  const std::vector<std::uint64_t> seeds = parse_seed_list(seeds_text);
  const SplitManifest manifest = load_manifest(manifest_path);
  SeedSweep sweep = run_seed_sweep(spec, manifest, config, seeds, scheme, workers);

  ensure_dir(out_dir);
  const fs::path probes_dir = fs::path(out_dir) / "probes";
  ensure_dir(probes_dir.string());
  for (SeedRecord& rec : sweep.records) {
    if (rec.degenerate) continue;
    rec.params_path =
        (probes_dir / ("seed_" + std::to_string(rec.seed) + ".bin")).string();
    write_probe_file(rec.params_path, spec, rec.params);
  }
  save_sweep_table(sweep, (fs::path(out_dir) / "sweep.tsv").string());

  const SweepSummary summary = sweep_summary(sweep);
  std::ostringstream text;
  text.precision(17);
  text << "usable_seeds\t" << summary.usable_count << '\n'
       << "best_seed\t" << summary.best_seed << '\n'
       << "median_test\t" << summary.median_test << '\n'
       << "best_val_test\t" << summary.best_val_test << '\n'
       << "oracle_test\t" << summary.oracle_test << '\n'
       << "delta_best\t" << summary.delta_best << '\n'
       << "delta_oracle\t" << summary.delta_oracle << '\n';
  write_text((fs::path(out_dir) / "summary.txt").string(), text.str());
  std::cout << "sweep: " << (fs::path(out_dir) / "sweep.tsv").string() << '\n'
            << "best_seed: " << summary.best_seed << '\n'
            << "best_val_test: " << summary.best_val_test << '\n';
  return 0;
}

int run_eval(const std::string& manifest_path, const std::string& params_path,
             const std::string& out_dir, const std::string& weights,
             const std::string& split_name_text, double tau_flag) {
  const ProbeFile probe = read_probe_file(params_path);
  const WeightScheme scheme = WeightScheme::from_name(weights);
  const SplitManifest manifest = load_manifest(manifest_path);
  const Split split = parse_split(split_name_text);

  const double tau = tau_flag >= 0.0
                         ? tau_flag
                         : select_tau_on_validation(probe.spec, probe.params,
                                                    manifest, scheme);
  const ScoredSplit scored = score_split(probe.spec, probe.params, manifest, split);
  const RateReport report =
      eval_rates(scored.probabilities, scored.labels, scored.roles, tau, scheme);

  ensure_dir(out_dir);
  write_text((fs::path(out_dir) / "report.txt").string(),
             format_rate_report(report, scheme, tau));
  write_scores_file((fs::path(out_dir) / "scores.tsv").string(), scored.examples,
                    scored.probabilities, split);
  std::cout << format_rate_report(report, scheme, tau);
  return 0;
}

int run_cascade(const std::string& manifest_path, const std::string& params_path,
                const std::string& scores_path, const std::string& out_dir,
                const std::string& weights, double cost_multiplier,
                const std::string& split_name_text) {
  const ProbeFile probe = read_probe_file(params_path);
  const WeightScheme scheme = WeightScheme::from_name(weights);
  const SplitManifest manifest = load_manifest(manifest_path);
  const Split split = parse_split(split_name_text);

  const ScoredSplit scored = score_split(probe.spec, probe.params, manifest, split);
  // Probe-logit space for thresholds.
  std::vector<double> logits;
  logits.reserve(scored.examples.size());
  for (const LabeledExample& e : scored.examples)
    logits.push_back(eval_logit(probe.spec, probe.params, e.activations) +
                     probe.params.bias());

  const std::vector<ExpensiveScore> scores = load_expensive_scores(scores_path);
  std::vector<int> llm(scored.examples.size(), -1);
  for (std::size_t i = 0; i < scored.examples.size(); ++i) {
    for (const ExpensiveScore& s : scores) {
      if (s.id == scored.examples[i].path) {
        llm[i] = s.decision;
        break;
      }
    }
    if (llm[i] < 0)
      throw validation_error("expensive-score file missing example: " +
                             scored.examples[i].path);
  }

  const auto samples =
      build_sample_losses(logits, scored.labels, scored.roles, llm, scheme);
  const SavingsCurves curves = savings_curves(samples);
  const auto left = lower_convex_hull(curves.left);
  const auto right = lower_convex_hull(curves.right);
  const Frontier frontier = minkowski_frontier(left, right, samples.size());

  constexpr double kInf = std::numeric_limits<double>::infinity();
  const CascadeOutcome pure_llm =
      apply_cascade(logits, llm, scored.labels, scored.roles,
                    CascadePolicy{-kInf, kInf}, scheme, cost_multiplier);
  const double tau =
      select_tau_on_validation(probe.spec, probe.params, manifest, scheme);
  const double tau_logit = std::log(tau / (1.0 - tau));
  const CascadeOutcome pure_probe =
      apply_cascade(logits, llm, scored.labels, scored.roles,
                    CascadePolicy{tau_logit, tau_logit}, scheme, cost_multiplier);
  const OptimalVertex best = optimal_vertex(frontier, samples, 0.0, 1.0);
  const CascadeOutcome best_outcome = apply_cascade(
      logits, llm, scored.labels, scored.roles, best.policy, scheme, cost_multiplier);

  ensure_dir(out_dir);
  write_frontier_file(frontier, samples, pure_llm.weighted_error, cost_multiplier,
                      (fs::path(out_dir) / "frontier.tsv").string());
  std::ostringstream text;
  text.precision(17);
  text << "pure_probe_error\t" << pure_probe.weighted_error << "\tcost\t"
       << pure_probe.cost << '\n'
       << "pure_expensive_error\t" << pure_llm.weighted_error << "\tcost\t"
       << pure_llm.cost << '\n'
       << "optimal_vertex_error\t" << best_outcome.weighted_error << "\tcost\t"
       << best_outcome.cost << "\tt0\t" << best.policy.t0 << "\tt1\t" << best.policy.t1
       << "\tdeferral\t" << best_outcome.deferral_fraction << '\n';
  write_text((fs::path(out_dir) / "cascade_summary.txt").string(), text.str());
  std::cout << text.str();
  return 0;
}

int run_stats(const std::string& sweeps_text, const std::string& names_text,
              const std::string& out_dir, BootstrapConfig config) {
  std::vector<std::string> paths;
  {
    std::stringstream ss(sweeps_text);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) paths.push_back(item);
  }
  if (paths.empty()) throw validation_error("--sweeps needs at least one table");
  std::vector<std::string> names;
  if (!names_text.empty()) {
    std::stringstream ss(names_text);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) names.push_back(item);
    if (names.size() != paths.size())
      throw validation_error("--names must match --sweeps in length");
  } else {
    for (const std::string& p : paths) names.push_back(fs::path(p).stem().string());
  }
  std::vector<SeedSweep> sweeps;
  for (const std::string& p : paths) sweeps.push_back(load_sweep_table(p));

  ensure_dir(out_dir);
  const std::string sig = format_significance_table(names, sweeps, config);
  const std::string ci = format_ci_report(names, sweeps, config);
  write_text((fs::path(out_dir) / "significance.tsv").string(), sig);
  write_text((fs::path(out_dir) / "ci.tsv").string(), ci);
  std::cout << sig << ci;
  return 0;
}

int run_stream_check(const std::string& manifest_path, const std::string& params_path,
                     const std::string& out_dir, const std::string& split_name_text) {
  const ProbeFile probe = read_probe_file(params_path);
  const SplitManifest manifest = load_manifest(manifest_path);
  const Split split = parse_split(split_name_text);
  const std::vector<LabeledExample> examples = load_examples(manifest, split);
  if (examples.empty())
    throw validation_error("manifest has no examples in split " +
                           std::string(split_name(split)));

  double worst = 0.0;
  std::vector<double> token(probe.spec.input_dim);
  for (const LabeledExample& e : examples) {
    ProbeStream stream(probe.spec, probe.params);
    double streamed = 0.0;
    for (std::size_t j = 0; j < e.activations.cols(); ++j) {
      for (std::size_t i = 0; i < token.size(); ++i) token[i] = e.activations(i, j);
      streamed = stream.update(token);
    }
    const double batch = eval_logit(probe.spec, probe.params, e.activations);
    worst = std::max(worst, std::abs(streamed - batch));
  }
  ensure_dir(out_dir);
  std::ostringstream text;
  text.precision(17);
  text << "examples\t" << examples.size() << '\n'
       << "max_abs_deviation\t" << worst << '\n';
  write_text((fs::path(out_dir) / "stream_check.txt").string(), text.str());
  std::cout << text.str();
  return 0;
}

int run_mock_scores(const std::string& manifest_path, const std::string& out_path,
                    const std::string& split_name_text, double accuracy,
                    std::uint64_t seed) {
  if (accuracy < 0.0 || accuracy > 1.0)
    throw validation_error("--accuracy must lie in [0, 1]");
  const SplitManifest manifest = load_manifest(manifest_path);
  const Split split = parse_split(split_name_text);
  Rng rng = Rng(seed).fork("mock-scores");
  std::vector<ExpensiveScore> scores;
  for (const ManifestEntry& e : manifest.entries) {
    if (e.split != split) continue;
    const bool correct = rng.uniform() < accuracy;
    scores.push_back(
        ExpensiveScore{e.path, correct ? e.label : 1 - e.label, -1.0});
  }
  if (scores.empty())
    throw validation_error("manifest has no examples in split " +
                           std::string(split_name(split)));
  save_expensive_scores(scores, out_path);
  std::cout << "scores: " << out_path << " (" << scores.size() << " examples)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"probekit: activation-probe training, evaluation, and cascading"};
  app.require_subcommand(1);

  // gen-data ---------------------------------------------------------------
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic activation dataset");
  std::string gen_out;
  SyntheticConfig gen_config;
  double gen_scale = 1.0;
  std::size_t gen_workers = 1;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--seed", gen_config.seed, "Generation seed")->capture_default_str();
  gen->add_option("--dim", gen_config.dim, "Activation dimension")->capture_default_str();
  gen->add_option("--short-min", gen_config.short_min, "Shortest short-context length")
      ->capture_default_str();
  gen->add_option("--short-max", gen_config.short_max, "Longest short-context length")
      ->capture_default_str();
  gen->add_option("--long-min", gen_config.long_min, "Shortest long-context length")
      ->capture_default_str();
  gen->add_option("--long-max", gen_config.long_max, "Longest long-context length")
      ->capture_default_str();
  gen->add_option("--signal-window", gen_config.signal_window,
                  "Contiguous signal tokens per attack")
      ->capture_default_str();
  gen->add_option("--class-separation", gen_config.class_separation,
                  "Mean shift of signal tokens")
      ->capture_default_str();
  gen->add_option("--background-scale", gen_config.background_scale,
                  "Background noise scale")
      ->capture_default_str();
  gen->add_option("--hardneg-overlap", gen_config.hardneg_overlap,
                  "Cosine similarity of hard negatives to the signal direction")
      ->capture_default_str();
  gen->add_option("--scale", gen_scale, "Multiplier on all example counts")
      ->capture_default_str();
  gen->add_option("--workers", gen_workers, "Generation worker threads")
      ->capture_default_str();

  // shared train/sweep flags -------------------------------------------------
  SpecFlags train_spec, sweep_spec;
  TrainConfig train_config, sweep_config;
  std::string train_manifest, train_out;
  std::size_t train_workers = 1;

  auto* train = app.add_subcommand("train", "Train one probe on the train split");
  train->add_option("--manifest", train_manifest, "Dataset manifest")->required();
  train->add_option("--out", train_out, "Output directory")->required();
  add_spec_flags(train, train_spec);
  train->add_option("--seed", train_config.seed, "Initialization seed")
      ->capture_default_str();
  train->add_option("--epochs", train_config.epochs, "Full-batch steps")
      ->capture_default_str();
  train->add_option("--lr", train_config.learning_rate, "Learning rate")
      ->capture_default_str();
  train->add_option("--weight-decay", train_config.weight_decay, "Weight decay")
      ->capture_default_str();
  train->add_option("--workers", train_workers, "Gradient worker threads")
      ->capture_default_str();

  std::string sweep_manifest, sweep_out, sweep_seeds = "0..9", sweep_weights = "main";
  std::size_t sweep_workers =
      std::max<std::size_t>(1, std::thread::hardware_concurrency());
  auto* sweep = app.add_subcommand("sweep", "Train one probe per seed and select");
  sweep->add_option("--manifest", sweep_manifest, "Dataset manifest")->required();
  sweep->add_option("--out", sweep_out, "Output directory")->required();
  add_spec_flags(sweep, sweep_spec);
  sweep->add_option("--seeds", sweep_seeds, "Seed list, e.g. 0,1,2 or 0..99")
      ->capture_default_str();
  sweep->add_option("--weights", sweep_weights, "Weight scheme: main or alt")
      ->capture_default_str();
  sweep->add_option("--epochs", sweep_config.epochs, "Full-batch steps")
      ->capture_default_str();
  sweep->add_option("--lr", sweep_config.learning_rate, "Learning rate")
      ->capture_default_str();
  sweep->add_option("--weight-decay", sweep_config.weight_decay, "Weight decay")
      ->capture_default_str();
  sweep->add_option("--workers", sweep_workers, "Parallel seed workers")
      ->capture_default_str();

  // eval ---------------------------------------------------------------------
  std::string eval_manifest, eval_params, eval_out, eval_weights = "main",
              eval_split = "test";
  double eval_tau = -1.0;
  auto* eval = app.add_subcommand("eval", "Per-role rate report at a threshold");
  eval->add_option("--manifest", eval_manifest, "Dataset manifest")->required();
  eval->add_option("--params", eval_params, "Probe parameter file")->required();
  eval->add_option("--out", eval_out, "Output directory")->required();
  eval->add_option("--weights", eval_weights, "Weight scheme: main or alt")
      ->capture_default_str();
  eval->add_option("--split", eval_split, "Split to evaluate")->capture_default_str();
  eval->add_option("--tau", eval_tau,
                   "Probability threshold; negative selects on the validation split")
      ->capture_default_str();

  // cascade --------------------------------------------------------------------
  std::string casc_manifest, casc_params, casc_scores, casc_out,
      casc_weights = "main", casc_split = "test";
  double casc_cost = 1e4;
  auto* cascade = app.add_subcommand("cascade",
                                     "Optimal two-threshold deferral frontier");
  cascade->add_option("--manifest", casc_manifest, "Dataset manifest")->required();
  cascade->add_option("--params", casc_params, "Probe parameter file")->required();
  cascade->add_option("--expensive-scores", casc_scores,
                      "Expensive classifier decisions (id, decision per line)")
      ->required();
  cascade->add_option("--out", casc_out, "Output directory")->required();
  cascade->add_option("--weights", casc_weights, "Weight scheme: main or alt")
      ->capture_default_str();
  cascade->add_option("--cost-multiplier", casc_cost,
                      "Expensive-model cost per probe cost unit")
      ->capture_default_str();
  cascade->add_option("--split", casc_split, "Split to build the frontier on")
      ->capture_default_str();

  // stats ------------------------------------------------------------------------
  std::string stats_sweeps, stats_names, stats_out;
  BootstrapConfig stats_config;
  auto* stats = app.add_subcommand("stats", "Significance and confidence reports");
  stats->add_option("--sweeps", stats_sweeps, "Comma-separated sweep tables")
      ->required();
  stats->add_option("--names", stats_names, "Comma-separated method names");
  stats->add_option("--out", stats_out, "Output directory")->required();
  stats->add_option("--bootstrap-iters", stats_config.iterations,
                    "Bootstrap iterations B")
      ->capture_default_str();
  stats->add_option("--k", stats_config.k, "Best-of-k selection size")
      ->capture_default_str();
  stats->add_option("--seed", stats_config.seed, "Bootstrap seed")
      ->capture_default_str();

  // stream-check -------------------------------------------------------------------
  std::string sc_manifest, sc_params, sc_out, sc_split = "test";
  auto* schk = app.add_subcommand("stream-check",
                                  "Max streaming-vs-batch logit deviation");
  schk->add_option("--manifest", sc_manifest, "Dataset manifest")->required();
  schk->add_option("--params", sc_params, "Probe parameter file")->required();
  schk->add_option("--out", sc_out, "Output directory")->required();
  schk->add_option("--split", sc_split, "Split to check")->capture_default_str();

  // mock-scores ----------------------------------------------------------------------
  std::string mock_manifest, mock_out, mock_split = "test";
  double mock_accuracy = 0.98;
  std::uint64_t mock_seed = 0;
  auto* mock = app.add_subcommand(
      "mock-scores", "Emit a mock expensive-scorer file from ground truth");
  mock->add_option("--manifest", mock_manifest, "Dataset manifest")->required();
  mock->add_option("--out", mock_out, "Output score file")->required();
  mock->add_option("--split", mock_split, "Split to score")->capture_default_str();
  mock->add_option("--accuracy", mock_accuracy, "Per-example accuracy")
      ->capture_default_str();
  mock->add_option("--seed", mock_seed, "Flip seed")->capture_default_str();

  for (CLI::App* cmd : {gen, train, sweep, eval, cascade, stats, schk, mock})
    cmd->set_config("--config", "", "Flat key=value config file; flags override");

  try {
    app.parse(argc, argv);
    if (gen->parsed())
      return run_gen_data(gen_out, gen_config, gen_scale, gen_workers);
    if (train->parsed())
      return run_train(train_manifest, train_out, merge_spec_file(train, train_spec),
                       train_config, train_workers);
    if (sweep->parsed())
      return run_sweep(sweep_manifest, sweep_out, merge_spec_file(sweep, sweep_spec),
                       sweep_config, sweep_seeds, sweep_weights, sweep_workers);
    if (eval->parsed())
      return run_eval(eval_manifest, eval_params, eval_out, eval_weights, eval_split,
                      eval_tau);
    if (cascade->parsed())
      return run_cascade(casc_manifest, casc_params, casc_scores, casc_out,
                         casc_weights, casc_cost, casc_split);
    if (stats->parsed())
      return run_stats(stats_sweeps, stats_names, stats_out, stats_config);
    if (schk->parsed())
      return run_stream_check(sc_manifest, sc_params, sc_out, sc_split);
    if (mock->parsed())
      return run_mock_scores(mock_manifest, mock_out, mock_split, mock_accuracy,
                             mock_seed);
    return 1;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const io_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const probekit::error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
