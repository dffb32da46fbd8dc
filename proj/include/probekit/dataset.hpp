#ifndef PROBEKIT_DATASET_HPP
#define PROBEKIT_DATASET_HPP

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "probekit/matrix.hpp"

namespace probekit {

// Dataset roles in the order they appear in the split grid; this order is
// also the on-disk role byte.
enum class DatasetRole : std::uint8_t {
  ScOvertrigger = 0,   // SC_OT
  ScHardNegative = 1,  // SC_HN
  MtHardNegative = 2,  // MT_HN
  LcRandomTraffic = 3, // LC_RT
  ScAttack = 4,        // SC_A
  MtAttack = 5,        // MT_A
  LcAttack = 6,        // LC_A
  ScJailbreak = 7,     // SC_J
  ScRedTeam = 8,       // SC_ART
};

constexpr std::size_t kRoleCount = 9;

enum class Split : std::uint8_t { Train = 0, Val = 1, Test = 2 };
constexpr std::size_t kSplitCount = 3;

std::string_view role_name(DatasetRole role);
DatasetRole role_from_name(std::string_view name);
std::string_view split_name(Split split);
Split split_from_name(std::string_view name);

// Attack roles count toward FNR, benign roles toward FPR.
bool role_is_attack(DatasetRole role);
// Benign roles that superficially resemble attacks (weight 2 in the metric).
bool role_is_hard_negative(DatasetRole role);
// Benign traffic unrelated to the domain (weight 50).
bool role_is_overtrigger(DatasetRole role);

// The role/split grid: e.g. long-context and jailbreak roles are test-only.
bool role_allowed_in_split(DatasetRole role, Split split);

struct ManifestEntry {
  std::string path;
  DatasetRole role = DatasetRole::ScOvertrigger;
  Split split = Split::Train;
  int label = 0;
};

struct SplitManifest {
  std::vector<ManifestEntry> entries;

  std::vector<ManifestEntry> split_entries(Split split) const;
  // Enforces split disjointness, the role/split grid, and label/polarity
  // consistency.
  void validate() const;
};

SplitManifest load_manifest(const std::string& path);
void save_manifest(const SplitManifest& manifest, const std::string& path);

struct ActivationRecord {
  Matrix activations;  // d x n, widened from the float32 payload
  int label = 0;
  DatasetRole role = DatasetRole::ScOvertrigger;
};

void write_activation_file(const std::string& path, const Matrix& activations,
                           int label, DatasetRole role);
ActivationRecord read_activation_file(const std::string& path);

struct LabeledExample {
  Matrix activations;
  int label = 0;
  DatasetRole role = DatasetRole::ScOvertrigger;
  std::string path;
};

std::vector<LabeledExample> load_examples(const SplitManifest& manifest, Split split);

// Synthetic stand-in for harvested hidden states: isotropic Gaussian
// background with a planted rank-1 signal carried by a short window of
// contiguous tokens. Long-context variants bury the same window in a much
// longer sequence, which is what starves mean pooling.
struct SyntheticConfig {
  std::size_t dim = 64;
  std::size_t short_min = 16, short_max = 128;
  std::size_t long_min = 1024, long_max = 2048;
  std::size_t signal_window = 16;
  double class_separation = 6.0;
  double background_scale = 1.0;
  double hardneg_overlap = 0.6;       // cosine similarity to the signal direction
  double jailbreak_angle_deg = 25.0;  // rotation for SC_J
  double art_angle_deg = 40.0;        // rotation for SC_ART
  std::uint64_t seed = 0;
  // Example counts per (role, split); defaults follow the split grid at
  // desk scale (~2000 train / ~500 val / ~1500 test).
  std::array<std::array<std::size_t, kSplitCount>, kRoleCount> counts;

  SyntheticConfig();
  void validate() const;
  // Multiplies every count, keeping at least one example where one existed.
  void scale_counts(double factor);
};

// Writes activation files under <out_dir>/activations plus
// <out_dir>/manifest.tsv; byte-identical for a fixed config.
SplitManifest gen_synthetic(const SyntheticConfig& config, const std::string& out_dir,
                            std::size_t workers = 1);

// The planted unit direction, reproducible from the seed; used by tests to
// verify window placement.
std::vector<double> synthetic_signal_direction(const SyntheticConfig& config);

}  // namespace probekit

#endif  // PROBEKIT_DATASET_HPP
