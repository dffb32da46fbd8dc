#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "doctest.h"
#include "probekit/dataset.hpp"
#include "probekit/error.hpp"
#include "probekit/evaluation.hpp"
#include "probekit/rng.hpp"
#include "test_support.hpp"

using namespace probekit;
using namespace probekit::testsupport;
namespace fs = std::filesystem;

namespace {

// Small config for fast unit runs; keeps the long/short structure.
SyntheticConfig tiny_config(std::uint64_t seed) {
  SyntheticConfig config;
  config.seed = seed;
  config.dim = 12;
  config.short_min = 8;
  config.short_max = 24;
  config.long_min = 64;
  config.long_max = 96;
  config.signal_window = 6;
  config.scale_counts(0.04);
  return config;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("role taxonomy matches the split grid") {
  CHECK(role_is_attack(DatasetRole::ScAttack));
  CHECK(role_is_attack(DatasetRole::ScJailbreak));
  CHECK_FALSE(role_is_attack(DatasetRole::MtHardNegative));
  CHECK(role_is_hard_negative(DatasetRole::ScHardNegative));
  CHECK(role_is_hard_negative(DatasetRole::MtHardNegative));
  CHECK(role_is_overtrigger(DatasetRole::ScOvertrigger));
  CHECK(role_is_overtrigger(DatasetRole::LcRandomTraffic));

  // Long-context, jailbreak, and red-team roles are test-only.
  CHECK_FALSE(role_allowed_in_split(DatasetRole::LcRandomTraffic, Split::Train));
  CHECK_FALSE(role_allowed_in_split(DatasetRole::LcAttack, Split::Val));
  CHECK(role_allowed_in_split(DatasetRole::LcAttack, Split::Test));
  CHECK(role_allowed_in_split(DatasetRole::ScOvertrigger, Split::Val));
  CHECK_FALSE(role_allowed_in_split(DatasetRole::ScHardNegative, Split::Val));

  CHECK(role_from_name("SC_ART") == DatasetRole::ScRedTeam);
  CHECK_THROWS_AS(role_from_name("SC_XX"), validation_error);
}

TEST_CASE("activation file round trip and exact payload size") {
  Rng rng(1);
  Matrix x = random_matrix(rng, 2, 3);
  const std::string path = "actv_roundtrip_test.actv";
  write_activation_file(path, x, 1, DatasetRole::ScAttack);

  // 20-byte header + 6 float32 values.
  CHECK(fs::file_size(path) == 20 + 24);

  const ActivationRecord rec = read_activation_file(path);
  CHECK(rec.label == 1);
  CHECK(rec.role == DatasetRole::ScAttack);
  REQUIRE(rec.activations.rows() == 2);
  REQUIRE(rec.activations.cols() == 3);
  for (std::size_t j = 0; j < 3; ++j)
    for (std::size_t i = 0; i < 2; ++i)
      CHECK(rec.activations(i, j) == static_cast<double>(static_cast<float>(x(i, j))));
  std::remove(path.c_str());
}

TEST_CASE("activation file format errors name the offending field") {
  Rng rng(2);
  const Matrix x = random_matrix(rng, 3, 4);
  const std::string path = "actv_corrupt_test.actv";

  write_activation_file(path, x, 0, DatasetRole::ScOvertrigger);
  {
    std::FILE* f = std::fopen(path.c_str(), "r+b");
    REQUIRE(f != nullptr);
    std::fputc('Z', f);
    std::fclose(f);
  }
  CHECK_THROWS_WITH_AS(read_activation_file(path), doctest::Contains("bad magic"),
                       format_error);

  write_activation_file(path, x, 0, DatasetRole::ScOvertrigger);
  {
    std::FILE* f = std::fopen(path.c_str(), "r+b");
    REQUIRE(f != nullptr);
    std::fseek(f, 4, SEEK_SET);
    std::fputc(9, f);  // version low byte
    std::fclose(f);
  }
  CHECK_THROWS_WITH_AS(read_activation_file(path), doctest::Contains("version"),
                       format_error);

  write_activation_file(path, x, 0, DatasetRole::ScOvertrigger);
  fs::resize_file(path, fs::file_size(path) - 5);
  CHECK_THROWS_WITH_AS(read_activation_file(path), doctest::Contains("truncated"),
                       format_error);
  std::remove(path.c_str());
}

TEST_CASE("manifest rejects a file shared across splits") {
  SplitManifest manifest;
  manifest.entries.push_back({"a.actv", DatasetRole::ScAttack, Split::Train, 1});
  manifest.entries.push_back({"a.actv", DatasetRole::ScAttack, Split::Test, 1});
  CHECK_THROWS_AS(manifest.validate(), validation_error);
}

TEST_CASE("empty manifest is valid") {
  SplitManifest manifest;
  manifest.validate();
  CHECK(manifest.split_entries(Split::Train).empty());
}

TEST_CASE("manifest shaped like the full role grid is accepted") {
  SplitManifest manifest;
  int file_id = 0;
  for (std::size_t r = 0; r < kRoleCount; ++r) {
    for (std::size_t s = 0; s < kSplitCount; ++s) {
      const DatasetRole role = static_cast<DatasetRole>(r);
      const Split split = static_cast<Split>(s);
      if (!role_allowed_in_split(role, split)) continue;
      manifest.entries.push_back({"f" + std::to_string(file_id++) + ".actv", role, split,
                                  role_is_attack(role) ? 1 : 0});
    }
  }
  manifest.validate();
  std::set<DatasetRole> roles;
  for (const ManifestEntry& e : manifest.entries) roles.insert(e.role);
  CHECK(roles.size() == 9);
}

TEST_CASE("manifest rejects grid and label violations") {
  SplitManifest grid;
  grid.entries.push_back({"x.actv", DatasetRole::LcRandomTraffic, Split::Train, 0});
  CHECK_THROWS_AS(grid.validate(), validation_error);

  SplitManifest label;
  label.entries.push_back({"y.actv", DatasetRole::ScAttack, Split::Train, 0});
  CHECK_THROWS_AS(label.validate(), validation_error);
}

TEST_CASE("manifest file round trip and unknown-role rejection") {
  TempDir dir("probekit_manifest_test");
  SplitManifest manifest;
  manifest.entries.push_back({"a.actv", DatasetRole::ScAttack, Split::Train, 1});
  manifest.entries.push_back({"b.actv", DatasetRole::ScOvertrigger, Split::Val, 0});
  const std::string path = (dir.path / "manifest.tsv").string();
  save_manifest(manifest, path);
  const SplitManifest loaded = load_manifest(path);
  REQUIRE(loaded.entries.size() == 2);
  CHECK(loaded.entries[0].path == "a.actv");
  CHECK(loaded.entries[0].role == DatasetRole::ScAttack);
  CHECK(loaded.entries[1].split == Split::Val);

  std::ofstream bad(path, std::ios::app);
  bad << "c.actv\tNOT_A_ROLE\ttrain\t0\n";
  bad.close();
  CHECK_THROWS_AS(load_manifest(path), validation_error);
}

TEST_CASE("gen_synthetic is deterministic and respects requested counts") {
  TempDir dir_a("probekit_gen_a");
  TempDir dir_b("probekit_gen_b");
  const SyntheticConfig config = tiny_config(77);
  const SplitManifest a = gen_synthetic(config, dir_a.path.string());
  const SplitManifest b = gen_synthetic(config, dir_b.path.string(), 2);

  REQUIRE(a.entries.size() == b.entries.size());
  std::size_t counts[kRoleCount][kSplitCount] = {};
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    counts[static_cast<std::size_t>(a.entries[i].role)]
          [static_cast<std::size_t>(a.entries[i].split)] += 1;
    // Same generation with a different worker count: byte-identical files.
    std::ifstream fa(a.entries[i].path, std::ios::binary);
    std::ifstream fb(b.entries[i].path, std::ios::binary);
    const std::string bytes_a((std::istreambuf_iterator<char>(fa)),
                              std::istreambuf_iterator<char>());
    const std::string bytes_b((std::istreambuf_iterator<char>(fb)),
                              std::istreambuf_iterator<char>());
    CHECK(bytes_a == bytes_b);
  }
  for (std::size_t r = 0; r < kRoleCount; ++r)
    for (std::size_t s = 0; s < kSplitCount; ++s)
      CHECK(counts[r][s] == config.counts[r][s]);
}

TEST_CASE("attack sequences carry exactly signal_window shifted tokens") {
  TempDir dir("probekit_gen_window");
  SyntheticConfig config = tiny_config(5);
  config.class_separation = 30.0;  // far above any noise crossing
  const SplitManifest manifest = gen_synthetic(config, dir.path.string());
  const std::vector<double> direction = synthetic_signal_direction(config);

  std::size_t attacks_checked = 0;
  for (const ManifestEntry& e : manifest.entries) {
    if (e.role != DatasetRole::LcAttack && e.role != DatasetRole::ScAttack &&
        e.role != DatasetRole::MtAttack)
      continue;
    const ActivationRecord rec = read_activation_file(e.path);
    const Matrix& x = rec.activations;
    std::vector<std::size_t> hot;
    for (std::size_t j = 0; j < x.cols(); ++j) {
      double proj = 0.0;
      for (std::size_t i = 0; i < x.rows(); ++i) proj += x(i, j) * direction[i];
      if (proj > config.class_separation / 2.0) hot.push_back(j);
    }
    REQUIRE(hot.size() == config.signal_window);
    for (std::size_t i = 1; i < hot.size(); ++i) CHECK(hot[i] == hot[i - 1] + 1);
    ++attacks_checked;
  }
  CHECK(attacks_checked > 0);
}

TEST_CASE("zero class separation leaves probes at chance AUROC") {
  TempDir dir("probekit_gen_nosignal");
  SyntheticConfig config = tiny_config(9);
  config.scale_counts(8.0);  // enough test examples for the 0.05 band
  config.class_separation = 0.0;
  const SplitManifest manifest = gen_synthetic(config, dir.path.string());
  const std::vector<LabeledExample> test = load_examples(manifest, Split::Test);

  ProbeSpec spec = ProbeSpec::make(Architecture::LinearMean, config.dim);
  const ProbeParams params = init_params(spec, 17);
  const std::vector<double> probs = score_dataset(spec, params, test);
  std::vector<int> labels;
  for (const LabeledExample& e : test) labels.push_back(e.label);
  const double auroc = compute_auroc(probs, labels);
  CHECK(auroc > 0.45);
  CHECK(auroc < 0.55);
}

TEST_CASE("long-context roles produce long sequences, test split only") {
  TempDir dir("probekit_gen_lc");
  const SyntheticConfig config = tiny_config(13);
  const SplitManifest manifest = gen_synthetic(config, dir.path.string());
  for (const ManifestEntry& e : manifest.entries) {
    const ActivationRecord rec = read_activation_file(e.path);
    const bool is_long = e.role == DatasetRole::LcAttack ||
                         e.role == DatasetRole::LcRandomTraffic;
    if (is_long) {
      CHECK(e.split == Split::Test);
      CHECK(rec.activations.cols() >= config.long_min);
    } else {
      CHECK(rec.activations.cols() <= 6 * config.short_max);
    }
  }
}
