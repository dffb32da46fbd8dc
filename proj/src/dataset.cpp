#include "probekit/dataset.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "probekit/error.hpp"
#include "probekit/rng.hpp"

namespace fs = std::filesystem;

namespace probekit {

namespace {

constexpr std::array<std::string_view, kRoleCount> kRoleNames = {
    "SC_OT", "SC_HN", "MT_HN", "LC_RT", "SC_A", "MT_A", "LC_A", "SC_J", "SC_ART"};

constexpr std::array<std::string_view, kSplitCount> kSplitNames = {"train", "val", "test"};

// Table-style split grid: rows are roles, columns train/val/test.
constexpr bool kRoleSplitGrid[kRoleCount][kSplitCount] = {
    {true, true, true},    // SC_OT
    {true, false, true},   // SC_HN
    {true, false, true},   // MT_HN
    {false, false, true},  // LC_RT
    {true, true, true},    // SC_A
    {true, false, true},   // MT_A
    {false, false, true},  // LC_A
    {false, false, true},  // SC_J
    {false, false, true},  // SC_ART
};

}  // namespace

std::string_view role_name(DatasetRole role) {
  return kRoleNames[static_cast<std::size_t>(role)];
}

DatasetRole role_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kRoleCount; ++i)
    if (kRoleNames[i] == name) return static_cast<DatasetRole>(i);
  throw validation_error("unknown dataset role: " + std::string(name));
}

std::string_view split_name(Split split) {
  return kSplitNames[static_cast<std::size_t>(split)];
}

Split split_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kSplitCount; ++i)
    if (kSplitNames[i] == name) return static_cast<Split>(i);
  throw validation_error("unknown split: " + std::string(name));
}

bool role_is_attack(DatasetRole role) {
  switch (role) {
    case DatasetRole::ScAttack:
    case DatasetRole::MtAttack:
    case DatasetRole::LcAttack:
    case DatasetRole::ScJailbreak:
    case DatasetRole::ScRedTeam:
      return true;
    default:
      return false;
  }
}

bool role_is_hard_negative(DatasetRole role) {
  return role == DatasetRole::ScHardNegative || role == DatasetRole::MtHardNegative;
}

bool role_is_overtrigger(DatasetRole role) {
  return role == DatasetRole::ScOvertrigger || role == DatasetRole::LcRandomTraffic;
}

bool role_allowed_in_split(DatasetRole role, Split split) {
  return kRoleSplitGrid[static_cast<std::size_t>(role)][static_cast<std::size_t>(split)];
}

std::vector<ManifestEntry> SplitManifest::split_entries(Split split) const {
  std::vector<ManifestEntry> out;
  for (const ManifestEntry& e : entries)
    if (e.split == split) out.push_back(e);
  return out;
}

void SplitManifest::validate() const {
  std::unordered_map<std::string, Split> seen;
  for (const ManifestEntry& e : entries) {
    auto [it, inserted] = seen.emplace(e.path, e.split);
    if (!inserted && it->second != e.split)
      throw validation_error(
          "manifest: file appears in two splits (prompts must not be shared "
          "between train, validation, and test): " + e.path);
    if (!role_allowed_in_split(e.role, e.split))
      throw validation_error("manifest: role " + std::string(role_name(e.role)) +
                             " not allowed in split " +
                             std::string(split_name(e.split)) + ": " + e.path);
    const int expected = role_is_attack(e.role) ? 1 : 0;
    if (e.label != expected)
      throw validation_error("manifest: label " + std::to_string(e.label) +
                             " inconsistent with role " +
                             std::string(role_name(e.role)) + ": " + e.path);
  }
}

SplitManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open manifest: " + path);
  SplitManifest manifest;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string file, role, split, label;
    if (!std::getline(fields, file, '\t') || !std::getline(fields, role, '\t') ||
        !std::getline(fields, split, '\t') || !std::getline(fields, label, '\t'))
      throw validation_error("manifest: malformed line " + std::to_string(line_no) +
                             " in " + path);
    ManifestEntry e;
    e.path = file;
    e.role = role_from_name(role);
    e.split = split_from_name(split);
    if (label != "0" && label != "1")
      throw validation_error("manifest: label must be 0 or 1 at line " +
                             std::to_string(line_no) + " in " + path);
    e.label = label == "1" ? 1 : 0;
    manifest.entries.push_back(std::move(e));
  }
  manifest.validate();
  return manifest;
}

void save_manifest(const SplitManifest& manifest, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw io_error("cannot open manifest for writing: " + path);
  for (const ManifestEntry& e : manifest.entries)
    out << e.path << '\t' << role_name(e.role) << '\t' << split_name(e.split) << '\t'
        << e.label << '\n';
  if (!out) throw io_error("manifest write failed: " + path);
}

// ---------------------------------------------------------------------------
// Activation file format:
//   magic "ACTV" | version u16 = 1 | flags u16 = 0 | d u32 | n u32
//   | label u8 | role u8 | 2 reserved bytes | n*d float32 values token-major
// All integers little-endian.
// ---------------------------------------------------------------------------

namespace {

constexpr char kActvMagic[4] = {'A', 'C', 'T', 'V'};
constexpr std::uint16_t kActvVersion = 1;
constexpr std::size_t kActvHeaderSize = 20;

void le_put_u16(unsigned char* p, std::uint16_t v) {
  p[0] = static_cast<unsigned char>(v);
  p[1] = static_cast<unsigned char>(v >> 8);
}
void le_put_u32(unsigned char* p, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<unsigned char>(v >> (8 * i));
}
std::uint16_t le_get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
std::uint32_t le_get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

void write_activation_file(const std::string& path, const Matrix& activations,
                           int label, DatasetRole role) {
  if (!activations.is_finite())
    throw contract_error("write_activation_file: non-finite activation value");
  if (label != 0 && label != 1)
    throw contract_error("write_activation_file: label must be 0 or 1");
  const std::uint32_t d = static_cast<std::uint32_t>(activations.rows());
  const std::uint32_t n = static_cast<std::uint32_t>(activations.cols());
  std::vector<unsigned char> buf(kActvHeaderSize + 4ULL * d * n, 0);
  std::memcpy(buf.data(), kActvMagic, 4);
  le_put_u16(buf.data() + 4, kActvVersion);
  le_put_u16(buf.data() + 6, 0);  // flags
  le_put_u32(buf.data() + 8, d);
  le_put_u32(buf.data() + 12, n);
  buf[16] = static_cast<unsigned char>(label);
  buf[17] = static_cast<unsigned char>(role);
  // bytes 18..19 reserved (would hold layer provenance for real activations)
  unsigned char* payload = buf.data() + kActvHeaderSize;
  for (std::uint32_t j = 0; j < n; ++j) {
    for (std::uint32_t i = 0; i < d; ++i) {
      const float v = static_cast<float>(activations(i, j));
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      le_put_u32(payload, bits);
      payload += 4;
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open for writing: " + path);
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  if (!out) throw io_error("write failed: " + path);
}

ActivationRecord read_activation_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open: " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  if (buf.size() < kActvHeaderSize)
    throw format_error("activation file: truncated header: " + path);
  if (std::memcmp(buf.data(), kActvMagic, 4) != 0)
    throw format_error("activation file: bad magic: " + path);
  const std::uint16_t version = le_get_u16(buf.data() + 4);
  if (version != kActvVersion)
    throw format_error("activation file: unsupported version " +
                       std::to_string(version) + ": " + path);
  const std::uint16_t flags = le_get_u16(buf.data() + 6);
  if (flags != 0)
    throw format_error("activation file: unsupported flags: " + path);
  const std::uint32_t d = le_get_u32(buf.data() + 8);
  const std::uint32_t n = le_get_u32(buf.data() + 12);
  const unsigned char label = buf[16];
  const unsigned char role = buf[17];
  if (label > 1) throw format_error("activation file: bad label byte: " + path);
  if (role >= kRoleCount) throw format_error("activation file: bad role byte: " + path);
  const std::size_t expected = kActvHeaderSize + 4ULL * d * n;
  if (buf.size() != expected)
    throw format_error("activation file: truncated payload: " + path);

  ActivationRecord rec;
  rec.label = label;
  rec.role = static_cast<DatasetRole>(role);
  rec.activations = Matrix(d, n);
  const unsigned char* payload = buf.data() + kActvHeaderSize;
  for (std::uint32_t j = 0; j < n; ++j) {
    for (std::uint32_t i = 0; i < d; ++i) {
      const std::uint32_t bits = le_get_u32(payload);
      payload += 4;
      float v;
      std::memcpy(&v, &bits, 4);
      if (!std::isfinite(v))
        throw format_error("activation file: non-finite value: " + path);
      rec.activations(i, j) = static_cast<double>(v);
    }
  }
  return rec;
}

std::vector<LabeledExample> load_examples(const SplitManifest& manifest, Split split) {
  std::vector<LabeledExample> out;
  for (const ManifestEntry& e : manifest.entries) {
    if (e.split != split) continue;
    ActivationRecord rec = read_activation_file(e.path);
    out.push_back(LabeledExample{std::move(rec.activations), e.label, e.role, e.path});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic generation
// ---------------------------------------------------------------------------

SyntheticConfig::SyntheticConfig() {
  for (auto& row : counts) row = {0, 0, 0};
  auto set = [&](DatasetRole role, std::size_t train, std::size_t val, std::size_t test) {
    counts[static_cast<std::size_t>(role)] = {train, val, test};
  };
  set(DatasetRole::ScOvertrigger, 700, 300, 400);
  set(DatasetRole::ScHardNegative, 250, 0, 150);
  set(DatasetRole::MtHardNegative, 150, 0, 80);
  set(DatasetRole::LcRandomTraffic, 0, 0, 100);
  set(DatasetRole::ScAttack, 800, 200, 300);
  set(DatasetRole::MtAttack, 100, 0, 80);
  set(DatasetRole::LcAttack, 0, 0, 150);
  set(DatasetRole::ScJailbreak, 0, 0, 150);
  set(DatasetRole::ScRedTeam, 0, 0, 90);
}

void SyntheticConfig::validate() const {
  if (dim == 0) throw validation_error("synthetic config: dim must be >= 1");
  if (short_min == 0 || short_min > short_max)
    throw validation_error("synthetic config: bad short length range");
  if (long_min <= short_max || long_min > long_max)
    throw validation_error("synthetic config: long lengths must exceed short lengths");
  if (signal_window == 0 || signal_window > short_min)
    throw validation_error("synthetic config: signal_window must lie in [1, short_min]");
  if (hardneg_overlap < 0.0 || hardneg_overlap > 1.0)
    throw validation_error("synthetic config: hardneg_overlap must lie in [0, 1]");
  for (std::size_t r = 0; r < kRoleCount; ++r)
    for (std::size_t s = 0; s < kSplitCount; ++s)
      if (counts[r][s] > 0 &&
          !role_allowed_in_split(static_cast<DatasetRole>(r), static_cast<Split>(s)))
        throw validation_error("synthetic config: role " +
                               std::string(role_name(static_cast<DatasetRole>(r))) +
                               " cannot appear in split " +
                               std::string(split_name(static_cast<Split>(s))));
}

void SyntheticConfig::scale_counts(double factor) {
  for (auto& row : counts)
    for (std::size_t& c : row)
      if (c > 0) c = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                  std::llround(c * factor)));
}

namespace {

std::vector<double> random_unit_vector(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double norm2 = 0.0;
  for (double& x : v) {
    x = rng.normal();
    norm2 += x * x;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& x : v) x *= inv;
  return v;
}

// Unit vector at the given cosine to `base`, using `aux` for the orthogonal
// component.
std::vector<double> rotate_from(const std::vector<double>& base,
                                const std::vector<double>& aux, double cosine) {
  const std::size_t d = base.size();
  std::vector<double> ortho(d);
  double dot = 0.0;
  for (std::size_t i = 0; i < d; ++i) dot += base[i] * aux[i];
  double norm2 = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    ortho[i] = aux[i] - dot * base[i];
    norm2 += ortho[i] * ortho[i];
  }
  const double inv = 1.0 / std::sqrt(norm2);
  const double sine = std::sqrt(std::max(0.0, 1.0 - cosine * cosine));
  std::vector<double> out(d);
  for (std::size_t i = 0; i < d; ++i) out[i] = cosine * base[i] + sine * ortho[i] * inv;
  return out;
}

struct Directions {
  std::vector<double> signal;
  std::vector<double> hard_negative;
  std::vector<double> jailbreak;
  std::vector<double> red_team;
};

Directions make_directions(const SyntheticConfig& config) {
  Rng root(config.seed);
  Rng rs = root.fork("signal-direction");
  Directions dirs;
  dirs.signal = random_unit_vector(rs, config.dim);
  Rng rh = root.fork("hardneg-aux");
  dirs.hard_negative =
      rotate_from(dirs.signal, random_unit_vector(rh, config.dim), config.hardneg_overlap);
  Rng rj = root.fork("jailbreak-aux");
  dirs.jailbreak =
      rotate_from(dirs.signal, random_unit_vector(rj, config.dim),
                  std::cos(config.jailbreak_angle_deg * std::numbers::pi / 180.0));
  Rng ra = root.fork("art-aux");
  dirs.red_team =
      rotate_from(dirs.signal, random_unit_vector(ra, config.dim),
                  std::cos(config.art_angle_deg * std::numbers::pi / 180.0));
  return dirs;
}

std::size_t uniform_in(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

Matrix background(Rng& rng, std::size_t dim, std::size_t n, double scale) {
  Matrix x(dim, n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < dim; ++i) x(i, j) = scale * rng.normal();
  return x;
}

void plant_window(Matrix& x, std::size_t start, std::size_t width,
                  const std::vector<double>& direction, double separation) {
  for (std::size_t j = start; j < start + width; ++j)
    for (std::size_t i = 0; i < x.rows(); ++i)
      x(i, j) += separation * direction[i];
}

// One synthetic sequence; deterministic in (config.seed, role, split, index).
Matrix make_sequence(const SyntheticConfig& config, const Directions& dirs,
                     DatasetRole role, Split split, std::size_t index) {
  Rng rng = Rng(config.seed)
                .fork(role_name(role))
                .fork(split_name(split))
                .fork(static_cast<std::uint64_t>(index));
  const std::size_t w = config.signal_window;
  const double sep = config.class_separation;

  switch (role) {
    case DatasetRole::ScOvertrigger: {
      const std::size_t n = uniform_in(rng, config.short_min, config.short_max);
      return background(rng, config.dim, n, config.background_scale);
    }
    case DatasetRole::ScHardNegative:
    case DatasetRole::ScAttack:
    case DatasetRole::ScJailbreak:
    case DatasetRole::ScRedTeam: {
      const std::size_t n = uniform_in(rng, config.short_min, config.short_max);
      Matrix x = background(rng, config.dim, n, config.background_scale);
      const std::size_t start = uniform_in(rng, 0, n - w);
      const std::vector<double>* dir = &dirs.signal;
      if (role == DatasetRole::ScHardNegative) dir = &dirs.hard_negative;
      if (role == DatasetRole::ScJailbreak) dir = &dirs.jailbreak;
      if (role == DatasetRole::ScRedTeam) dir = &dirs.red_team;
      plant_window(x, start, w, *dir, sep);
      return x;
    }
    case DatasetRole::MtHardNegative:
    case DatasetRole::MtAttack: {
      // 2-6 short turns; only the final turn may carry the planted window.
      const std::size_t turns = uniform_in(rng, 2, 6);
      std::vector<std::size_t> lens(turns);
      std::size_t total = 0;
      for (std::size_t& len : lens) {
        len = uniform_in(rng, config.short_min, config.short_max);
        total += len;
      }
      Matrix x = background(rng, config.dim, total, config.background_scale);
      const std::size_t last_start = total - lens.back();
      const std::size_t start = last_start + uniform_in(rng, 0, lens.back() - w);
      plant_window(x, start, w,
                   role == DatasetRole::MtAttack ? dirs.signal : dirs.hard_negative, sep);
      return x;
    }
    case DatasetRole::LcRandomTraffic: {
      const std::size_t n = uniform_in(rng, config.long_min, config.long_max);
      return background(rng, config.dim, n, config.background_scale);
    }
    case DatasetRole::LcAttack: {
      const std::size_t n = uniform_in(rng, config.long_min, config.long_max);
      Matrix x = background(rng, config.dim, n, config.background_scale);
      // Cycle the window through prefix, suffix, and interleaved placement.
      std::size_t start = 0;
      switch (index % 3) {
        case 0: start = 0; break;
        case 1: start = n - w; break;
        default: start = n / 2; break;
      }
      plant_window(x, start, w, dirs.signal, sep);
      return x;
    }
  }
  throw contract_error("make_sequence: unreachable role");
}

}  // namespace

std::vector<double> synthetic_signal_direction(const SyntheticConfig& config) {
  return make_directions(config).signal;
}

SplitManifest gen_synthetic(const SyntheticConfig& config, const std::string& out_dir,
                            std::size_t workers) {
  config.validate();
  const fs::path base(out_dir);
  const fs::path act_dir = base / "activations";
  std::error_code ec;
  fs::create_directories(act_dir, ec);
  if (ec) throw io_error("cannot create output directory: " + act_dir.string());

  const Directions dirs = make_directions(config);

  struct Task {
    DatasetRole role;
    Split split;
    std::size_t index;
    std::string path;
  };
  std::vector<Task> tasks;
  for (std::size_t r = 0; r < kRoleCount; ++r) {
    for (std::size_t s = 0; s < kSplitCount; ++s) {
      const DatasetRole role = static_cast<DatasetRole>(r);
      const Split split = static_cast<Split>(s);
      for (std::size_t i = 0; i < config.counts[r][s]; ++i) {
        std::string file = std::string(role_name(role)) + "_" +
                           std::string(split_name(split)) + "_" + std::to_string(i) +
                           ".actv";
        tasks.push_back(Task{role, split, i, (act_dir / file).string()});
      }
    }
  }

  auto run_task = [&](const Task& t) {
    const Matrix x = make_sequence(config, dirs, t.role, t.split, t.index);
    write_activation_file(t.path, x, role_is_attack(t.role) ? 1 : 0, t.role);
  };

  if (workers <= 1) {
    for (const Task& t : tasks) run_task(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= tasks.size()) return;
          run_task(tasks[i]);
        }
      });
    for (std::thread& t : pool) t.join();
  }

  SplitManifest manifest;
  for (const Task& t : tasks)
    manifest.entries.push_back(
        ManifestEntry{t.path, t.role, t.split, role_is_attack(t.role) ? 1 : 0});
  manifest.validate();
  save_manifest(manifest, (base / "manifest.tsv").string());
  return manifest;
}

}  // namespace probekit
