#ifndef PROBEKIT_PROBE_HPP
#define PROBEKIT_PROBE_HPP

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "probekit/matrix.hpp"

namespace probekit {

enum class Architecture : std::uint8_t {
  LinearMean,
  LinearEma,
  MlpMean,
  Attention,
  MultiMax,
  RollingAttention,
  AlphaEvolveEarly,
  AlphaEvolveGatedBipolar,
};

// How per-token head scores collapse into one sequence score. Training and
// evaluation may use different modes ("MultiMax (Attn Trained)" style rows).
enum class Aggregation : std::uint8_t { Softmax, HardMax, RollingMean };

constexpr std::size_t kArchitectureCount = 8;

std::string_view architecture_name(Architecture a);
Architecture architecture_from_name(std::string_view name);
std::string_view aggregation_name(Aggregation a);
Aggregation aggregation_from_name(std::string_view name);

struct ProbeSpec {
  Architecture architecture = Architecture::LinearMean;
  std::size_t input_dim = 0;
  std::vector<std::size_t> mlp_widths{100, 100};
  std::size_t heads = 10;
  std::size_t window = 10;       // RollingMean aggregation only
  double ema_alpha = 0.5;        // LinearEma only
  Aggregation train_aggregation = Aggregation::Softmax;
  Aggregation eval_aggregation = Aggregation::Softmax;

  // Fills in the per-architecture default aggregation pair.
  static ProbeSpec make(Architecture arch, std::size_t input_dim);

  void validate() const;
  bool uses_attention_heads() const;

  // Output dimension of the shared per-token transform.
  std::size_t transform_dim() const {
    return mlp_widths.empty() ? input_dim : mlp_widths.back();
  }
};

struct NamedTensor {
  std::string name;
  Matrix value;
};

struct ProbeParams {
  std::vector<NamedTensor> tensors;

  bool has(std::string_view name) const;
  const Matrix& at(std::string_view name) const;
  Matrix& at(std::string_view name);
  double bias() const { return at("bias")(0, 0); }

  std::vector<Matrix> values() const;
  void assign_values(const std::vector<Matrix>& values);
};

// Gated-bipolar hyperparameters the pseudocode leaves unstated.
inline constexpr double kGatedL1Weight = 1e-5;
inline constexpr double kGatedOrthoWeight = 1e-4;
inline constexpr double kLayerNormEpsilon = 1e-6;

// Gaussian init scaled by 1/sqrt(fan-in); bias zero; layer-norm scale one;
// head-mixing weights one (starts as plain MultiMax). Deterministic per
// (spec, seed).
ProbeParams init_params(const ProbeSpec& spec, std::uint64_t seed);

// Shared per-token MLP: alternating linear maps with ReLU between layers
// (none after the last). Prefix selects the tensor family ("mlp." / "enc.").
Matrix apply_mlp(const ProbeParams& params, std::string_view prefix, const Matrix& x);
Matrix mlp_transform(const ProbeParams& params, const Matrix& x);

// Forward passes return the logit before the bias; callers add params.bias()
// at the classification layer.
double forward_linear_mean(const ProbeParams& params, const Matrix& x);
double forward_linear_ema(const ProbeParams& params, const Matrix& x, double alpha);
double forward_mlp_mean(const ProbeParams& params, const Matrix& x);
double forward_attention(const ProbeParams& params, const Matrix& x);
double forward_multimax(const ProbeParams& params, const Matrix& x);
double forward_rolling_attention(const ProbeParams& params, const Matrix& x,
                                 std::size_t window);
double forward_alphaevolve_early(const ProbeParams& params, const Matrix& x);
double forward_gated_bipolar(const ProbeSpec& spec, const ProbeParams& params,
                             const Matrix& x);

// Dispatch on architecture with an explicit aggregation mode for the
// attention family; architectures with fixed pooling ignore the mode.
double probe_logit(const ProbeSpec& spec, const ProbeParams& params, const Matrix& x,
                   Aggregation aggregation);
double eval_logit(const ProbeSpec& spec, const ProbeParams& params, const Matrix& x);

// Mean BCE objective of section-style training: BCE(sigmoid(f(X) + b), label)
// plus the gated-bipolar regularizers where they apply.
double training_loss(const ProbeSpec& spec, const ProbeParams& params, const Matrix& x,
                     int label);

struct LossAndGrads {
  double loss = 0.0;
  std::vector<Matrix> grads;  // aligned with params.tensors
};

LossAndGrads training_loss_grad(const ProbeSpec& spec, const ProbeParams& params,
                                const Matrix& x, int label);

// Self-describing binary container: spec fields plus named float64 tensors.
// Round trips bit-exactly.
void write_probe_file(const std::string& path, const ProbeSpec& spec,
                      const ProbeParams& params);
struct ProbeFile {
  ProbeSpec spec;
  ProbeParams params;
};
ProbeFile read_probe_file(const std::string& path);

}  // namespace probekit

#endif  // PROBEKIT_PROBE_HPP
