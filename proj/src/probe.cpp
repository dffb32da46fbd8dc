#include "probekit/probe.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>

#include "probekit/autodiff.hpp"
#include "probekit/error.hpp"
#include "probekit/numerics.hpp"
#include "probekit/rng.hpp"

namespace probekit {

namespace {

constexpr std::array<std::string_view, kArchitectureCount> kArchNames = {
    "linear_mean",      "linear_ema",       "mlp_mean",
    "attention",        "multimax",         "rolling_attention",
    "alphaevolve_early", "gated_bipolar",
};

constexpr std::array<std::string_view, 3> kAggNames = {"softmax", "hardmax", "rolling_mean"};

void require_input(const ProbeSpec& spec, const Matrix& x) {
  if (x.rows() != spec.input_dim)
    throw contract_error("probe: activation dimension mismatch");
  if (x.cols() == 0) throw contract_error("probe: empty token sequence");
}

}  // namespace

std::string_view architecture_name(Architecture a) {
  return kArchNames[static_cast<std::size_t>(a)];
}

Architecture architecture_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kArchNames.size(); ++i)
    if (kArchNames[i] == name) return static_cast<Architecture>(i);
  throw validation_error("unknown architecture: " + std::string(name));
}

std::string_view aggregation_name(Aggregation a) {
  return kAggNames[static_cast<std::size_t>(a)];
}

Aggregation aggregation_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kAggNames.size(); ++i)
    if (kAggNames[i] == name) return static_cast<Aggregation>(i);
  throw validation_error("unknown aggregation: " + std::string(name));
}

ProbeSpec ProbeSpec::make(Architecture arch, std::size_t input_dim) {
  ProbeSpec spec;
  spec.architecture = arch;
  spec.input_dim = input_dim;
  switch (arch) {
    case Architecture::MultiMax:
    case Architecture::AlphaEvolveEarly:
      spec.train_aggregation = Aggregation::HardMax;
      spec.eval_aggregation = Aggregation::HardMax;
      break;
    case Architecture::RollingAttention:
      spec.train_aggregation = Aggregation::RollingMean;
      spec.eval_aggregation = Aggregation::RollingMean;
      break;
    default:
      spec.train_aggregation = Aggregation::Softmax;
      spec.eval_aggregation = Aggregation::Softmax;
      break;
  }
  return spec;
}

void ProbeSpec::validate() const {
  if (input_dim == 0) throw validation_error("probe spec: input_dim must be >= 1");
  if (heads == 0) throw validation_error("probe spec: heads must be >= 1");
  if (window == 0) throw validation_error("probe spec: window must be >= 1");
  if (!(ema_alpha > 0.0 && ema_alpha < 1.0))
    throw validation_error("probe spec: ema_alpha must lie in (0, 1)");
  for (std::size_t w : mlp_widths)
    if (w == 0) throw validation_error("probe spec: mlp widths must be >= 1");
}

bool ProbeSpec::uses_attention_heads() const {
  switch (architecture) {
    case Architecture::Attention:
    case Architecture::MultiMax:
    case Architecture::RollingAttention:
    case Architecture::AlphaEvolveEarly:
      return true;
    default:
      return false;
  }
}

bool ProbeParams::has(std::string_view name) const {
  for (const NamedTensor& t : tensors)
    if (t.name == name) return true;
  return false;
}

const Matrix& ProbeParams::at(std::string_view name) const {
  for (const NamedTensor& t : tensors)
    if (t.name == name) return t.value;
  throw contract_error("probe params: missing tensor " + std::string(name));
}

Matrix& ProbeParams::at(std::string_view name) {
  for (NamedTensor& t : tensors)
    if (t.name == name) return t.value;
  throw contract_error("probe params: missing tensor " + std::string(name));
}

std::vector<Matrix> ProbeParams::values() const {
  std::vector<Matrix> out;
  out.reserve(tensors.size());
  for (const NamedTensor& t : tensors) out.push_back(t.value);
  return out;
}

void ProbeParams::assign_values(const std::vector<Matrix>& values) {
  if (values.size() != tensors.size())
    throw contract_error("probe params: tensor count mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) tensors[i].value = values[i];
}

namespace {

Matrix gaussian_fan_in(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.normal() * scale;
  return m;
}

void append_mlp_tensors(ProbeParams& params, Rng& root, std::string_view prefix,
                        std::size_t in_dim, const std::vector<std::size_t>& dims) {
  std::size_t prev = in_dim;
  for (std::size_t layer = 0; layer < dims.size(); ++layer) {
    const std::string name = std::string(prefix) + std::to_string(layer);
    Rng r = root.fork(name);
    params.tensors.push_back({name, gaussian_fan_in(r, dims[layer], prev)});
    prev = dims[layer];
  }
}

}  // namespace

ProbeParams init_params(const ProbeSpec& spec, std::uint64_t seed) {
  spec.validate();
  ProbeParams params;
  Rng root = Rng(seed).fork(architecture_name(spec.architecture));
  const std::size_t d = spec.input_dim;
  const std::size_t dt = spec.transform_dim();

  switch (spec.architecture) {
    case Architecture::LinearMean:
    case Architecture::LinearEma: {
      Rng r = root.fork("weight");
      params.tensors.push_back({"weight", gaussian_fan_in(r, 1, d)});
      break;
    }
    case Architecture::MlpMean: {
      std::vector<std::size_t> dims = spec.mlp_widths;
      dims.push_back(1);
      append_mlp_tensors(params, root, "mlp.", d, dims);
      break;
    }
    case Architecture::Attention:
    case Architecture::MultiMax:
    case Architecture::RollingAttention:
    case Architecture::AlphaEvolveEarly: {
      append_mlp_tensors(params, root, "mlp.", d, spec.mlp_widths);
      Rng rq = root.fork("query");
      params.tensors.push_back({"query", gaussian_fan_in(rq, spec.heads, dt)});
      Rng rv = root.fork("value");
      params.tensors.push_back({"value", gaussian_fan_in(rv, spec.heads, dt)});
      if (spec.architecture == Architecture::AlphaEvolveEarly)
        params.tensors.push_back({"head_mix", Matrix(spec.heads, 1, 1.0)});
      break;
    }
    case Architecture::AlphaEvolveGatedBipolar: {
      params.tensors.push_back({"ln.gamma", Matrix(d, 1, 1.0)});
      params.tensors.push_back({"ln.beta", Matrix(d, 1, 0.0)});
      append_mlp_tensors(params, root, "enc.", d, spec.mlp_widths);
      const std::size_t p = spec.heads;  // projection dim
      Rng rp = root.fork("proj");
      params.tensors.push_back({"proj", gaussian_fan_in(rp, p, dt)});
      Rng rg = root.fork("gate");
      params.tensors.push_back({"gate", gaussian_fan_in(rg, p, dt)});
      Rng ro = root.fork("out");
      params.tensors.push_back({"out", gaussian_fan_in(ro, 1, 2 * p)});
      break;
    }
  }
  params.tensors.push_back({"bias", Matrix(1, 1, 0.0)});
  return params;
}

Matrix apply_mlp(const ProbeParams& params, std::string_view prefix, const Matrix& x) {
  Matrix current = x;
  for (std::size_t layer = 0;; ++layer) {
    const std::string name = std::string(prefix) + std::to_string(layer);
    if (!params.has(name)) break;
    if (layer > 0)
      for (std::size_t i = 0; i < current.size(); ++i)
        current.data()[i] = std::max(0.0, current.data()[i]);
    current = matmul(params.at(name), current);
  }
  return current;
}

Matrix mlp_transform(const ProbeParams& params, const Matrix& x) {
  return apply_mlp(params, "mlp.", x);
}

double forward_linear_mean(const ProbeParams& params, const Matrix& x) {
  if (x.cols() == 0) throw contract_error("probe: empty token sequence");
  const Matrix scores = matmul(params.at("weight"), x);
  double acc = 0.0;
  for (std::size_t j = 0; j < scores.cols(); ++j) acc += scores(0, j);
  return acc / static_cast<double>(scores.cols());
}

double forward_linear_ema(const ProbeParams& params, const Matrix& x, double alpha) {
  if (x.cols() == 0) throw contract_error("probe: empty token sequence");
  const Matrix scores = matmul(params.at("weight"), x);
  double ema = 0.0, best = 0.0;
  for (std::size_t j = 0; j < scores.cols(); ++j) {
    ema = alpha * scores(0, j) + (1.0 - alpha) * ema;
    if (j == 0 || ema > best) best = ema;
  }
  return best;
}

double forward_mlp_mean(const ProbeParams& params, const Matrix& x) {
  if (x.cols() == 0) throw contract_error("probe: empty token sequence");
  const Matrix scores = mlp_transform(params, x);
  if (scores.rows() != 1) throw contract_error("mlp_mean: transform must end in a scalar");
  double acc = 0.0;
  for (std::size_t j = 0; j < scores.cols(); ++j) acc += scores(0, j);
  return acc / static_cast<double>(scores.cols());
}

namespace {

// Softmax-weighted mean of one head's values, max-shifted.
double head_softmax_mean(const Matrix& s, const Matrix& v, std::size_t head) {
  const std::size_t n = s.cols();
  double m = s(head, 0);
  for (std::size_t j = 1; j < n; ++j) m = std::max(m, s(head, j));
  double z = 0.0, num = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double e = std::exp(s(head, j) - m);
    z += e;
    num += e * v(head, j);
  }
  return num / z;
}

// Max over sliding-window softmax means for one head; every window uses its
// own shift so extreme score ranges stay finite.
double head_rolling_max(const Matrix& s, const Matrix& v, std::size_t head,
                        std::size_t window) {
  const std::size_t n = s.cols();
  double best = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t lo = (t + 1 >= window) ? t + 1 - window : 0;
    double m = s(head, lo);
    for (std::size_t j = lo + 1; j <= t; ++j) m = std::max(m, s(head, j));
    double z = 0.0, num = 0.0;
    for (std::size_t j = lo; j <= t; ++j) {
      const double e = std::exp(s(head, j) - m);
      z += e;
      num += e * v(head, j);
    }
    const double mean = num / z;
    if (t == 0 || mean > best) best = mean;
  }
  return best;
}

// Per-head pooled outputs for the attention family under a given mode.
std::vector<double> aggregate_heads(const ProbeParams& params, const Matrix& x,
                                    Aggregation mode, std::size_t window) {
  if (x.cols() == 0) throw contract_error("probe: empty token sequence");
  const Matrix y = mlp_transform(params, x);
  const Matrix& value_w = params.at("value");
  const Matrix values = matmul(value_w, y);
  const std::size_t heads = values.rows();
  std::vector<double> out(heads);
  if (mode == Aggregation::HardMax) {
    for (std::size_t h = 0; h < heads; ++h) {
      double best = values(h, 0);
      for (std::size_t j = 1; j < values.cols(); ++j) best = std::max(best, values(h, j));
      out[h] = best;
    }
    return out;
  }
  const Matrix scores = matmul(params.at("query"), y);
  for (std::size_t h = 0; h < heads; ++h)
    out[h] = (mode == Aggregation::Softmax) ? head_softmax_mean(scores, values, h)
                                            : head_rolling_max(scores, values, h, window);
  return out;
}

double combine_heads(const ProbeParams& params, const std::vector<double>& pooled) {
  if (params.has("head_mix")) {
    const Matrix& c = params.at("head_mix");
    double acc = 0.0;
    for (std::size_t h = 0; h < pooled.size(); ++h) acc += c(h, 0) * pooled[h];
    return acc;
  }
  double acc = 0.0;
  for (double v : pooled) acc += v;
  return acc;
}

}  // namespace

double forward_attention(const ProbeParams& params, const Matrix& x) {
  const std::vector<double> pooled =
      aggregate_heads(params, x, Aggregation::Softmax, 1);
  double acc = 0.0;
  for (double v : pooled) acc += v;
  return acc;
}

double forward_multimax(const ProbeParams& params, const Matrix& x) {
  const std::vector<double> pooled = aggregate_heads(params, x, Aggregation::HardMax, 1);
  double acc = 0.0;
  for (double v : pooled) acc += v;
  return acc;
}

double forward_rolling_attention(const ProbeParams& params, const Matrix& x,
                                 std::size_t window) {
  if (window == 0) throw contract_error("rolling_attention: window must be >= 1");
  const std::vector<double> pooled =
      aggregate_heads(params, x, Aggregation::RollingMean, window);
  double acc = 0.0;
  for (double v : pooled) acc += v;
  return acc;
}

double forward_alphaevolve_early(const ProbeParams& params, const Matrix& x) {
  const std::vector<double> pooled = aggregate_heads(params, x, Aggregation::HardMax, 1);
  return combine_heads(params, pooled);
}

double forward_gated_bipolar(const ProbeSpec& spec, const ProbeParams& params,
                             const Matrix& x) {
  require_input(spec, x);
  const std::size_t d = x.rows(), n = x.cols();
  const Matrix& gamma = params.at("ln.gamma");
  const Matrix& beta = params.at("ln.beta");
  Matrix normed(d, n);
  for (std::size_t j = 0; j < n; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < d; ++i) mean += x(i, j);
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double c = x(i, j) - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + kLayerNormEpsilon);
    for (std::size_t i = 0; i < d; ++i)
      normed(i, j) = gamma(i, 0) * ((x(i, j) - mean) * inv) + beta(i, 0);
  }
  const Matrix h = apply_mlp(params, "enc.", normed);
  const Matrix proj = matmul(params.at("proj"), h);
  const Matrix gate = matmul(params.at("gate"), h);
  const std::size_t p = proj.rows();
  Matrix pooled(2 * p, 1);
  for (std::size_t i = 0; i < p; ++i) {
    double hi = -1e300, lo = 1e300;
    for (std::size_t j = 0; j < n; ++j) {
      const double v = proj(i, j) * softplus(gate(i, j));
      hi = std::max(hi, v);
      lo = std::min(lo, v);
    }
    pooled(i, 0) = hi;
    pooled(p + i, 0) = -lo;
  }
  const Matrix& out_w = params.at("out");
  double acc = 0.0;
  for (std::size_t i = 0; i < 2 * p; ++i) acc += out_w(0, i) * pooled(i, 0);
  return acc;
}

double probe_logit(const ProbeSpec& spec, const ProbeParams& params, const Matrix& x,
                   Aggregation aggregation) {
  require_input(spec, x);
  switch (spec.architecture) {
    case Architecture::LinearMean:
      return forward_linear_mean(params, x);
    case Architecture::LinearEma:
      return forward_linear_ema(params, x, spec.ema_alpha);
    case Architecture::MlpMean:
      return forward_mlp_mean(params, x);
    case Architecture::AlphaEvolveGatedBipolar:
      return forward_gated_bipolar(spec, params, x);
    default:
      return combine_heads(params,
                           aggregate_heads(params, x, aggregation, spec.window));
  }
}

double eval_logit(const ProbeSpec& spec, const ProbeParams& params, const Matrix& x) {
  return probe_logit(spec, params, x, spec.eval_aggregation);
}

namespace {

struct GraphBuild {
  ad::Graph graph;
  std::vector<ad::VarId> param_vars;  // aligned with params.tensors
  ad::VarId loss = -1;
};

ad::VarId find_var(const ProbeParams& params, const std::vector<ad::VarId>& vars,
                   std::string_view name) {
  for (std::size_t i = 0; i < params.tensors.size(); ++i)
    if (params.tensors[i].name == name) return vars[i];
  throw contract_error("probe params: missing tensor " + std::string(name));
}

ad::VarId build_mlp(ad::Graph& g, const ProbeParams& params,
                    const std::vector<ad::VarId>& vars, std::string_view prefix,
                    ad::VarId x) {
  ad::VarId current = x;
  for (std::size_t layer = 0;; ++layer) {
    const std::string name = std::string(prefix) + std::to_string(layer);
    if (!params.has(name)) break;
    if (layer > 0) current = g.relu(current);
    current = g.matmul(find_var(params, vars, name), current);
  }
  return current;
}

GraphBuild build_training_graph(const ProbeSpec& spec, const ProbeParams& params,
                                const Matrix& x, int label) {
  require_input(spec, x);
  GraphBuild b;
  ad::Graph& g = b.graph;
  b.param_vars.reserve(params.tensors.size());
  for (const NamedTensor& t : params.tensors) b.param_vars.push_back(g.param(t.value));
  const ad::VarId xv = g.constant(x);

  ad::VarId logit = -1;
  switch (spec.architecture) {
    case Architecture::LinearMean:
      logit = g.mean_row(g.matmul(find_var(params, b.param_vars, "weight"), xv));
      break;
    case Architecture::LinearEma:
      logit = g.ema_max_row(g.matmul(find_var(params, b.param_vars, "weight"), xv),
                            spec.ema_alpha);
      break;
    case Architecture::MlpMean:
      logit = g.mean_row(build_mlp(g, params, b.param_vars, "mlp.", xv));
      break;
    case Architecture::Attention:
    case Architecture::MultiMax:
    case Architecture::RollingAttention:
    case Architecture::AlphaEvolveEarly: {
      const ad::VarId y = build_mlp(g, params, b.param_vars, "mlp.", xv);
      const ad::VarId values = g.matmul(find_var(params, b.param_vars, "value"), y);
      ad::VarId pooled = -1;
      switch (spec.train_aggregation) {
        case Aggregation::HardMax:
          pooled = g.max_rows(values);
          break;
        case Aggregation::Softmax:
          pooled = g.softmax_mean_heads(
              g.matmul(find_var(params, b.param_vars, "query"), y), values);
          break;
        case Aggregation::RollingMean:
          pooled = g.rolling_max_mean_heads(
              g.matmul(find_var(params, b.param_vars, "query"), y), values, spec.window);
          break;
      }
      logit = params.has("head_mix")
                  ? g.dot(find_var(params, b.param_vars, "head_mix"), pooled)
                  : g.sum_all(pooled);
      break;
    }
    case Architecture::AlphaEvolveGatedBipolar: {
      const ad::VarId normed = g.layer_norm_cols(
          xv, find_var(params, b.param_vars, "ln.gamma"),
          find_var(params, b.param_vars, "ln.beta"), kLayerNormEpsilon);
      const ad::VarId h = build_mlp(g, params, b.param_vars, "enc.", normed);
      const ad::VarId proj_var = find_var(params, b.param_vars, "proj");
      const ad::VarId v =
          g.mul(g.matmul(proj_var, h),
                g.softplus(g.matmul(find_var(params, b.param_vars, "gate"), h)));
      const ad::VarId pool =
          g.concat_rows(g.max_rows(v), g.scale(g.min_rows(v), -1.0));
      logit = g.matmul(find_var(params, b.param_vars, "out"), pool);
      break;
    }
  }

  logit = g.add(logit, find_var(params, b.param_vars, "bias"));
  ad::VarId loss = g.bce_logit(logit, label);

  if (spec.architecture == Architecture::AlphaEvolveGatedBipolar) {
    ad::VarId l1 = -1;
    for (std::size_t i = 0; i < params.tensors.size(); ++i) {
      const std::string& name = params.tensors[i].name;
      if (name == "proj" || name == "gate" || name == "out" ||
          name.starts_with("enc.")) {
        const ad::VarId term = g.l1_norm(b.param_vars[i]);
        l1 = (l1 < 0) ? term : g.add(l1, term);
      }
    }
    loss = g.add(loss, g.scale(l1, kGatedL1Weight));
    loss = g.add(loss, g.scale(g.ortho_penalty(find_var(params, b.param_vars, "proj")),
                               kGatedOrthoWeight));
  }
  b.loss = loss;
  return b;
}

}  // namespace

double training_loss(const ProbeSpec& spec, const ProbeParams& params, const Matrix& x,
                     int label) {
  const double logit = probe_logit(spec, params, x, spec.train_aggregation);
  double loss = bce_with_logit(logit + params.bias(), label);
  if (spec.architecture == Architecture::AlphaEvolveGatedBipolar) {
    double l1 = 0.0;
    for (const NamedTensor& t : params.tensors) {
      if (t.name == "proj" || t.name == "gate" || t.name == "out" ||
          t.name.starts_with("enc.")) {
        for (std::size_t i = 0; i < t.value.size(); ++i) l1 += std::abs(t.value.data()[i]);
      }
    }
    const Matrix& w = params.at("proj");
    Matrix m = matmul_transposed_a(w, w);
    for (std::size_t i = 0; i < m.rows(); ++i) m(i, i) -= 1.0;
    double ortho = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) ortho += m.data()[i] * m.data()[i];
    loss += kGatedL1Weight * l1 + kGatedOrthoWeight * ortho;
  }
  return loss;
}

LossAndGrads training_loss_grad(const ProbeSpec& spec, const ProbeParams& params,
                                const Matrix& x, int label) {
  GraphBuild b = build_training_graph(spec, params, x, label);
  b.graph.backward(b.loss);
  LossAndGrads out;
  out.loss = b.graph.value(b.loss)(0, 0);
  out.grads.reserve(params.tensors.size());
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    const Matrix& g = b.graph.grad(b.param_vars[i]);
    out.grads.push_back(g.empty() ? Matrix(params.tensors[i].value.rows(),
                                           params.tensors[i].value.cols())
                                  : g);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

constexpr char kProbeMagic[4] = {'P', 'R', 'B', 'E'};
constexpr std::uint16_t kProbeVersion = 1;

void put_bytes(std::string& buf, const void* p, std::size_t n) {
  buf.append(static_cast<const char*>(p), n);
}
void put_u16(std::string& buf, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  put_bytes(buf, b, 2);
}
void put_u32(std::string& buf, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  put_bytes(buf, b, 4);
}
void put_u64(std::string& buf, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  put_bytes(buf, b, 8);
}
void put_f64(std::string& buf, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(buf, bits);
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  void need(std::size_t n, const char* field) {
    if (pos + n > buf.size())
      throw format_error(std::string("probe file: truncated ") + field);
  }
  void bytes(void* out, std::size_t n, const char* field) {
    need(n, field);
    std::memcpy(out, buf.data() + pos, n);
    pos += n;
  }
  std::uint16_t u16(const char* field) {
    need(2, field);
    std::uint16_t v = 0;
    for (int i = 1; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(buf[pos + i]);
    pos += 2;
    return v;
  }
  std::uint32_t u32(const char* field) {
    need(4, field);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(buf[pos + i]);
    pos += 4;
    return v;
  }
  std::uint64_t u64(const char* field) {
    need(8, field);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(buf[pos + i]);
    pos += 8;
    return v;
  }
  double f64(const char* field) {
    const std::uint64_t bits = u64(field);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
};

}  // namespace

void write_probe_file(const std::string& path, const ProbeSpec& spec,
                      const ProbeParams& params) {
  std::string buf;
  put_bytes(buf, kProbeMagic, 4);
  put_u16(buf, kProbeVersion);
  put_u16(buf, static_cast<std::uint16_t>(spec.architecture));
  put_u32(buf, static_cast<std::uint32_t>(spec.input_dim));
  put_u32(buf, static_cast<std::uint32_t>(spec.mlp_widths.size()));
  for (std::size_t w : spec.mlp_widths) put_u32(buf, static_cast<std::uint32_t>(w));
  put_u32(buf, static_cast<std::uint32_t>(spec.heads));
  put_u32(buf, static_cast<std::uint32_t>(spec.window));
  put_f64(buf, spec.ema_alpha);
  buf.push_back(static_cast<char>(spec.train_aggregation));
  buf.push_back(static_cast<char>(spec.eval_aggregation));
  put_u32(buf, static_cast<std::uint32_t>(params.tensors.size()));
  for (const NamedTensor& t : params.tensors) {
    put_u32(buf, static_cast<std::uint32_t>(t.name.size()));
    put_bytes(buf, t.name.data(), t.name.size());
    put_u64(buf, t.value.rows());
    put_u64(buf, t.value.cols());
    for (std::size_t i = 0; i < t.value.size(); ++i) put_f64(buf, t.value.data()[i]);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open for writing: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw io_error("write failed: " + path);
}

ProbeFile read_probe_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open: " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r{buf};

  char magic[4];
  r.bytes(magic, 4, "magic");
  if (std::memcmp(magic, kProbeMagic, 4) != 0)
    throw format_error("probe file: bad magic");
  const std::uint16_t version = r.u16("version");
  if (version != kProbeVersion)
    throw format_error("probe file: unsupported version " + std::to_string(version));

  ProbeFile f;
  const std::uint16_t arch = r.u16("architecture");
  if (arch >= kArchitectureCount) throw format_error("probe file: bad architecture");
  f.spec.architecture = static_cast<Architecture>(arch);
  f.spec.input_dim = r.u32("input_dim");
  const std::uint32_t n_widths = r.u32("mlp width count");
  f.spec.mlp_widths.clear();
  for (std::uint32_t i = 0; i < n_widths; ++i)
    f.spec.mlp_widths.push_back(r.u32("mlp width"));
  f.spec.heads = r.u32("heads");
  f.spec.window = r.u32("window");
  f.spec.ema_alpha = r.f64("ema_alpha");
  unsigned char aggs[2];
  r.bytes(aggs, 2, "aggregation");
  if (aggs[0] > 2 || aggs[1] > 2) throw format_error("probe file: bad aggregation");
  f.spec.train_aggregation = static_cast<Aggregation>(aggs[0]);
  f.spec.eval_aggregation = static_cast<Aggregation>(aggs[1]);

  const std::uint32_t count = r.u32("tensor count");
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::uint32_t name_len = r.u32("tensor name length");
    r.need(name_len, "tensor name");
    std::string name(buf, r.pos, name_len);
    r.pos += name_len;
    const std::uint64_t rows = r.u64("tensor rows");
    const std::uint64_t cols = r.u64("tensor cols");
    if (rows * cols > (1ULL << 32))
      throw format_error("probe file: tensor too large: " + name);
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = r.f64("tensor data");
    f.params.tensors.push_back({std::move(name), std::move(m)});
  }
  return f;
}

}  // namespace probekit
