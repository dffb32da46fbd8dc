#include "probekit/streaming.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "probekit/error.hpp"
#include "probekit/numerics.hpp"

namespace probekit {

namespace {

Matrix column_from(std::span<const double> token) {
  Matrix x(token.size(), 1);
  for (std::size_t i = 0; i < token.size(); ++i) x(i, 0) = token[i];
  return x;
}

}  // namespace

ProbeStream::ProbeStream(const ProbeSpec& spec, const ProbeParams& params)
    : spec_(&spec), params_(&params) {
  spec.validate();
  switch (spec.architecture) {
    case Architecture::Attention:
    case Architecture::MultiMax:
    case Architecture::RollingAttention:
    case Architecture::AlphaEvolveEarly: {
      mode_ = spec.eval_aggregation;
      const std::size_t h = spec.heads;
      if (mode_ == Aggregation::Softmax) {
        head_avg_.assign(h, 0.0);
        head_lognorm_.assign(h, 0.0);
      } else if (mode_ == Aggregation::HardMax) {
        head_max_.assign(h, 0.0);
      } else {
        head_max_.assign(h, 0.0);
        ring_capacity_ = spec.window;
        ring_scores_.assign(h * spec.window, 0.0);
        ring_values_.assign(h * spec.window, 0.0);
      }
      break;
    }
    case Architecture::AlphaEvolveGatedBipolar:
      pool_max_.assign(spec.heads, 0.0);
      pool_min_.assign(spec.heads, 0.0);
      break;
    default:
      break;
  }
}

double ProbeStream::update(std::span<const double> token) {
  if (token.size() != spec_->input_dim)
    throw contract_error("stream update: activation dimension mismatch");
  const Matrix x = column_from(token);
  const std::size_t n = tokens_;  // tokens consumed before this one

  switch (spec_->architecture) {
    case Architecture::LinearMean: {
      const double s = matmul(params_->at("weight"), x)(0, 0);
      running_mean_ += (s - running_mean_) / static_cast<double>(n + 1);
      break;
    }
    case Architecture::LinearEma: {
      const double s = matmul(params_->at("weight"), x)(0, 0);
      ema_ = spec_->ema_alpha * s + (1.0 - spec_->ema_alpha) * ema_;
      if (n == 0 || ema_ > ema_max_) ema_max_ = ema_;
      break;
    }
    case Architecture::MlpMean: {
      const double s = mlp_transform(*params_, x)(0, 0);
      running_mean_ += (s - running_mean_) / static_cast<double>(n + 1);
      break;
    }
    case Architecture::Attention:
    case Architecture::MultiMax:
    case Architecture::RollingAttention:
    case Architecture::AlphaEvolveEarly: {
      const Matrix y = mlp_transform(*params_, x);
      const Matrix values = matmul(params_->at("value"), y);
      const std::size_t heads = spec_->heads;
      if (mode_ == Aggregation::HardMax) {
        for (std::size_t h = 0; h < heads; ++h) {
          const double v = values(h, 0);
          if (n == 0 || v > head_max_[h]) head_max_[h] = v;
        }
        break;
      }
      const Matrix scores = matmul(params_->at("query"), y);
      if (mode_ == Aggregation::Softmax) {
        for (std::size_t h = 0; h < heads; ++h) {
          const double s = scores(h, 0);
          const double v = values(h, 0);
          if (n == 0) {
            head_lognorm_[h] = s;
            head_avg_[h] = v;
          } else {
            const double m = std::max(head_lognorm_[h], s);
            const double lognorm =
                m + std::log(std::exp(head_lognorm_[h] - m) + std::exp(s - m));
            const double beta = std::exp(s - lognorm);
            head_lognorm_[h] = lognorm;
            head_avg_[h] += beta * (v - head_avg_[h]);
          }
        }
        break;
      }
      // Rolling window: push into the ring, then recompute this window's
      // softmax mean (O(w)) and fold it into the running max. Chronological
      // order matches the batch forward exactly.
      const std::size_t w = spec_->window;
      const std::size_t slot = n % w;
      const std::size_t count = std::min<std::size_t>(n + 1, w);
      for (std::size_t h = 0; h < heads; ++h) {
        ring_scores_[h * w + slot] = scores(h, 0);
        ring_values_[h * w + slot] = values(h, 0);
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < count; ++i) {
          const std::size_t idx = (n + 1 - count + i) % w;
          m = std::max(m, ring_scores_[h * w + idx]);
        }
        double z = 0.0, num = 0.0;
        for (std::size_t i = 0; i < count; ++i) {
          const std::size_t idx = (n + 1 - count + i) % w;
          const double e = std::exp(ring_scores_[h * w + idx] - m);
          z += e;
          num += e * ring_values_[h * w + idx];
        }
        const double mean = num / z;
        if (n == 0 || mean > head_max_[h]) head_max_[h] = mean;
      }
      break;
    }
    case Architecture::AlphaEvolveGatedBipolar: {
      const std::size_t d = spec_->input_dim;
      double mean = 0.0;
      for (std::size_t i = 0; i < d; ++i) mean += x(i, 0);
      mean /= static_cast<double>(d);
      double var = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        const double c = x(i, 0) - mean;
        var += c * c;
      }
      var /= static_cast<double>(d);
      const double inv = 1.0 / std::sqrt(var + kLayerNormEpsilon);
      const Matrix& gamma = params_->at("ln.gamma");
      const Matrix& beta = params_->at("ln.beta");
      Matrix normed(d, 1);
      for (std::size_t i = 0; i < d; ++i)
        normed(i, 0) = gamma(i, 0) * ((x(i, 0) - mean) * inv) + beta(i, 0);
      const Matrix h = apply_mlp(*params_, "enc.", normed);
      const Matrix proj = matmul(params_->at("proj"), h);
      const Matrix gate = matmul(params_->at("gate"), h);
      for (std::size_t i = 0; i < proj.rows(); ++i) {
        const double v = proj(i, 0) * softplus(gate(i, 0));
        if (n == 0 || v > pool_max_[i]) pool_max_[i] = v;
        if (n == 0 || v < pool_min_[i]) pool_min_[i] = v;
      }
      break;
    }
  }
  ++tokens_;
  return logit();
}

double ProbeStream::logit() const {
  if (tokens_ == 0) throw domain_error("stream: no tokens consumed");
  switch (spec_->architecture) {
    case Architecture::LinearMean:
    case Architecture::MlpMean:
      return running_mean_;
    case Architecture::LinearEma:
      return ema_max_;
    case Architecture::Attention:
    case Architecture::MultiMax:
    case Architecture::RollingAttention:
    case Architecture::AlphaEvolveEarly: {
      const std::vector<double>& pooled =
          (mode_ == Aggregation::Softmax) ? head_avg_ : head_max_;
      if (params_->has("head_mix")) {
        const Matrix& c = params_->at("head_mix");
        double acc = 0.0;
        for (std::size_t h = 0; h < pooled.size(); ++h) acc += c(h, 0) * pooled[h];
        return acc;
      }
      double acc = 0.0;
      for (double v : pooled) acc += v;
      return acc;
    }
    case Architecture::AlphaEvolveGatedBipolar: {
      const Matrix& out_w = params_->at("out");
      const std::size_t p = pool_max_.size();
      double acc = 0.0;
      for (std::size_t i = 0; i < p; ++i) acc += out_w(0, i) * pool_max_[i];
      for (std::size_t i = 0; i < p; ++i) acc += out_w(0, p + i) * (-pool_min_[i]);
      return acc;
    }
  }
  throw contract_error("stream: unreachable architecture");
}

double ProbeStream::score() const { return sigmoid(logit() + params_->bias()); }

double stream_batch_deviation(const ProbeSpec& spec, const ProbeParams& params,
                              const Matrix& sequence) {
  ProbeStream stream(spec, params);
  double worst = 0.0;
  std::vector<double> token(sequence.rows());
  for (std::size_t j = 0; j < sequence.cols(); ++j) {
    for (std::size_t i = 0; i < sequence.rows(); ++i) token[i] = sequence(i, j);
    const double streamed = stream.update(token);
    Matrix prefix(sequence.rows(), j + 1);
    for (std::size_t jj = 0; jj <= j; ++jj)
      for (std::size_t i = 0; i < sequence.rows(); ++i) prefix(i, jj) = sequence(i, jj);
    const double batch = eval_logit(spec, params, prefix);
    worst = std::max(worst, std::abs(streamed - batch));
  }
  return worst;
}

}  // namespace probekit
