#include "probekit/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "probekit/error.hpp"
#include "probekit/numerics.hpp"

namespace probekit::ad {

VarId Graph::push(Matrix value, bool needs_grad,
                  std::function<void(Graph&, const Matrix&)> backprop) {
  nodes_.push_back(Node{std::move(value), Matrix(), std::move(backprop), needs_grad});
  return static_cast<VarId>(nodes_.size() - 1);
}

Matrix& Graph::grad_buffer(VarId id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
  return n.grad;
}

void Graph::accumulate(VarId id, const Matrix& g) {
  if (!nodes_[id].needs_grad) return;
  grad_buffer(id) += g;
}

VarId Graph::constant(Matrix value) { return push(std::move(value), false, nullptr); }

VarId Graph::param(Matrix value) { return push(std::move(value), true, nullptr); }

VarId Graph::matmul(VarId a, VarId b) {
  Matrix out = probekit::matmul(nodes_[a].value, nodes_[b].value);
  const bool needs = nodes_[a].needs_grad || nodes_[b].needs_grad;
  return push(std::move(out), needs, [a, b](Graph& g, const Matrix& dy) {
    if (g.nodes_[a].needs_grad)
      g.accumulate(a, matmul_transposed_b(dy, g.nodes_[b].value));
    if (g.nodes_[b].needs_grad)
      g.accumulate(b, matmul_transposed_a(g.nodes_[a].value, dy));
  });
}

VarId Graph::add(VarId a, VarId b) {
  require_same_shape(nodes_[a].value, nodes_[b].value, "ad::add");
  Matrix out = nodes_[a].value;
  out += nodes_[b].value;
  const bool needs = nodes_[a].needs_grad || nodes_[b].needs_grad;
  return push(std::move(out), needs, [a, b](Graph& g, const Matrix& dy) {
    g.accumulate(a, dy);
    g.accumulate(b, dy);
  });
}

VarId Graph::sub(VarId a, VarId b) {
  require_same_shape(nodes_[a].value, nodes_[b].value, "ad::sub");
  Matrix out = nodes_[a].value;
  const Matrix& bv = nodes_[b].value;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= bv.data()[i];
  const bool needs = nodes_[a].needs_grad || nodes_[b].needs_grad;
  return push(std::move(out), needs, [a, b](Graph& g, const Matrix& dy) {
    g.accumulate(a, dy);
    if (!g.nodes_[b].needs_grad) return;
    Matrix neg = dy;
    neg *= -1.0;
    g.accumulate(b, neg);
  });
}

VarId Graph::mul(VarId a, VarId b) {
  require_same_shape(nodes_[a].value, nodes_[b].value, "ad::mul");
  Matrix out = nodes_[a].value;
  const Matrix& bv = nodes_[b].value;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= bv.data()[i];
  const bool needs = nodes_[a].needs_grad || nodes_[b].needs_grad;
  return push(std::move(out), needs, [a, b](Graph& g, const Matrix& dy) {
    if (g.nodes_[a].needs_grad) {
      Matrix da = dy;
      const Matrix& bv2 = g.nodes_[b].value;
      for (std::size_t i = 0; i < da.size(); ++i) da.data()[i] *= bv2.data()[i];
      g.accumulate(a, da);
    }
    if (g.nodes_[b].needs_grad) {
      Matrix db = dy;
      const Matrix& av = g.nodes_[a].value;
      for (std::size_t i = 0; i < db.size(); ++i) db.data()[i] *= av.data()[i];
      g.accumulate(b, db);
    }
  });
}

VarId Graph::scale(VarId a, double c) {
  Matrix out = nodes_[a].value;
  out *= c;
  return push(std::move(out), nodes_[a].needs_grad, [a, c](Graph& g, const Matrix& dy) {
    Matrix da = dy;
    da *= c;
    g.accumulate(a, da);
  });
}

VarId Graph::relu(VarId a) {
  Matrix out = nodes_[a].value;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = std::max(0.0, out.data()[i]);
  return push(std::move(out), nodes_[a].needs_grad, [a](Graph& g, const Matrix& dy) {
    Matrix da = dy;
    const Matrix& x = g.nodes_[a].value;
    for (std::size_t i = 0; i < da.size(); ++i)
      if (x.data()[i] <= 0.0) da.data()[i] = 0.0;
    g.accumulate(a, da);
  });
}

VarId Graph::softplus(VarId a) {
  Matrix out = nodes_[a].value;
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data()[i] = probekit::softplus(out.data()[i]);
  return push(std::move(out), nodes_[a].needs_grad, [a](Graph& g, const Matrix& dy) {
    Matrix da = dy;
    const Matrix& x = g.nodes_[a].value;
    for (std::size_t i = 0; i < da.size(); ++i) da.data()[i] *= sigmoid(x.data()[i]);
    g.accumulate(a, da);
  });
}

VarId Graph::layer_norm_cols(VarId x, VarId gamma, VarId beta, double eps) {
  const Matrix& xv = nodes_[x].value;
  const std::size_t d = xv.rows(), n = xv.cols();
  if (nodes_[gamma].value.rows() != d || nodes_[beta].value.rows() != d)
    throw contract_error("ad::layer_norm_cols: scale/shift dimension mismatch");
  Matrix normed(d, n);   // x_hat, saved for backward
  Matrix inv_std(1, n);
  for (std::size_t j = 0; j < n; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < d; ++i) mean += xv(i, j);
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double c = xv(i, j) - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std(0, j) = is;
    for (std::size_t i = 0; i < d; ++i) normed(i, j) = (xv(i, j) - mean) * is;
  }
  Matrix out(d, n);
  const Matrix& gv = nodes_[gamma].value;
  const Matrix& bv = nodes_[beta].value;
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < d; ++i) out(i, j) = gv(i, 0) * normed(i, j) + bv(i, 0);
  const bool needs =
      nodes_[x].needs_grad || nodes_[gamma].needs_grad || nodes_[beta].needs_grad;
  return push(std::move(out), needs,
              [x, gamma, beta, normed, inv_std](Graph& g, const Matrix& dy) {
                const std::size_t d = dy.rows(), n = dy.cols();
                const Matrix& gv = g.nodes_[gamma].value;
                if (g.nodes_[beta].needs_grad) {
                  Matrix db(d, 1);
                  for (std::size_t i = 0; i < d; ++i)
                    for (std::size_t j = 0; j < n; ++j) db(i, 0) += dy(i, j);
                  g.accumulate(beta, db);
                }
                if (g.nodes_[gamma].needs_grad) {
                  Matrix dg(d, 1);
                  for (std::size_t i = 0; i < d; ++i)
                    for (std::size_t j = 0; j < n; ++j) dg(i, 0) += dy(i, j) * normed(i, j);
                  g.accumulate(gamma, dg);
                }
                if (g.nodes_[x].needs_grad) {
                  Matrix dx(d, n);
                  for (std::size_t j = 0; j < n; ++j) {
                    double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                    for (std::size_t i = 0; i < d; ++i) {
                      const double dxh = dy(i, j) * gv(i, 0);
                      sum_dxhat += dxh;
                      sum_dxhat_xhat += dxh * normed(i, j);
                    }
                    const double inv_d = 1.0 / static_cast<double>(d);
                    for (std::size_t i = 0; i < d; ++i) {
                      const double dxh = dy(i, j) * gv(i, 0);
                      dx(i, j) = inv_std(0, j) * (dxh - inv_d * sum_dxhat -
                                                  normed(i, j) * inv_d * sum_dxhat_xhat);
                    }
                  }
                  g.accumulate(x, dx);
                }
              });
}

VarId Graph::mean_row(VarId a) {
  const Matrix& av = nodes_[a].value;
  if (av.rows() != 1) throw contract_error("ad::mean_row: expected a row vector");
  if (av.cols() == 0) throw contract_error("ad::mean_row: empty row");
  double acc = 0.0;
  for (std::size_t j = 0; j < av.cols(); ++j) acc += av(0, j);
  Matrix out = Matrix::scalar(acc / static_cast<double>(av.cols()));
  return push(std::move(out), nodes_[a].needs_grad, [a](Graph& g, const Matrix& dy) {
    const Matrix& av2 = g.nodes_[a].value;
    Matrix da(1, av2.cols(), dy(0, 0) / static_cast<double>(av2.cols()));
    g.accumulate(a, da);
  });
}

VarId Graph::sum_all(VarId a) {
  const Matrix& av = nodes_[a].value;
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) acc += av.data()[i];
  return push(Matrix::scalar(acc), nodes_[a].needs_grad, [a](Graph& g, const Matrix& dy) {
    const Matrix& av2 = g.nodes_[a].value;
    Matrix da(av2.rows(), av2.cols(), dy(0, 0));
    g.accumulate(a, da);
  });
}

VarId Graph::max_rows(VarId a) {
  const Matrix& av = nodes_[a].value;
  if (av.cols() == 0) throw contract_error("ad::max_rows: empty input");
  Matrix out(av.rows(), 1);
  std::vector<std::size_t> argmax(av.rows());
  for (std::size_t i = 0; i < av.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < av.cols(); ++j)
      if (av(i, j) > av(i, best)) best = j;
    argmax[i] = best;
    out(i, 0) = av(i, best);
  }
  return push(std::move(out), nodes_[a].needs_grad,
              [a, argmax](Graph& g, const Matrix& dy) {
                const Matrix& av2 = g.nodes_[a].value;
                Matrix da(av2.rows(), av2.cols());
                for (std::size_t i = 0; i < av2.rows(); ++i) da(i, argmax[i]) = dy(i, 0);
                g.accumulate(a, da);
              });
}

VarId Graph::min_rows(VarId a) {
  const Matrix& av = nodes_[a].value;
  if (av.cols() == 0) throw contract_error("ad::min_rows: empty input");
  Matrix out(av.rows(), 1);
  std::vector<std::size_t> argmin(av.rows());
  for (std::size_t i = 0; i < av.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < av.cols(); ++j)
      if (av(i, j) < av(i, best)) best = j;
    argmin[i] = best;
    out(i, 0) = av(i, best);
  }
  return push(std::move(out), nodes_[a].needs_grad,
              [a, argmin](Graph& g, const Matrix& dy) {
                const Matrix& av2 = g.nodes_[a].value;
                Matrix da(av2.rows(), av2.cols());
                for (std::size_t i = 0; i < av2.rows(); ++i) da(i, argmin[i]) = dy(i, 0);
                g.accumulate(a, da);
              });
}

VarId Graph::concat_rows(VarId a, VarId b) {
  const Matrix& av = nodes_[a].value;
  const Matrix& bv = nodes_[b].value;
  if (av.cols() != 1 || bv.cols() != 1)
    throw contract_error("ad::concat_rows: expected column vectors");
  Matrix out(av.rows() + bv.rows(), 1);
  for (std::size_t i = 0; i < av.rows(); ++i) out(i, 0) = av(i, 0);
  for (std::size_t i = 0; i < bv.rows(); ++i) out(av.rows() + i, 0) = bv(i, 0);
  const bool needs = nodes_[a].needs_grad || nodes_[b].needs_grad;
  return push(std::move(out), needs, [a, b](Graph& g, const Matrix& dy) {
    const std::size_t na = g.nodes_[a].value.rows();
    if (g.nodes_[a].needs_grad) {
      Matrix da(na, 1);
      for (std::size_t i = 0; i < na; ++i) da(i, 0) = dy(i, 0);
      g.accumulate(a, da);
    }
    if (g.nodes_[b].needs_grad) {
      const std::size_t nb = g.nodes_[b].value.rows();
      Matrix db(nb, 1);
      for (std::size_t i = 0; i < nb; ++i) db(i, 0) = dy(na + i, 0);
      g.accumulate(b, db);
    }
  });
}

VarId Graph::dot(VarId a, VarId b) {
  require_same_shape(nodes_[a].value, nodes_[b].value, "ad::dot");
  const Matrix& av = nodes_[a].value;
  const Matrix& bv = nodes_[b].value;
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) acc += av.data()[i] * bv.data()[i];
  const bool needs = nodes_[a].needs_grad || nodes_[b].needs_grad;
  return push(Matrix::scalar(acc), needs, [a, b](Graph& g, const Matrix& dy) {
    const double s = dy(0, 0);
    if (g.nodes_[a].needs_grad) {
      Matrix da = g.nodes_[b].value;
      da *= s;
      g.accumulate(a, da);
    }
    if (g.nodes_[b].needs_grad) {
      Matrix db = g.nodes_[a].value;
      db *= s;
      g.accumulate(b, db);
    }
  });
}

VarId Graph::softmax_mean_heads(VarId scores, VarId values) {
  const Matrix& sv = nodes_[scores].value;
  const Matrix& vv = nodes_[values].value;
  require_same_shape(sv, vv, "ad::softmax_mean_heads");
  if (sv.cols() == 0) throw contract_error("ad::softmax_mean_heads: empty sequence");
  const std::size_t h = sv.rows(), n = sv.cols();
  Matrix weights(h, n);  // softmax per head, saved for backward
  Matrix out(h, 1);
  for (std::size_t i = 0; i < h; ++i) {
    double m = sv(i, 0);
    for (std::size_t j = 1; j < n; ++j) m = std::max(m, sv(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      weights(i, j) = std::exp(sv(i, j) - m);
      z += weights(i, j);
    }
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      weights(i, j) /= z;
      mean += weights(i, j) * vv(i, j);
    }
    out(i, 0) = mean;
  }
  const bool needs = nodes_[scores].needs_grad || nodes_[values].needs_grad;
  Matrix means = out;
  return push(std::move(out), needs,
              [scores, values, weights, means](Graph& g, const Matrix& dy) {
                const Matrix& vv2 = g.nodes_[values].value;
                const std::size_t h = weights.rows(), n = weights.cols();
                if (g.nodes_[values].needs_grad) {
                  Matrix dv(h, n);
                  for (std::size_t i = 0; i < h; ++i)
                    for (std::size_t j = 0; j < n; ++j)
                      dv(i, j) = dy(i, 0) * weights(i, j);
                  g.accumulate(values, dv);
                }
                if (g.nodes_[scores].needs_grad) {
                  Matrix ds(h, n);
                  for (std::size_t i = 0; i < h; ++i)
                    for (std::size_t j = 0; j < n; ++j)
                      ds(i, j) = dy(i, 0) * weights(i, j) * (vv2(i, j) - means(i, 0));
                  g.accumulate(scores, ds);
                }
              });
}

VarId Graph::rolling_max_mean_heads(VarId scores, VarId values, std::size_t window) {
  const Matrix& sv = nodes_[scores].value;
  const Matrix& vv = nodes_[values].value;
  require_same_shape(sv, vv, "ad::rolling_max_mean_heads");
  if (window == 0) throw contract_error("ad::rolling_max_mean_heads: window must be >= 1");
  if (sv.cols() == 0) throw contract_error("ad::rolling_max_mean_heads: empty sequence");
  const std::size_t h = sv.rows(), n = sv.cols();
  Matrix out(h, 1);
  // Per head: argmax window end, plus that window's softmax weights and mean.
  std::vector<std::size_t> best_end(h);
  Matrix best_weights(h, window);
  Matrix best_means(h, 1);
  // One global shift per head keeps this at n exps instead of n*w. A window
  // far below the head max can underflow the shifted sum to zero; those rare
  // windows are recomputed with a local shift.
  std::vector<double> shifted(n);
  std::vector<double> exp_buf(window);
  for (std::size_t i = 0; i < h; ++i) {
    double head_max = sv(i, 0);
    for (std::size_t j = 1; j < n; ++j) head_max = std::max(head_max, sv(i, j));
    for (std::size_t j = 0; j < n; ++j) shifted[j] = std::exp(sv(i, j) - head_max);
    double best = 0.0;
    bool have_best = false;
    for (std::size_t t = 0; t < n; ++t) {
      const std::size_t lo = (t + 1 >= window) ? t + 1 - window : 0;
      const std::size_t len = t - lo + 1;
      double z = 0.0, num = 0.0;
      for (std::size_t j = lo; j <= t; ++j) {
        z += shifted[j];
        num += shifted[j] * vv(i, j);
      }
      double mean;
      if (z < 1e-280) {
        double m = sv(i, lo);
        for (std::size_t j = lo + 1; j <= t; ++j) m = std::max(m, sv(i, j));
        z = 0.0;
        num = 0.0;
        for (std::size_t j = lo; j <= t; ++j) {
          exp_buf[j - lo] = std::exp(sv(i, j) - m);
          z += exp_buf[j - lo];
          num += exp_buf[j - lo] * vv(i, j);
        }
        mean = num / z;
        if (have_best && mean <= best) continue;
        have_best = true;
        best = mean;
        best_end[i] = t;
        best_means(i, 0) = mean;
        for (std::size_t j = 0; j < len; ++j) best_weights(i, j) = exp_buf[j] / z;
        continue;
      }
      mean = num / z;
      if (!have_best || mean > best) {
        have_best = true;
        best = mean;
        best_end[i] = t;
        best_means(i, 0) = mean;
        for (std::size_t j = lo; j <= t; ++j) best_weights(i, j - lo) = shifted[j] / z;
      }
    }
    out(i, 0) = best;
  }
  const bool needs = nodes_[scores].needs_grad || nodes_[values].needs_grad;
  return push(std::move(out), needs,
              [scores, values, window, best_end, best_weights, best_means](
                  Graph& g, const Matrix& dy) {
                const Matrix& vv2 = g.nodes_[values].value;
                const std::size_t h = vv2.rows();
                const bool want_s = g.nodes_[scores].needs_grad;
                const bool want_v = g.nodes_[values].needs_grad;
                Matrix ds(want_s ? h : 0, want_s ? vv2.cols() : 0);
                Matrix dv(want_v ? h : 0, want_v ? vv2.cols() : 0);
                for (std::size_t i = 0; i < h; ++i) {
                  const std::size_t t = best_end[i];
                  const std::size_t lo = (t + 1 >= window) ? t + 1 - window : 0;
                  for (std::size_t j = lo; j <= t; ++j) {
                    const double w = best_weights(i, j - lo);
                    if (want_v) dv(i, j) = dy(i, 0) * w;
                    if (want_s) ds(i, j) = dy(i, 0) * w * (vv2(i, j) - best_means(i, 0));
                  }
                }
                if (want_v) g.accumulate(values, dv);
                if (want_s) g.accumulate(scores, ds);
              });
}

VarId Graph::ema_max_row(VarId scores, double alpha) {
  const Matrix& sv = nodes_[scores].value;
  if (sv.rows() != 1) throw contract_error("ad::ema_max_row: expected a row vector");
  if (sv.cols() == 0) throw contract_error("ad::ema_max_row: empty sequence");
  const std::size_t n = sv.cols();
  double ema = 0.0, best = 0.0;
  std::size_t best_j = 0;
  for (std::size_t j = 0; j < n; ++j) {
    ema = alpha * sv(0, j) + (1.0 - alpha) * ema;
    if (j == 0 || ema > best) {
      best = ema;
      best_j = j;
    }
  }
  return push(Matrix::scalar(best), nodes_[scores].needs_grad,
              [scores, alpha, best_j](Graph& g, const Matrix& dy) {
                const std::size_t n = g.nodes_[scores].value.cols();
                Matrix ds(1, n);
                double coeff = alpha;
                for (std::size_t back = 0; back <= best_j; ++back) {
                  ds(0, best_j - back) = dy(0, 0) * coeff;
                  coeff *= (1.0 - alpha);
                }
                g.accumulate(scores, ds);
              });
}

VarId Graph::bce_logit(VarId z, int label) {
  const double zv = nodes_[z].value(0, 0);
  const double p = sigmoid(zv);
  const bool clamped = p < kBceProbClamp || p > 1.0 - kBceProbClamp;
  const double loss = bce_loss(p, label);
  return push(Matrix::scalar(loss), nodes_[z].needs_grad,
              [z, label, p, clamped](Graph& g, const Matrix& dy) {
                const double dz = clamped ? 0.0 : (p - static_cast<double>(label));
                g.accumulate(z, Matrix::scalar(dy(0, 0) * dz));
              });
}

VarId Graph::l1_norm(VarId a) {
  const Matrix& av = nodes_[a].value;
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) acc += std::abs(av.data()[i]);
  return push(Matrix::scalar(acc), nodes_[a].needs_grad, [a](Graph& g, const Matrix& dy) {
    const Matrix& av2 = g.nodes_[a].value;
    Matrix da(av2.rows(), av2.cols());
    for (std::size_t i = 0; i < av2.size(); ++i) {
      const double v = av2.data()[i];
      da.data()[i] = dy(0, 0) * (v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0));
    }
    g.accumulate(a, da);
  });
}

VarId Graph::ortho_penalty(VarId w) {
  const Matrix& wv = nodes_[w].value;
  Matrix m = matmul_transposed_a(wv, wv);  // W^T W, square
  for (std::size_t i = 0; i < m.rows(); ++i) m(i, i) -= 1.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) acc += m.data()[i] * m.data()[i];
  return push(Matrix::scalar(acc), nodes_[w].needs_grad,
              [w, m](Graph& g, const Matrix& dy) {
                // d/dW ||W^T W - I||_F^2 = 4 W (W^T W - I)
                Matrix dw = probekit::matmul(g.nodes_[w].value, m);
                dw *= 4.0 * dy(0, 0);
                g.accumulate(w, dw);
              });
}

void Graph::backward(VarId loss) {
  if (nodes_[loss].value.rows() != 1 || nodes_[loss].value.cols() != 1)
    throw contract_error("ad::backward: loss must be scalar");
  grad_buffer(loss)(0, 0) += 1.0;
  for (VarId id = static_cast<VarId>(nodes_.size()) - 1; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.backprop && !n.grad.empty() && n.needs_grad) n.backprop(*this, n.grad);
  }
}

}  // namespace probekit::ad
