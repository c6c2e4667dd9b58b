#include "zcap/ops.hpp"

#include <cmath>
#include <stdexcept>

namespace zcap::ops {

static void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2, "matmul: rank-2 inputs required");
  require(a.shape[1] == b.shape[0], "matmul: inner dimensions disagree");
  const size_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
  Tensor out({m, n});
  for (size_t i = 0; i < m; ++i) {
    const double* arow = a.row(i);
    double* orow = out.row(i);
    for (size_t kk = 0; kk < k; ++kk) {
      const double aik = arow[kk];
      if (aik == 0.0) continue;
      const double* brow = b.row(kk);
      for (size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

void matmul_backward(const Tensor& a, const Tensor& b, const Tensor& dy, Tensor& da, Tensor& db) {
  const size_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
  require(dy.shape[0] == m && dy.shape[1] == n, "matmul_backward: dy shape");
  if (da.v.empty()) da = Tensor({m, k});
  if (db.v.empty()) db = Tensor({k, n});
  // da += dy * b^T
  for (size_t i = 0; i < m; ++i) {
    const double* dyrow = dy.row(i);
    double* darow = da.row(i);
    for (size_t kk = 0; kk < k; ++kk) {
      const double* brow = b.row(kk);
      double acc = 0.0;
      for (size_t j = 0; j < n; ++j) acc += dyrow[j] * brow[j];
      darow[kk] += acc;
    }
  }
  // db += a^T * dy
  for (size_t i = 0; i < m; ++i) {
    const double* arow = a.row(i);
    const double* dyrow = dy.row(i);
    for (size_t kk = 0; kk < k; ++kk) {
      const double aik = arow[kk];
      if (aik == 0.0) continue;
      double* dbrow = db.row(kk);
      for (size_t j = 0; j < n; ++j) dbrow[j] += aik * dyrow[j];
    }
  }
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2, "matmul_nt: rank-2 inputs required");
  require(a.shape[1] == b.shape[1], "matmul_nt: inner dimensions disagree");
  const size_t m = a.shape[0], k = a.shape[1], n = b.shape[0];
  Tensor out({m, n});
  for (size_t i = 0; i < m; ++i) {
    const double* arow = a.row(i);
    double* orow = out.row(i);
    for (size_t j = 0; j < n; ++j) {
      const double* brow = b.row(j);
      double acc = 0.0;
      for (size_t kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
      orow[j] = acc;
    }
  }
  return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2, "matmul_tn: rank-2 inputs required");
  require(a.shape[0] == b.shape[0], "matmul_tn: inner dimensions disagree");
  const size_t k = a.shape[0], m = a.shape[1], n = b.shape[1];
  Tensor out({m, n});
  for (size_t kk = 0; kk < k; ++kk) {
    const double* arow = a.row(kk);
    const double* brow = b.row(kk);
    for (size_t i = 0; i < m; ++i) {
      const double aik = arow[i];
      if (aik == 0.0) continue;
      double* orow = out.row(i);
      for (size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  require(a.rank() == 2, "transpose: rank-2 input required");
  Tensor out({a.shape[1], a.shape[0]});
  for (size_t i = 0; i < a.shape[0]; ++i)
    for (size_t j = 0; j < a.shape[1]; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

Tensor softmax_rows(const Tensor& logits) {
  require(logits.rank() == 2, "softmax_rows: rank-2 input required");
  Tensor out(logits.shape);
  const size_t n = logits.shape[1];
  for (size_t i = 0; i < logits.shape[0]; ++i) {
    const double* x = logits.row(i);
    double* y = out.row(i);
    double mx = x[0];
    for (size_t j = 1; j < n; ++j) mx = std::max(mx, x[j]);
    double sum = 0.0;
    for (size_t j = 0; j < n; ++j) {
      y[j] = std::exp(x[j] - mx);
      sum += y[j];
    }
    const double inv = 1.0 / sum;
    for (size_t j = 0; j < n; ++j) y[j] *= inv;
  }
  return out;
}

Tensor softmax_rows_backward(const Tensor& y, const Tensor& dy) {
  Tensor dx(y.shape);
  const size_t n = y.shape[1];
  for (size_t i = 0; i < y.shape[0]; ++i) {
    const double* yr = y.row(i);
    const double* dyr = dy.row(i);
    double* dxr = dx.row(i);
    double inner = 0.0;
    for (size_t j = 0; j < n; ++j) inner += dyr[j] * yr[j];
    for (size_t j = 0; j < n; ++j) dxr[j] = yr[j] * (dyr[j] - inner);
  }
  return dx;
}

Tensor log_softmax_rows(const Tensor& logits) {
  Tensor out(logits.shape);
  const size_t n = logits.shape[1];
  for (size_t i = 0; i < logits.shape[0]; ++i) {
    const double* x = logits.row(i);
    double* y = out.row(i);
    double mx = x[0];
    for (size_t j = 1; j < n; ++j) mx = std::max(mx, x[j]);
    double sum = 0.0;
    for (size_t j = 0; j < n; ++j) sum += std::exp(x[j] - mx);
    const double lse = mx + std::log(sum);
    for (size_t j = 0; j < n; ++j) y[j] = x[j] - lse;
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, LayerNormCache* cache) {
  require(x.rank() == 2, "layer_norm: rank-2 input required");
  const size_t n = x.shape[1];
  require(gain.size() == n && bias.size() == n, "layer_norm: affine size mismatch");
  Tensor out(x.shape);
  Tensor x_hat(x.shape);
  std::vector<double> inv_std(x.shape[0]);
  constexpr double kEps = 1e-12;
  for (size_t i = 0; i < x.shape[0]; ++i) {
    const double* xr = x.row(i);
    double mean = 0.0;
    for (size_t j = 0; j < n; ++j) mean += xr[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (size_t j = 0; j < n; ++j) {
      const double d = xr[j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + kEps);
    inv_std[i] = is;
    double* hr = x_hat.row(i);
    double* orow = out.row(i);
    for (size_t j = 0; j < n; ++j) {
      hr[j] = (xr[j] - mean) * is;
      orow[j] = hr[j] * gain[j] + bias[j];
    }
  }
  if (cache) {
    cache->x_hat = std::move(x_hat);
    cache->inv_std = std::move(inv_std);
  }
  return out;
}

Tensor layer_norm_backward(const LayerNormCache& cache, const Tensor& gain, const Tensor& dy,
                           Tensor& dgain, Tensor& dbias) {
  const Tensor& x_hat = cache.x_hat;
  const size_t n = x_hat.shape[1];
  if (dgain.v.empty()) dgain = Tensor({n});
  if (dbias.v.empty()) dbias = Tensor({n});
  Tensor dx(x_hat.shape);
  for (size_t i = 0; i < x_hat.shape[0]; ++i) {
    const double* hr = x_hat.row(i);
    const double* dyr = dy.row(i);
    double* dxr = dx.row(i);
    double sum_dh = 0.0, sum_dh_h = 0.0;
    for (size_t j = 0; j < n; ++j) {
      const double dh = dyr[j] * gain[j];
      sum_dh += dh;
      sum_dh_h += dh * hr[j];
      dgain[j] += dyr[j] * hr[j];
      dbias[j] += dyr[j];
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (size_t j = 0; j < n; ++j) {
      const double dh = dyr[j] * gain[j];
      dxr[j] = cache.inv_std[i] * (dh - inv_n * sum_dh - hr[j] * inv_n * sum_dh_h);
    }
  }
  return dx;
}

static constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

Tensor gelu(const Tensor& x) {
  Tensor out(x.shape);
  for (size_t i = 0; i < x.size(); ++i) {
    const double xi = x.v[i];
    out.v[i] = 0.5 * xi * (1.0 + std::tanh(kGeluC * (xi + 0.044715 * xi * xi * xi)));
  }
  return out;
}

Tensor gelu_backward(const Tensor& x, const Tensor& dy) {
  Tensor dx(x.shape);
  for (size_t i = 0; i < x.size(); ++i) {
    const double xi = x.v[i];
    const double u = kGeluC * (xi + 0.044715 * xi * xi * xi);
    const double t = std::tanh(u);
    const double du = kGeluC * (1.0 + 3.0 * 0.044715 * xi * xi);
    const double g = 0.5 * (1.0 + t) + 0.5 * xi * (1.0 - t * t) * du;
    dx.v[i] = dy.v[i] * g;
  }
  return dx;
}

Tensor tanh_act(const Tensor& x) {
  Tensor out(x.shape);
  for (size_t i = 0; i < x.size(); ++i) out.v[i] = std::tanh(x.v[i]);
  return out;
}

Tensor tanh_backward(const Tensor& y, const Tensor& dy) {
  Tensor dx(y.shape);
  for (size_t i = 0; i < y.size(); ++i) dx.v[i] = dy.v[i] * (1.0 - y.v[i] * y.v[i]);
  return dx;
}

double cross_entropy(const Tensor& logits, const std::vector<int>& targets,
                     const std::vector<uint8_t>& mask) {
  require(logits.rank() == 2, "cross_entropy: rank-2 logits required");
  require(targets.size() == logits.shape[0], "cross_entropy: target count mismatch");
  require(mask.size() == targets.size(), "cross_entropy: mask length mismatch");
  const Tensor logp = log_softmax_rows(logits);
  double total = 0.0;
  size_t used = 0;
  for (size_t i = 0; i < targets.size(); ++i) {
    if (!mask[i]) continue;
    const int t = targets[i];
    require(t >= 0 && static_cast<size_t>(t) < logits.shape[1], "cross_entropy: target out of range");
    total -= logp.at(i, static_cast<size_t>(t));
    ++used;
  }
  return used == 0 ? 0.0 : total / static_cast<double>(used);
}

Tensor cross_entropy_backward(const Tensor& logits, const std::vector<int>& targets,
                              const std::vector<uint8_t>& mask) {
  size_t used = 0;
  for (uint8_t m : mask)
    if (m) ++used;
  Tensor dlogits(logits.shape);
  if (used == 0) return dlogits;
  const Tensor probs = softmax_rows(logits);
  const double w = 1.0 / static_cast<double>(used);
  for (size_t i = 0; i < targets.size(); ++i) {
    if (!mask[i]) continue;
    const double* pr = probs.row(i);
    double* dr = dlogits.row(i);
    for (size_t j = 0; j < logits.shape[1]; ++j) dr[j] = w * pr[j];
    dr[targets[i]] -= w;
  }
  return dlogits;
}

void add_inplace(Tensor& a, const Tensor& b) {
  require(a.size() == b.size(), "add_inplace: size mismatch");
  for (size_t i = 0; i < a.size(); ++i) a.v[i] += b.v[i];
}

void axpy(Tensor& a, double alpha, const Tensor& b) {
  require(a.size() == b.size(), "axpy: size mismatch");
  for (size_t i = 0; i < a.size(); ++i) a.v[i] += alpha * b.v[i];
}

void add_row_inplace(Tensor& a, const Tensor& bias) {
  require(a.rank() == 2 && bias.size() == a.shape[1], "add_row_inplace: shape mismatch");
  for (size_t i = 0; i < a.shape[0]; ++i) {
    double* r = a.row(i);
    for (size_t j = 0; j < a.shape[1]; ++j) r[j] += bias[j];
  }
}

double dot(const Tensor& a, const Tensor& b) {
  require(a.size() == b.size(), "dot: size mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) acc += a.v[i] * b.v[i];
  return acc;
}

double l2_norm(const Tensor& a) { return std::sqrt(dot(a, a)); }

bool all_finite(const Tensor& a) {
  for (double x : a.v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace zcap::ops
