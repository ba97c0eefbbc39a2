/* Copyright 2026 The Sliceformer Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "sliceformer/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sliceformer/errors.hpp"

namespace sf {
namespace {

void same_graph(Var a, Var b, const char* op) {
  if (&a.graph() != &b.graph()) {
    throw ContractError(std::string(op) + ": operands belong to different graphs");
  }
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got shape " +
                         shape_to_string(t.shape()));
  }
}

// C += A * B for row-major A[n x k], B[k x m].
void gemm_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
              std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    double* ci = c.data() + i * m;
    for (std::size_t t = 0; t < k; ++t) {
      const double ait = a[i * k + t];
      if (ait == 0.0) continue;
      const double* bt = b.data() + t * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] += ait * bt[j];
    }
  }
}

}  // namespace

double gelu_value(double x) {
  const double inner = kGeluSqrt2OverPi * (x + kGeluCubic * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(inner));
}

double gelu_derivative(double x) {
  const double inner = kGeluSqrt2OverPi * (x + kGeluCubic * x * x * x);
  const double t = std::tanh(inner);
  const double dinner = kGeluSqrt2OverPi * (1.0 + 3.0 * kGeluCubic * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner;
}

void softmax_inplace(std::span<double> row) {
  if (row.empty()) return;
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : row) {
    if (!std::isfinite(v)) throw NumericError("softmax: non-finite input");
    mx = std::max(mx, v);
  }
  double total = 0.0;
  for (double& v : row) {
    v = std::exp(v - mx);
    total += v;
  }
  const double inv = 1.0 / total;
  for (double& v : row) v *= inv;
}

void check_permutation(std::span<const std::size_t> perm, std::size_t n) {
  if (perm.size() != n) {
    throw IndexError("permutation has length " + std::to_string(perm.size()) + ", expected " +
                     std::to_string(n));
  }
  std::vector<bool> seen(n, false);
  for (std::size_t p : perm) {
    if (p >= n || seen[p]) {
      throw IndexError("permutation is not a bijection on 0.." + std::to_string(n - 1) +
                       " (offending entry " + std::to_string(p) + ")");
    }
    seen[p] = true;
  }
}

Var matmul(Var a, Var b) {
  same_graph(a, b, "matmul");
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.rank() != 2 || B.rank() != 2 || A.cols() != B.rows()) {
    throw DimensionError("matmul: shapes " + shape_to_string(A.shape()) + " and " +
                         shape_to_string(B.shape()) + " do not agree");
  }
  const std::size_t n = A.rows(), k = A.cols(), m = B.cols();
  Tensor C({n, m});
  gemm_acc(A.data(), B.data(), C.data(), n, k, m);
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record(std::move(C), {ia, ib}, [ia, ib, n, k, m](Graph& g, std::size_t self) {
    std::span<const double> dc = g.grad(self);
    std::span<const double> av = g.value(ia).data();
    std::span<const double> bv = g.value(ib).data();
    if (g.requires_grad(ia)) {
      // dA = dC * B^T
      std::span<double> da = g.grad_for(ia);
      for (std::size_t i = 0; i < n; ++i) {
        const double* dci = dc.data() + i * m;
        for (std::size_t t = 0; t < k; ++t) {
          const double* bt = bv.data() + t * m;
          double acc = 0.0;
          for (std::size_t j = 0; j < m; ++j) acc += dci[j] * bt[j];
          da[i * k + t] += acc;
        }
      }
    }
    if (g.requires_grad(ib)) {
      // dB = A^T * dC
      std::span<double> db = g.grad_for(ib);
      for (std::size_t i = 0; i < n; ++i) {
        const double* dci = dc.data() + i * m;
        for (std::size_t t = 0; t < k; ++t) {
          const double ait = av[i * k + t];
          if (ait == 0.0) continue;
          double* dbt = db.data() + t * m;
          for (std::size_t j = 0; j < m; ++j) dbt[j] += ait * dci[j];
        }
      }
    }
  });
}

Var transpose(Var a) {
  const Tensor& A = a.value();
  require_rank2(A, "transpose");
  const std::size_t n = A.rows(), m = A.cols();
  Tensor T({m, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) T.at(j, i) = A.at(i, j);
  const std::size_t ia = a.id();
  return a.graph().record(std::move(T), {ia}, [ia, n, m](Graph& g, std::size_t self) {
    std::span<const double> dt = g.grad(self);
    std::span<double> da = g.grad_for(ia);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) da[i * m + j] += dt[j * n + i];
  });
}

Var add(Var a, Var b) {
  same_graph(a, b, "add");
  if (a.shape() != b.shape()) {
    throw DimensionError("add: shapes " + shape_to_string(a.shape()) + " and " +
                         shape_to_string(b.shape()) + " differ");
  }
  Tensor out = a.value().detached();
  std::span<const double> bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {ia, ib}, [ia, ib](Graph& g, std::size_t self) {
    std::span<const double> d = g.grad(self);
    for (std::size_t in : {ia, ib}) {
      if (!g.requires_grad(in)) continue;
      std::span<double> di = g.grad_for(in);
      for (std::size_t i = 0; i < d.size(); ++i) di[i] += d[i];
    }
  });
}

Var add_bias(Var x, Var bias) {
  same_graph(x, bias, "add_bias");
  const Tensor& X = x.value();
  const Tensor& B = bias.value();
  if ((X.rank() != 1 && X.rank() != 2) || B.rank() != 1 || B.size() != X.cols()) {
    throw DimensionError("add_bias: shapes " + shape_to_string(X.shape()) + " and " +
                         shape_to_string(B.shape()) + " do not agree");
  }
  const std::size_t n = X.rows(), m = X.cols();
  Tensor out = X.detached();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] += B[j];
  const std::size_t ix = x.id(), ib = bias.id();
  return x.graph().record(std::move(out), {ix, ib}, [ix, ib, n, m](Graph& g, std::size_t self) {
    std::span<const double> d = g.grad(self);
    if (g.requires_grad(ix)) {
      std::span<double> dx = g.grad_for(ix);
      for (std::size_t i = 0; i < d.size(); ++i) dx[i] += d[i];
    }
    if (g.requires_grad(ib)) {
      std::span<double> db = g.grad_for(ib);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) db[j] += d[i * m + j];
    }
  });
}

Var mul(Var a, Var b) {
  same_graph(a, b, "mul");
  if (a.shape() != b.shape()) {
    throw DimensionError("mul: shapes " + shape_to_string(a.shape()) + " and " +
                         shape_to_string(b.shape()) + " differ");
  }
  Tensor out = a.value().detached();
  std::span<const double> bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {ia, ib}, [ia, ib](Graph& g, std::size_t self) {
    std::span<const double> d = g.grad(self);
    std::span<const double> av = g.value(ia).data();
    std::span<const double> bv = g.value(ib).data();
    if (g.requires_grad(ia)) {
      std::span<double> da = g.grad_for(ia);
      for (std::size_t i = 0; i < d.size(); ++i) da[i] += d[i] * bv[i];
    }
    if (g.requires_grad(ib)) {
      std::span<double> db = g.grad_for(ib);
      for (std::size_t i = 0; i < d.size(); ++i) db[i] += d[i] * av[i];
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value().detached();
  for (double& v : out.data()) v *= factor;
  const std::size_t ia = a.id();
  return a.graph().record(std::move(out), {ia}, [ia, factor](Graph& g, std::size_t self) {
    std::span<const double> d = g.grad(self);
    std::span<double> da = g.grad_for(ia);
    for (std::size_t i = 0; i < d.size(); ++i) da[i] += factor * d[i];
  });
}

Var sum(Var a) {
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  const std::size_t ia = a.id();
  return a.graph().record(Tensor::scalar(total), {ia}, [ia](Graph& g, std::size_t self) {
    const double d = g.grad(self)[0];
    for (double& v : g.grad_for(ia)) v += d;
  });
}

Var reshape(Var a, Shape shape) {
  if (shape_size(shape) != a.value().size()) {
    throw DimensionError("reshape: cannot view " + shape_to_string(a.shape()) + " as " +
                         shape_to_string(shape));
  }
  Tensor out(std::move(shape), a.value().data());
  const std::size_t ia = a.id();
  return a.graph().record(std::move(out), {ia}, [ia](Graph& g, std::size_t self) {
    std::span<const double> d = g.grad(self);
    std::span<double> da = g.grad_for(ia);
    for (std::size_t i = 0; i < d.size(); ++i) da[i] += d[i];
  });
}

Var softmax_rows(Var x) {
  const Tensor& X = x.value();
  if (X.rank() != 1 && X.rank() != 2) {
    throw DimensionError("softmax_rows: expected rank 1 or 2, got " + shape_to_string(X.shape()));
  }
  const std::size_t n = X.rows(), m = X.cols();
  Tensor P = X.detached();
  for (std::size_t i = 0; i < n; ++i) softmax_inplace(P.data().subspan(i * m, m));
  const std::size_t ix = x.id();
  return x.graph().record(std::move(P), {ix}, [ix, n, m](Graph& g, std::size_t self) {
    std::span<const double> dp = g.grad(self);
    std::span<const double> p = g.value(self).data();
    std::span<double> dx = g.grad_for(ix);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t off = i * m;
      double dot = 0.0;
      for (std::size_t j = 0; j < m; ++j) dot += dp[off + j] * p[off + j];
      for (std::size_t j = 0; j < m; ++j) dx[off + j] += p[off + j] * (dp[off + j] - dot);
    }
  });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  same_graph(x, gamma, "layer_norm");
  same_graph(x, beta, "layer_norm");
  const Tensor& X = x.value();
  if (X.rank() != 1 && X.rank() != 2) {
    throw DimensionError("layer_norm: expected rank 1 or 2, got " + shape_to_string(X.shape()));
  }
  const std::size_t n = X.rows(), m = X.cols();
  if (m == 0) throw DimensionError("layer_norm: rows must have at least one element");
  if (gamma.value().size() != m || beta.value().size() != m) {
    throw DimensionError("layer_norm: affine parameters must have " + std::to_string(m) +
                         " elements, got " + shape_to_string(gamma.shape()) + " and " +
                         shape_to_string(beta.shape()));
  }
  if (!(eps > 0.0)) throw ContractError("layer_norm: eps must be positive");

  std::span<const double> gv = gamma.value().data();
  std::span<const double> bv = beta.value().data();
  Tensor out(X.shape());
  std::vector<double> inv_std(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::span<const double> row = X.data().subspan(i * m, m);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(m);
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= static_cast<double>(m);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < m; ++j) {
      out[i * m + j] = (row[j] - mean) * inv_std[i] * gv[j] + bv[j];
    }
  }

  const std::size_t ix = x.id(), ig = gamma.id(), ib = beta.id();
  return x.graph().record(
      std::move(out), {ix, ig, ib},
      [ix, ig, ib, n, m, inv_std = std::move(inv_std)](Graph& g, std::size_t self) {
        std::span<const double> dy = g.grad(self);
        std::span<const double> xv = g.value(ix).data();
        std::span<const double> gam = g.value(ig).data();
        std::vector<double> xhat(m), dxhat(m);
        const double inv_m = 1.0 / static_cast<double>(m);
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t off = i * m;
          double mean = 0.0;
          for (std::size_t j = 0; j < m; ++j) mean += xv[off + j];
          mean *= inv_m;
          double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
          for (std::size_t j = 0; j < m; ++j) {
            xhat[j] = (xv[off + j] - mean) * inv_std[i];
            dxhat[j] = dy[off + j] * gam[j];
            mean_dxhat += dxhat[j];
            mean_dxhat_xhat += dxhat[j] * xhat[j];
          }
          mean_dxhat *= inv_m;
          mean_dxhat_xhat *= inv_m;
          if (g.requires_grad(ix)) {
            std::span<double> dx = g.grad_for(ix);
            for (std::size_t j = 0; j < m; ++j) {
              dx[off + j] += inv_std[i] * (dxhat[j] - mean_dxhat - xhat[j] * mean_dxhat_xhat);
            }
          }
          if (g.requires_grad(ig)) {
            std::span<double> dg = g.grad_for(ig);
            for (std::size_t j = 0; j < m; ++j) dg[j] += dy[off + j] * xhat[j];
          }
          if (g.requires_grad(ib)) {
            std::span<double> db = g.grad_for(ib);
            for (std::size_t j = 0; j < m; ++j) db[j] += dy[off + j];
          }
        }
      });
}

Var gelu(Var x) {
  Tensor out = x.value().detached();
  for (double& v : out.data()) v = gelu_value(v);
  const std::size_t ix = x.id();
  return x.graph().record(std::move(out), {ix}, [ix](Graph& g, std::size_t self) {
    std::span<const double> d = g.grad(self);
    std::span<const double> xv = g.value(ix).data();
    std::span<double> dx = g.grad_for(ix);
    for (std::size_t i = 0; i < d.size(); ++i) dx[i] += d[i] * gelu_derivative(xv[i]);
  });
}

Var permute_rows(Var x, std::span<const std::size_t> perm) {
  const Tensor& X = x.value();
  require_rank2(X, "permute_rows");
  const std::size_t n = X.rows(), m = X.cols();
  check_permutation(perm, n);
  Tensor out(X.shape());
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(X.data().begin() + perm[r] * m, m, out.data().begin() + r * m);
  }
  const std::size_t ix = x.id();
  return x.graph().record(
      std::move(out), {ix},
      [ix, m, p = std::vector<std::size_t>(perm.begin(), perm.end())](Graph& g, std::size_t self) {
        std::span<const double> d = g.grad(self);
        std::span<double> dx = g.grad_for(ix);
        for (std::size_t r = 0; r < p.size(); ++r)
          for (std::size_t j = 0; j < m; ++j) dx[p[r] * m + j] += d[r * m + j];
      });
}

Var embedding_lookup(Var table, std::span<const std::size_t> ids) {
  const Tensor& T = table.value();
  require_rank2(T, "embedding_lookup");
  const std::size_t v = T.rows(), d = T.cols();
  for (std::size_t id : ids) {
    if (id >= v) {
      throw IndexError("embedding_lookup: id " + std::to_string(id) + " out of range for " +
                       std::to_string(v) + "-row table");
    }
  }
  Tensor out({ids.size(), d});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    std::copy_n(T.data().begin() + ids[r] * d, d, out.data().begin() + r * d);
  }
  const std::size_t it = table.id();
  return table.graph().record(
      std::move(out), {it},
      [it, d, rows = std::vector<std::size_t>(ids.begin(), ids.end())](Graph& g, std::size_t self) {
        std::span<const double> dout = g.grad(self);
        std::span<double> dt = g.grad_for(it);
        for (std::size_t r = 0; r < rows.size(); ++r)
          for (std::size_t j = 0; j < d; ++j) dt[rows[r] * d + j] += dout[r * d + j];
      });
}

Var cross_entropy(Var logits, std::span<const std::size_t> targets) {
  const Tensor& Z = logits.value();
  if (Z.rank() != 1 && Z.rank() != 2) {
    throw DimensionError("cross_entropy: expected rank 1 or 2 logits, got " +
                         shape_to_string(Z.shape()));
  }
  const std::size_t b = Z.rows(), c = Z.cols();
  if (targets.size() != b) {
    throw DimensionError("cross_entropy: " + std::to_string(b) + " rows but " +
                         std::to_string(targets.size()) + " targets");
  }
  if (b == 0) throw DimensionError("cross_entropy: empty batch");
  for (std::size_t t : targets) {
    if (t >= c) {
      throw IndexError("cross_entropy: target " + std::to_string(t) + " out of range for " +
                       std::to_string(c) + " classes");
    }
  }
  // Softmax probabilities are kept for the backward rule.
  std::vector<double> probs(Z.data().begin(), Z.data().end());
  double total = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    std::span<const double> row = Z.data().subspan(i * c, c);
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : row) {
      if (!std::isfinite(v)) throw NumericError("cross_entropy: non-finite logit");
      mx = std::max(mx, v);
    }
    double s = 0.0;
    for (double v : row) s += std::exp(v - mx);
    const double lse = mx + std::log(s);
    total += lse - row[targets[i]];
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] = std::exp(row[j] - lse);
  }
  const double inv_b = 1.0 / static_cast<double>(b);
  const std::size_t iz = logits.id();
  return logits.graph().record(
      Tensor::scalar(total * inv_b), {iz},
      [iz, c, inv_b, probs = std::move(probs),
       tg = std::vector<std::size_t>(targets.begin(), targets.end())](Graph& g, std::size_t self) {
        const double d = g.grad(self)[0] * inv_b;
        std::span<double> dz = g.grad_for(iz);
        for (std::size_t i = 0; i < tg.size(); ++i) {
          for (std::size_t j = 0; j < c; ++j) {
            const double onehot = j == tg[i] ? 1.0 : 0.0;
            dz[i * c + j] += d * (probs[i * c + j] - onehot);
          }
        }
      });
}

Var slice_cols(Var x, std::size_t begin, std::size_t count) {
  const Tensor& X = x.value();
  require_rank2(X, "slice_cols");
  const std::size_t n = X.rows(), m = X.cols();
  if (begin + count > m) {
    throw DimensionError("slice_cols: columns [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") exceed " + shape_to_string(X.shape()));
  }
  Tensor out({n, count});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < count; ++j) out.at(i, j) = X.at(i, begin + j);
  const std::size_t ix = x.id();
  return x.graph().record(std::move(out), {ix}, [ix, n, m, begin, count](Graph& g, std::size_t self) {
    std::span<const double> d = g.grad(self);
    std::span<double> dx = g.grad_for(ix);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < count; ++j) dx[i * m + begin + j] += d[i * count + j];
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t n = parts[0].value().rows();
  std::size_t total = 0;
  std::vector<std::size_t> ids, widths;
  for (const Var& p : parts) {
    same_graph(parts[0], p, "concat_cols");
    require_rank2(p.value(), "concat_cols");
    if (p.value().rows() != n) {
      throw DimensionError("concat_cols: row counts differ (" + shape_to_string(parts[0].shape()) +
                           " vs " + shape_to_string(p.shape()) + ")");
    }
    ids.push_back(p.id());
    widths.push_back(p.value().cols());
    total += p.value().cols();
  }
  Tensor out({n, total});
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& P = p.value();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < P.cols(); ++j) out.at(i, off + j) = P.at(i, j);
    off += P.cols();
  }
  std::vector<std::size_t> inputs = ids;
  return parts[0].graph().record(
      std::move(out), std::move(inputs),
      [ids = std::move(ids), widths = std::move(widths), n, total](Graph& g, std::size_t self) {
        std::span<const double> d = g.grad(self);
        std::size_t off = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (g.requires_grad(ids[k])) {
            std::span<double> dp = g.grad_for(ids[k]);
            for (std::size_t i = 0; i < n; ++i)
              for (std::size_t j = 0; j < widths[k]; ++j) dp[i * widths[k] + j] += d[i * total + off + j];
          }
          off += widths[k];
        }
      });
}

Var select_row(Var x, std::size_t r) {
  const Tensor& X = x.value();
  require_rank2(X, "select_row");
  if (r >= X.rows()) {
    throw IndexError("select_row: row " + std::to_string(r) + " out of range for " +
                     shape_to_string(X.shape()));
  }
  const std::size_t m = X.cols();
  Tensor out(Shape{m}, X.data().subspan(r * m, m));
  const std::size_t ix = x.id();
  return x.graph().record(std::move(out), {ix}, [ix, r, m](Graph& g, std::size_t self) {
    std::span<const double> d = g.grad(self);
    std::span<double> dx = g.grad_for(ix);
    for (std::size_t j = 0; j < m; ++j) dx[r * m + j] += d[j];
  });
}

Var stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw DimensionError("stack_rows: no inputs");
  const std::size_t m = rows[0].value().size();
  std::vector<std::size_t> ids;
  Tensor out({rows.size(), m});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    same_graph(rows[0], rows[i], "stack_rows");
    const Tensor& R = rows[i].value();
    if (R.rank() != 1 || R.size() != m) {
      throw DimensionError("stack_rows: row " + std::to_string(i) + " has shape " +
                           shape_to_string(R.shape()) + ", expected [" + std::to_string(m) + "]");
    }
    std::copy(R.data().begin(), R.data().end(), out.data().begin() + i * m);
    ids.push_back(rows[i].id());
  }
  std::vector<std::size_t> inputs = ids;
  return rows[0].graph().record(std::move(out), std::move(inputs),
                                [ids = std::move(ids), m](Graph& g, std::size_t self) {
                                  std::span<const double> d = g.grad(self);
                                  for (std::size_t i = 0; i < ids.size(); ++i) {
                                    if (!g.requires_grad(ids[i])) continue;
                                    std::span<double> dr = g.grad_for(ids[i]);
                                    for (std::size_t j = 0; j < m; ++j) dr[j] += d[i * m + j];
                                  }
                                });
}

}  // namespace sf
