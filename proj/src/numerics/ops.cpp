#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <numbers>

#include "mvptm/error.hpp"
#include "mvptm/numerics.hpp"

namespace mvptm::numerics {

namespace {

bool tracking(std::initializer_list<const Tensor*> inputs) {
  if (active_tape() == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

void record(std::function<void()> step) { active_tape()->record(std::move(step)); }

[[noreturn]] void mismatch(const std::string& op, const Shape& a, const Shape& b) {
  throw Error(ErrorCode::ShapeMismatch, op + ": " + shape_string(a) + " vs " + shape_string(b));
}

void require_same_shape(const std::string& op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) mismatch(op, a.shape(), b.shape());
}

std::size_t last_dim(const Tensor& t) { return t.shape().back(); }

Shape leading(const Shape& s, std::size_t drop) {
  return Shape(s.begin(), s.end() - static_cast<std::ptrdiff_t>(drop));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  Tensor y(a.shape(), std::move(out), tracking({&a, &b}));
  if (y.requires_grad()) {
    record([a, b, y]() mutable {
      if (!y.has_grad()) return;
      auto g = y.grad();
      if (a.requires_grad()) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      }
    });
  }
  return y;
}

Tensor sub(const Tensor& a, const Tensor& b) { return add(a, scale(b, -1.0)); }

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  Tensor y(a.shape(), std::move(out), tracking({&a, &b}));
  if (y.requires_grad()) {
    record([a, b, y]() mutable {
      if (!y.has_grad()) return;
      auto g = y.grad();
      if (a.requires_grad()) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
      }
    });
  }
  return y;
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factor;
  Tensor y(a.shape(), std::move(out), tracking({&a}));
  if (y.requires_grad()) {
    record([a, y, factor]() mutable {
      if (!y.has_grad()) return;
      auto g = y.grad();
      auto ga = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
    });
  }
  return y;
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  Tensor y = Tensor::scalar(s, tracking({&a}));
  if (y.requires_grad()) {
    record([a, y]() mutable {
      if (!y.has_grad()) return;
      const double g = y.grad()[0];
      auto ga = a.grad();
      for (auto& v : ga) v += g;
    });
  }
  return y;
}

Tensor add_row(const Tensor& x, const Tensor& row) {
  const std::size_t d = last_dim(x);
  if (row.size() != d) mismatch("add_row", x.shape(), row.shape());
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + row[i % d];
  Tensor y(x.shape(), std::move(out), tracking({&x, &row}));
  if (y.requires_grad()) {
    record([x, row, y, d]() mutable {
      if (!y.has_grad()) return;
      auto g = y.grad();
      if (x.requires_grad()) {
        auto gx = x.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      }
      if (row.requires_grad()) {
        auto gr = row.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gr[i % d] += g[i];
      }
    });
  }
  return y;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || b.rank() < 2) mismatch("matmul", a.shape(), b.shape());
  const std::size_t m = a.dim(a.rank() - 2);
  const std::size_t k = a.dim(a.rank() - 1);
  const std::size_t kb = b.dim(b.rank() - 2);
  const std::size_t p = b.dim(b.rank() - 1);
  if (k != kb) mismatch("matmul", a.shape(), b.shape());
  const bool shared_b = b.rank() == 2;
  if (!shared_b && leading(a.shape(), 2) != leading(b.shape(), 2)) {
    mismatch("matmul", a.shape(), b.shape());
  }
  const std::size_t batch = a.size() / (m * k);

  Shape out_shape = leading(a.shape(), 2);
  out_shape.push_back(m);
  out_shape.push_back(p);
  std::vector<double> out(batch * m * p, 0.0);
  const double* A = a.data().data();
  const double* B = b.data().data();
  for (std::size_t n = 0; n < batch; ++n) {
    const double* An = A + n * m * k;
    const double* Bn = shared_b ? B : B + n * k * p;
    double* Cn = out.data() + n * m * p;
    for (std::size_t i = 0; i < m; ++i) {
      double* crow = Cn + i * p;
      for (std::size_t kk = 0; kk < k; ++kk) {
        const double av = An[i * k + kk];
        if (av == 0.0) continue;
        const double* brow = Bn + kk * p;
        for (std::size_t j = 0; j < p; ++j) crow[j] += av * brow[j];
      }
    }
  }
  Tensor y(std::move(out_shape), std::move(out), tracking({&a, &b}));
  if (y.requires_grad()) {
    record([a, b, y, batch, m, k, p, shared_b]() mutable {
      if (!y.has_grad()) return;
      const double* G = y.grad().data();
      const double* A = a.data().data();
      const double* B = b.data().data();
      if (a.requires_grad()) {
        double* GA = a.grad().data();
        for (std::size_t n = 0; n < batch; ++n) {
          const double* Gn = G + n * m * p;
          const double* Bn = shared_b ? B : B + n * k * p;
          double* GAn = GA + n * m * k;
          for (std::size_t i = 0; i < m; ++i) {
            const double* grow = Gn + i * p;
            for (std::size_t kk = 0; kk < k; ++kk) {
              const double* brow = Bn + kk * p;
              double acc = 0.0;
              for (std::size_t j = 0; j < p; ++j) acc += grow[j] * brow[j];
              GAn[i * k + kk] += acc;
            }
          }
        }
      }
      if (b.requires_grad()) {
        double* GB = b.grad().data();
        for (std::size_t n = 0; n < batch; ++n) {
          const double* Gn = G + n * m * p;
          const double* An = A + n * m * k;
          double* GBn = shared_b ? GB : GB + n * k * p;
          for (std::size_t i = 0; i < m; ++i) {
            const double* grow = Gn + i * p;
            for (std::size_t kk = 0; kk < k; ++kk) {
              const double av = An[i * k + kk];
              if (av == 0.0) continue;
              double* gbrow = GBn + kk * p;
              for (std::size_t j = 0; j < p; ++j) gbrow[j] += av * grow[j];
            }
          }
        }
      }
    });
  }
  return y;
}

Tensor transpose_last(const Tensor& a) {
  if (a.rank() < 2) mismatch("transpose_last", a.shape(), a.shape());
  const std::size_t m = a.dim(a.rank() - 2);
  const std::size_t n = a.dim(a.rank() - 1);
  const std::size_t batch = a.size() / (m * n);
  Shape shape = a.shape();
  std::swap(shape[shape.size() - 1], shape[shape.size() - 2]);
  std::vector<double> out(a.size());
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) out[b * m * n + j * m + i] = a[b * m * n + i * n + j];
    }
  }
  Tensor y(std::move(shape), std::move(out), tracking({&a}));
  if (y.requires_grad()) {
    record([a, y, batch, m, n]() mutable {
      if (!y.has_grad()) return;
      auto g = y.grad();
      auto ga = a.grad();
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) ga[b * m * n + i * n + j] += g[b * m * n + j * m + i];
        }
      }
    });
  }
  return y;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  return add_row(matmul(x, w), b);
}

Tensor linear(const Tensor& x, const Tensor& w) { return matmul(x, w); }

Tensor softmax_bias(const Tensor& logits, const Tensor& bias) {
  const std::size_t n = last_dim(logits);
  const std::size_t bsize = bias.size();
  const bool shape_ok = bsize > 0 && logits.size() % bsize == 0 && bias.rank() <= logits.rank() &&
                        std::equal(bias.shape().begin(), bias.shape().end(),
                                   logits.shape().end() - static_cast<std::ptrdiff_t>(bias.rank()));
  if (!shape_ok) mismatch("softmax_bias", logits.shape(), bias.shape());
  const std::size_t rows = logits.size() / n;
  std::vector<double> out(logits.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t off = r * n;
    const std::size_t boff = off % bsize;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, logits[off + j] + bias[boff + j]);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double e = std::exp(logits[off + j] + bias[boff + j] - mx);
      out[off + j] = e;
      s += e;
    }
    for (std::size_t j = 0; j < n; ++j) out[off + j] /= s;
  }
  Tensor y(logits.shape(), std::move(out), tracking({&logits}));
  if (y.requires_grad()) {
    record([logits, y, rows, n]() mutable {
      if (!y.has_grad()) return;
      auto g = y.grad();
      auto gl = logits.grad();
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t off = r * n;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += g[off + j] * y[off + j];
        for (std::size_t j = 0; j < n; ++j) gl[off + j] += y[off + j] * (g[off + j] - dot);
      }
    });
  }
  return y;
}

Tensor concat_last(std::span<const Tensor> parts) {
  if (parts.empty()) throw Error(ErrorCode::ShapeMismatch, "concat_last of nothing");
  const Shape lead = leading(parts[0].shape(), 1);
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (leading(p.shape(), 1) != lead) mismatch("concat_last", parts[0].shape(), p.shape());
    total += last_dim(p);
  }
  const std::size_t rows = parts[0].size() / last_dim(parts[0]);
  std::vector<double> out(rows * total);
  std::size_t col = 0;
  bool rg = false;
  for (const auto& p : parts) {
    const std::size_t d = last_dim(p);
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(p.data().begin() + static_cast<std::ptrdiff_t>(r * d), d,
                  out.begin() + static_cast<std::ptrdiff_t>(r * total + col));
    }
    col += d;
    rg = rg || tracking({&p});
  }
  Shape shape = lead;
  shape.push_back(total);
  Tensor y(std::move(shape), std::move(out), rg);
  if (y.requires_grad()) {
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    record([inputs, y, rows, total]() mutable {
      if (!y.has_grad()) return;
      auto g = y.grad();
      std::size_t col = 0;
      for (auto& p : inputs) {
        const std::size_t d = last_dim(p);
        if (p.requires_grad()) {
          auto gp = p.grad();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < d; ++j) gp[r * d + j] += g[r * total + col + j];
          }
        }
        col += d;
      }
    });
  }
  return y;
}

Tensor slice_last(const Tensor& x, std::size_t start, std::size_t length) {
  const std::size_t d = last_dim(x);
  if (length == 0 || start + length > d) {
    throw Error(ErrorCode::ShapeMismatch, "slice_last [" + std::to_string(start) + ", " +
                                              std::to_string(start + length) + ") of " +
                                              shape_string(x.shape()));
  }
  const std::size_t rows = x.size() / d;
  std::vector<double> out(rows * length);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < length; ++j) out[r * length + j] = x[r * d + start + j];
  }
  Shape shape = leading(x.shape(), 1);
  shape.push_back(length);
  Tensor y(std::move(shape), std::move(out), tracking({&x}));
  if (y.requires_grad()) {
    record([x, y, rows, d, start, length]() mutable {
      if (!y.has_grad()) return;
      auto g = y.grad();
      auto gx = x.grad();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < length; ++j) gx[r * d + start + j] += g[r * length + j];
      }
    });
  }
  return y;
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  if (a.rank() != b.rank() || a.rank() < 1 ||
      !std::equal(a.shape().begin() + 1, a.shape().end(), b.shape().begin() + 1)) {
    mismatch("concat_rows", a.shape(), b.shape());
  }
  Shape shape = a.shape();
  shape[0] += b.dim(0);
  std::vector<double> out(a.data().begin(), a.data().end());
  out.insert(out.end(), b.data().begin(), b.data().end());
  Tensor y(std::move(shape), std::move(out), tracking({&a, &b}));
  if (y.requires_grad()) {
    record([a, b, y]() mutable {
      if (!y.has_grad()) return;
      auto g = y.grad();
      if (a.requires_grad()) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        const std::size_t off = a.size();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[off + i];
      }
    });
  }
  return y;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const std::size_t d = last_dim(x);
  if (gamma.size() != d || beta.size() != d) mismatch("layer_norm", x.shape(), gamma.shape());
  const std::size_t rows = x.size() / d;
  std::vector<double> xhat(x.size());
  std::vector<double> rstd(rows);
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += x[r * d + j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = x[r * d + j] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[r * d + j] = (x[r * d + j] - mean) * rstd[r];
      out[r * d + j] = xhat[r * d + j] * gamma[j] + beta[j];
    }
  }
  Tensor y(x.shape(), std::move(out), tracking({&x, &gamma, &beta}));
  if (y.requires_grad()) {
    record([x, gamma, beta, y, xhat = std::move(xhat), rstd = std::move(rstd), rows,
            d]() mutable {
      if (!y.has_grad()) return;
      auto g = y.grad();
      if (gamma.requires_grad() || beta.requires_grad()) {
        auto gg = gamma.grad();
        auto gb = beta.grad();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < d; ++j) {
            gg[j] += g[r * d + j] * xhat[r * d + j];
            gb[j] += g[r * d + j];
          }
        }
      }
      if (x.requires_grad()) {
        auto gx = x.grad();
        const double inv_d = 1.0 / static_cast<double>(d);
        for (std::size_t r = 0; r < rows; ++r) {
          double mean_dxhat = 0.0;
          double mean_dxhat_xhat = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            const double dxh = g[r * d + j] * gamma[j];
            mean_dxhat += dxh;
            mean_dxhat_xhat += dxh * xhat[r * d + j];
          }
          mean_dxhat *= inv_d;
          mean_dxhat_xhat *= inv_d;
          for (std::size_t j = 0; j < d; ++j) {
            const double dxh = g[r * d + j] * gamma[j];
            gx[r * d + j] += rstd[r] * (dxh - mean_dxhat - xhat[r * d + j] * mean_dxhat_xhat);
          }
        }
      }
    });
  }
  return y;
}

Tensor gelu(const Tensor& x) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = 0.5 * x[i] * (1.0 + std::erf(x[i] * inv_sqrt2));
  }
  Tensor y(x.shape(), std::move(out), tracking({&x}));
  if (y.requires_grad()) {
    record([x, y]() mutable {
      if (!y.has_grad()) return;
      const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
      auto g = y.grad();
      auto gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double v = x[i];
        const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
        const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
        gx[i] += g[i] * (cdf + v * pdf);
      }
    });
  }
  return y;
}

Tensor mean_pool(const Tensor& x, const std::vector<bool>& keep) {
  if (x.rank() != 2 && x.rank() != 3) mismatch("mean_pool", x.shape(), x.shape());
  const std::size_t batch = x.rank() == 3 ? x.dim(0) : 1;
  const std::size_t n = x.dim(x.rank() - 2);
  const std::size_t d = x.dim(x.rank() - 1);
  if (keep.size() != batch * n) {
    throw Error(ErrorCode::ShapeMismatch, "mean_pool keep mask has " +
                                              std::to_string(keep.size()) + " entries for " +
                                              shape_string(x.shape()));
  }
  std::vector<double> counts(batch, 0.0);
  std::vector<double> out(batch * d, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!keep[b * n + i]) continue;
      counts[b] += 1.0;
      for (std::size_t j = 0; j < d; ++j) out[b * d + j] += x[(b * n + i) * d + j];
    }
    if (counts[b] == 0.0) {
      throw Error(ErrorCode::EmptyPool, "sample " + std::to_string(b) + " keeps no rows");
    }
    for (std::size_t j = 0; j < d; ++j) out[b * d + j] /= counts[b];
  }
  Shape shape = x.rank() == 3 ? Shape{batch, d} : Shape{d};
  Tensor y(std::move(shape), std::move(out), tracking({&x}));
  if (y.requires_grad()) {
    record([x, y, keep, counts, batch, n, d]() mutable {
      if (!y.has_grad()) return;
      auto g = y.grad();
      auto gx = x.grad();
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t i = 0; i < n; ++i) {
          if (!keep[b * n + i]) continue;
          for (std::size_t j = 0; j < d; ++j) gx[(b * n + i) * d + j] += g[b * d + j] / counts[b];
        }
      }
    });
  }
  return y;
}

Tensor embedding(const Tensor& table, std::span<const int> ids, const Shape& index_shape) {
  if (table.rank() != 2) mismatch("embedding", table.shape(), index_shape);
  if (element_count(index_shape) != ids.size()) mismatch("embedding", table.shape(), index_shape);
  const std::size_t vocab = table.dim(0);
  const std::size_t d = table.dim(1);
  std::vector<double> out(ids.size() * d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw Error(ErrorCode::ShapeMismatch, "embedding id " + std::to_string(ids[i]) +
                                                " outside table of " + std::to_string(vocab));
    }
    std::copy_n(table.data().begin() + static_cast<std::ptrdiff_t>(ids[i] * d), d,
                out.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  Shape shape = index_shape;
  shape.push_back(d);
  Tensor y(std::move(shape), std::move(out), tracking({&table}));
  if (y.requires_grad()) {
    std::vector<int> idx(ids.begin(), ids.end());
    record([table, y, idx = std::move(idx), d]() mutable {
      if (!y.has_grad()) return;
      auto g = y.grad();
      auto gt = table.grad();
      for (std::size_t i = 0; i < idx.size(); ++i) {
        for (std::size_t j = 0; j < d; ++j) gt[static_cast<std::size_t>(idx[i]) * d + j] += g[i * d + j];
      }
    });
  }
  return y;
}

Tensor l2_normalize_rows(const Tensor& x, double eps) {
  const std::size_t d = last_dim(x);
  const std::size_t rows = x.size() / d;
  std::vector<double> norms(rows);
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    double ss = 0.0;
    for (std::size_t j = 0; j < d; ++j) ss += x[r * d + j] * x[r * d + j];
    norms[r] = std::max(std::sqrt(ss), eps);
    for (std::size_t j = 0; j < d; ++j) out[r * d + j] = x[r * d + j] / norms[r];
  }
  Tensor y(x.shape(), std::move(out), tracking({&x}));
  if (y.requires_grad()) {
    record([x, y, norms = std::move(norms), rows, d, eps]() mutable {
      if (!y.has_grad()) return;
      auto g = y.grad();
      auto gx = x.grad();
      for (std::size_t r = 0; r < rows; ++r) {
        if (norms[r] <= eps) {
          for (std::size_t j = 0; j < d; ++j) gx[r * d + j] += g[r * d + j] / eps;
          continue;
        }
        double dot = 0.0;
        for (std::size_t j = 0; j < d; ++j) dot += g[r * d + j] * y[r * d + j];
        for (std::size_t j = 0; j < d; ++j) {
          gx[r * d + j] += (g[r * d + j] - y[r * d + j] * dot) / norms[r];
        }
      }
    });
  }
  return y;
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> targets,
                             const Tensor& bias) {
  if (logits.rank() != 2) mismatch("softmax_cross_entropy", logits.shape(), logits.shape());
  const std::size_t rows = logits.dim(0);
  const std::size_t cols = logits.dim(1);
  if (targets.size() != rows) {
    throw Error(ErrorCode::ShapeMismatch, std::to_string(targets.size()) + " targets for " +
                                              std::to_string(rows) + " rows");
  }
  if (bias.defined() && bias.shape() != logits.shape()) {
    mismatch("softmax_cross_entropy", logits.shape(), bias.shape());
  }
  std::vector<double> probs(logits.size());
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const int t = targets[r];
    if (t < 0 || static_cast<std::size_t>(t) >= cols) {
      throw Error(ErrorCode::LabelOutOfRange,
                  "target " + std::to_string(t) + " for " + std::to_string(cols) + " classes");
    }
    auto z = [&](std::size_t j) {
      return logits[r * cols + j] + (bias.defined() ? bias[r * cols + j] : 0.0);
    };
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < cols; ++j) mx = std::max(mx, z(j));
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      probs[r * cols + j] = std::exp(z(j) - mx);
      s += probs[r * cols + j];
    }
    for (std::size_t j = 0; j < cols; ++j) probs[r * cols + j] /= s;
    total += (mx + std::log(s)) - z(static_cast<std::size_t>(t));
  }
  Tensor y = Tensor::scalar(total / static_cast<double>(rows), tracking({&logits}));
  if (y.requires_grad()) {
    std::vector<int> tg(targets.begin(), targets.end());
    record([logits, y, probs = std::move(probs), tg = std::move(tg), rows, cols]() mutable {
      if (!y.has_grad()) return;
      const double g = y.grad()[0] / static_cast<double>(rows);
      auto gl = logits.grad();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < cols; ++j) {
          const double onehot = static_cast<int>(j) == tg[r] ? 1.0 : 0.0;
          gl[r * cols + j] += g * (probs[r * cols + j] - onehot);
        }
      }
    });
  }
  return y;
}

}  // namespace mvptm::numerics
