#pragma once

// Independent reference computations. Plain loops over nested vectors; no
// tensors, no tape.

#include <cmath>
#include <string>
#include <vector>

namespace mvptm::testing {

using Matrix = std::vector<std::vector<double>>;

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.size(), std::vector<double>(b.at(0).size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b[0].size(); ++j) c[i][j] += a[i][k] * b[k][j];
  return c;
}

inline Matrix columns(const Matrix& m, std::size_t start, std::size_t count) {
  Matrix out(m.size(), std::vector<double>(count));
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < count; ++j) out[i][j] = m[i][start + j];
  return out;
}

/// Row-wise softmax(scores + bias) with an explicit max shift.
inline Matrix softmax_rows(Matrix s, const Matrix& bias) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    double mx = -INFINITY;
    for (std::size_t j = 0; j < s[i].size(); ++j) {
      s[i][j] += bias.empty() ? 0.0 : bias[i][j];
      mx = std::max(mx, s[i][j]);
    }
    double total = 0.0;
    for (double& x : s[i]) total += (x = std::exp(x - mx));
    for (double& x : s[i]) x /= total;
  }
  return s;
}

/// One attention head: softmax(Q K^T / sqrt(dh) + bias) V.
inline Matrix attention(const Matrix& q, const Matrix& k, const Matrix& v, const Matrix& bias) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(q[0].size()));
  Matrix s(q.size(), std::vector<double>(k.size(), 0.0));
  for (std::size_t i = 0; i < q.size(); ++i)
    for (std::size_t j = 0; j < k.size(); ++j) {
      for (std::size_t t = 0; t < q[0].size(); ++t) s[i][j] += q[i][t] * k[j][t];
      s[i][j] *= scale;
    }
  return matmul(softmax_rows(s, bias), v);
}

/// Textbook multi-head attention: every head of width dh is cut from the
/// packed projections, heads are concatenated, then multiplied by wo.
inline Matrix vanilla_mha(const Matrix& z, const Matrix& wq, const Matrix& wk, const Matrix& wv, const Matrix& wo,
                          std::size_t dh) {
  const Matrix q = matmul(z, wq), k = matmul(z, wk), v = matmul(z, wv);
  const std::size_t heads = wq[0].size() / dh;
  Matrix cat(z.size());
  for (std::size_t h = 0; h < heads; ++h) {
    const Matrix o = attention(columns(q, h * dh, dh), columns(k, h * dh, dh), columns(v, h * dh, dh), {});
    for (std::size_t i = 0; i < z.size(); ++i) cat[i].insert(cat[i].end(), o[i].begin(), o[i].end());
  }
  return matmul(cat, wo);
}

/// NT-Xent over the explicit 2B x 2B cosine-similarity matrix.
inline double nt_xent(const Matrix& anchors, const Matrix& positives, double tau) {
  Matrix z = anchors;
  z.insert(z.end(), positives.begin(), positives.end());
  for (auto& row : z) {
    double norm = 0.0;
    for (double x : row) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : row) x /= norm;
  }
  const std::size_t n = z.size(), b = anchors.size();
  Matrix sim(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t t = 0; t < z[i].size(); ++t) sim[i][j] += z[i][t] * z[j][t];
      sim[i][j] /= tau;
    }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t pos = i < b ? i + b : i - b;
    double denom = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      if (k != i) denom += std::exp(sim[i][k]);
    total += -sim[i][pos] + std::log(denom);
  }
  return total / static_cast<double>(n);
}

/// A function whose lexer token count is exactly `tokens` (>= 11).
inline std::string function_with_tokens(std::size_t tokens) {
  // "int f ( int x ) {" = 7, "return x ; }" = 4, "x ++ ;" = 3, "x ;" = 2
  std::size_t rest = tokens - 11;
  std::string body;
  if (rest % 3 == 1) {
    body += "x; x; ";
    rest -= 4;
  } else if (rest % 3 == 2) {
    body += "x; ";
    rest -= 2;
  }
  for (; rest > 0; rest -= 3) body += "x++; ";
  return "int f(int x) { " + body + "return x; }";
}

}  // namespace mvptm::testing
