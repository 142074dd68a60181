#pragma once

// Independent reference implementations the test suites check the library
// against. Everything here is deliberately naive (triple loops, direct
// 64-bit evaluation, step-by-step scalar recurrences) and shares no code
// with the implementation paths it verifies.

#include <cassert>
#include <cmath>
#include <string>
#include <vector>

#include "charlm/common.h"

namespace oracle {

// C[m x n] = A[m x k] * B[k x n], plain triple loop in double.
inline std::vector<double> matmul(const std::vector<double>& a, const std::vector<double>& b,
                                  size_t m, size_t k, size_t n) {
  std::vector<double> c(m * n, 0.0);
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j)
      for (size_t p = 0; p < k; ++p) c[i * n + j] += a[i * k + p] * b[p * n + j];
  return c;
}

inline std::vector<double> softmax(const std::vector<double>& x) {
  double mx = x[0];
  for (double v : x) mx = std::max(mx, v);
  std::vector<double> y(x.size());
  double sum = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    y[i] = std::exp(x[i] - mx);
    sum += y[i];
  }
  for (auto& v : y) v /= sum;
  return y;
}

inline double log_sum_exp(const std::vector<double>& x) {
  double mx = x[0];
  for (double v : x) mx = std::max(mx, v);
  double sum = 0.0;
  for (double v : x) sum += std::exp(v - mx);
  return mx + std::log(sum);
}

// Mean NLL over rows of logits[m x v].
inline double cross_entropy(const std::vector<double>& logits, const std::vector<int32_t>& targets,
                            size_t m, size_t v) {
  double total = 0.0;
  for (size_t r = 0; r < m; ++r) {
    std::vector<double> row(logits.begin() + r * v, logits.begin() + (r + 1) * v);
    total += log_sum_exp(row) - row[static_cast<size_t>(targets[r])];
  }
  return total / static_cast<double>(m);
}

// Sliding window over "^" + word + "$"; whole padded string when shorter
// than n.
inline std::vector<std::string> char_ngrams(const std::string& word, int n) {
  const std::string padded = "^" + word + "$";
  std::vector<std::string> out;
  if (padded.size() < static_cast<size_t>(n)) {
    out.push_back(padded);
    return out;
  }
  for (size_t i = 0; i + static_cast<size_t>(n) <= padded.size(); ++i)
    out.push_back(padded.substr(i, static_cast<size_t>(n)));
  return out;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// One LSTM step for a single example, scalar arithmetic. Weights are
// row-major [h_dim x in_dim] / [h_dim x h_dim]; one bias per gate.
struct LstmStepOracle {
  size_t in_dim, h_dim;
  std::vector<double> w_xi, w_hi, b_i, w_xf, w_hf, b_f, w_xo, w_ho, b_o, w_xg, w_hg, b_g;

  void step(const std::vector<double>& x, std::vector<double>& h, std::vector<double>& c) const {
    std::vector<double> hn(h_dim), cn(h_dim);
    for (size_t u = 0; u < h_dim; ++u) {
      auto pre = [&](const std::vector<double>& wx, const std::vector<double>& wh,
                     const std::vector<double>& b) {
        double s = b[u];
        for (size_t d = 0; d < in_dim; ++d) s += wx[u * in_dim + d] * x[d];
        for (size_t d = 0; d < h_dim; ++d) s += wh[u * h_dim + d] * h[d];
        return s;
      };
      const double i = sigmoid(pre(w_xi, w_hi, b_i));
      const double f = sigmoid(pre(w_xf, w_hf, b_f));
      const double o = sigmoid(pre(w_xo, w_ho, b_o));
      const double g = std::tanh(pre(w_xg, w_hg, b_g));
      cn[u] = f * c[u] + i * g;
      hn[u] = o * std::tanh(cn[u]);
    }
    h = hn;
    c = cn;
  }
};

// Multi-dimensional attention composition, computed per the definition:
// scores a[i][j] = (W_c s_i)_j, weights normalised over i per dimension j,
// c_j = sum_i w[i][j] * s[i][j].
inline std::vector<double> compose_ms(const std::vector<std::vector<double>>& s,
                                      const std::vector<double>& w_c, size_t dim) {
  const size_t count = s.size();
  std::vector<std::vector<double>> a(count, std::vector<double>(dim));
  for (size_t i = 0; i < count; ++i)
    for (size_t j = 0; j < dim; ++j) {
      double v = 0.0;
      for (size_t d = 0; d < dim; ++d) v += w_c[j * dim + d] * s[i][d];
      a[i][j] = v;
    }
  std::vector<double> c(dim, 0.0);
  for (size_t j = 0; j < dim; ++j) {
    std::vector<double> col(count);
    for (size_t i = 0; i < count; ++i) col[i] = a[i][j];
    const auto w = softmax(col);
    for (size_t i = 0; i < count; ++i) c[j] += w[i] * s[i][j];
  }
  return c;
}

inline std::vector<double> compose_ss(const std::vector<std::vector<double>>& s,
                                      const std::vector<double>& w, size_t dim) {
  const size_t count = s.size();
  std::vector<double> scores(count, 0.0);
  for (size_t i = 0; i < count; ++i)
    for (size_t d = 0; d < dim; ++d) scores[i] += w[d] * s[i][d];
  const auto alpha = softmax(scores);
  std::vector<double> c(dim, 0.0);
  for (size_t i = 0; i < count; ++i)
    for (size_t d = 0; d < dim; ++d) c[d] += alpha[i] * s[i][d];
  return c;
}

inline std::vector<double> random_vec(charlm::Rng& rng, size_t n, double lo = -1.0,
                                      double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

}  // namespace oracle
