#pragma once

// Plain-loop reference implementations used as test oracles. Nothing here
// calls into the library's numeric code beyond Matrix storage.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "brainnet/autodiff.hpp"
#include "brainnet/matrix.hpp"

namespace oracle {

using brainnet::Matrix;

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = u(rng);
  return m;
}

inline double rel_err(double a, double b) {
  const double scale = std::max({std::fabs(a), std::fabs(b), 1e-300});
  return a == b ? 0.0 : std::fabs(a - b) / scale;
}

// Largest elementwise relative error, with `floor` guarding near-zero entries.
inline double max_rel_err(const Matrix& a, const Matrix& b, double floor = 1e-12) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const double x = a(i, j), y = b(i, j);
      const double scale = std::max({std::fabs(x), std::fabs(y), floor});
      worst = std::max(worst, std::fabs(x - y) / scale);
    }
  return worst;
}

// Raw cosine scores of reweighted rows; a zero vector scores 0.
inline Matrix cosine_scores(const Matrix& h1, const Matrix& h2, const Matrix& w1, const Matrix& w2) {
  const std::size_t d = h1.cols();
  Matrix s(h1.rows(), h2.rows());
  for (std::size_t i = 0; i < h1.rows(); ++i) {
    for (std::size_t j = 0; j < h2.rows(); ++j) {
      double ab = 0.0, aa = 0.0, bb = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double a = w1(0, k) * h1(i, k);
        const double b = w2(0, k) * h2(j, k);
        ab += a * b;
        aa += a * a;
        bb += b * b;
      }
      s(i, j) = (aa == 0.0 || bb == 0.0) ? 0.0 : ab / (std::sqrt(aa) * std::sqrt(bb));
    }
  }
  return s;
}

inline Matrix structure(const Matrix& h1, const Matrix& h2, const Matrix& w1, const Matrix& w2, double threshold,
                        bool exclude_diagonal) {
  Matrix s = cosine_scores(h1, h2, w1, w2);
  for (std::size_t i = 0; i < s.rows(); ++i)
    for (std::size_t j = 0; j < s.cols(); ++j)
      if (s(i, j) < threshold || (exclude_diagonal && i == j)) s(i, j) = 0.0;
  return s;
}

// h2'(j) = ReLU([(h2(j) + sum_i A(i,j) h1(i)) / (1 + sum_i A(i,j))] Theta)
inline Matrix diffuse(const Matrix& a, const Matrix& h1, const Matrix& h2, const Matrix& theta) {
  const std::size_t d = h2.cols();
  Matrix out(h2.rows(), theta.cols());
  for (std::size_t j = 0; j < h2.rows(); ++j) {
    std::vector<double> agg(d);
    double deg = 1.0;
    for (std::size_t k = 0; k < d; ++k) agg[k] = h2(j, k);
    for (std::size_t i = 0; i < h1.rows(); ++i) {
      deg += a(i, j);
      for (std::size_t k = 0; k < d; ++k) agg[k] += a(i, j) * h1(i, k);
    }
    for (std::size_t c = 0; c < theta.cols(); ++c) {
      double v = 0.0;
      for (std::size_t k = 0; k < d; ++k) v += agg[k] / deg * theta(k, c);
      out(j, c) = std::max(0.0, v);
    }
  }
  return out;
}

// sum_terms w * (log sum_{c in {pos} u neg} exp(a_c^T W_p z_q) - a_pos^T W_p z_q)
inline double info_nce(const Matrix& locals, const Matrix& contexts, const std::vector<Matrix>& scorers,
                       const std::vector<brainnet::ad::NceTerm>& terms) {
  auto score = [&](std::size_t cand, std::size_t query, std::size_t step) {
    const Matrix& w = scorers[step];
    double s = 0.0;
    for (std::size_t a = 0; a < w.rows(); ++a)
      for (std::size_t b = 0; b < w.cols(); ++b) s += locals(cand, a) * w(a, b) * contexts(query, b);
    return s;
  };
  double total = 0.0;
  for (const auto& t : terms) {
    std::vector<double> s{score(t.positive, t.query, t.step)};
    for (std::size_t n : t.negatives) s.push_back(score(n, t.query, t.step));
    const double m = *std::max_element(s.begin(), s.end());
    double z = 0.0;
    for (double v : s) z += std::exp(v - m);
    total += t.weight * (m + std::log(z) - s[0]);
  }
  return total;
}

inline double bce(const Matrix& p, const Matrix& y, double eps = 1e-7, double positive_weight = 1.0) {
  double total = 0.0;
  for (std::size_t i = 0; i < p.rows(); ++i)
    for (std::size_t j = 0; j < p.cols(); ++j) {
      const double q = std::min(std::max(p(i, j), eps), 1.0 - eps);
      total -= y(i, j) > 0.5 ? positive_weight * std::log(q) : std::log(1.0 - q);
    }
  return total;
}

// F-beta from confusion counts.
inline double f_beta_counts(std::size_t tp, std::size_t fp, std::size_t fn, double beta) {
  const double b2 = beta * beta;
  const double denom = (1.0 + b2) * static_cast<double>(tp) + b2 * static_cast<double>(fn) + static_cast<double>(fp);
  return denom == 0.0 ? 0.0 : (1.0 + b2) * static_cast<double>(tp) / denom;
}

// Pairwise AUC: fraction of (positive, negative) pairs ranked correctly, ties half.
inline double auc_pairs(const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j]) continue;
      ++pairs;
      wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    }
  }
  return wins / static_cast<double>(pairs);
}

// Signed positions of a length-L sequence listed as -L/2..-1, 1..L/2.
inline std::vector<int> signed_positions(std::size_t L) {
  std::vector<int> out;
  const int h = static_cast<int>(L / 2);
  for (int s = -h; s <= h; ++s)
    if (s != 0) out.push_back(s);
  return out;
}

// Central finite difference of f with respect to entry k of m.
inline double central_difference(Matrix& m, std::size_t k, double step, const std::function<double()>& f) {
  const double saved = m.data()[k];
  m.data()[k] = saved + step;
  const double up = f();
  m.data()[k] = saved - step;
  const double down = f();
  m.data()[k] = saved;
  return (up - down) / (2.0 * step);
}

// ||a - n|| / max(||a||, ||n||) over all entries.
inline double gradient_rel_err(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  const double scale = std::sqrt(std::max(na, nn));
  return scale == 0.0 ? std::sqrt(diff) : std::sqrt(diff) / scale;
}

}  // namespace oracle
