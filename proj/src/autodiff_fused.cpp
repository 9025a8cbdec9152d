#include <algorithm>
#include <cmath>
#include <limits>

#include "brainnet/autodiff.hpp"
#include "brainnet/error.hpp"
#include "brainnet/simd/kernels.hpp"

namespace brainnet::ad {
namespace {

void check(bool ok, const char* what) { require(ok, ErrorCode::kShape, what); }

}  // namespace

Var layer_norm(const Var& a, const Var& gain, const Var& bias, double eps) {
  const Matrix& x = a.value();
  const std::size_t n = x.cols();
  check(gain.rows() == 1 && gain.cols() == n && bias.rows() == 1 && bias.cols() == n,
        "layer_norm gain/bias shape");
  Matrix normed(x.rows(), n);
  std::vector<double> inv_std(x.rows());
  Matrix out(x.rows(), n);
  const Matrix& gv = gain.value();
  const Matrix& bv = bias.value();
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double mean = 0.0;
    for (std::size_t c = 0; c < n; ++c) mean += x(i, c);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t c = 0; c < n; ++c) var += (x(i, c) - mean) * (x(i, c) - mean);
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < n; ++c) {
      normed(i, c) = (x(i, c) - mean) * inv_std[i];
      out(i, c) = normed(i, c) * gv(0, c) + bv(0, c);
    }
  }
  const std::size_t ia = a.id(), ig = gain.id(), ib = bias.id();
  return a.tape().record(
      std::move(out), {a, gain, bias},
      [ia, ig, ib, normed = std::move(normed), inv_std = std::move(inv_std)](Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        const std::size_t rows = g.rows(), cols = g.cols();
        if (t.requires_grad(ig)) {
          Matrix& gg = t.grad(ig);
          for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t c = 0; c < cols; ++c) gg(0, c) += g(i, c) * normed(i, c);
        }
        if (t.requires_grad(ib)) {
          Matrix& gb = t.grad(ib);
          for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t c = 0; c < cols; ++c) gb(0, c) += g(i, c);
        }
        if (t.requires_grad(ia)) {
          const Matrix& gv = t.value(ig);
          Matrix& ga = t.grad(ia);
          std::vector<double> dn(cols);
          for (std::size_t i = 0; i < rows; ++i) {
            double mean_dn = 0.0, mean_dn_n = 0.0;
            for (std::size_t c = 0; c < cols; ++c) {
              dn[c] = g(i, c) * gv(0, c);
              mean_dn += dn[c];
              mean_dn_n += dn[c] * normed(i, c);
            }
            mean_dn /= static_cast<double>(cols);
            mean_dn_n /= static_cast<double>(cols);
            for (std::size_t c = 0; c < cols; ++c)
              ga(i, c) += inv_std[i] * (dn[c] - mean_dn - normed(i, c) * mean_dn_n);
          }
        }
      });
}

Var masked_attention(const Var& q, const Var& k, const Var& v, const Matrix& allowed,
                     std::size_t seq_len, std::size_t heads) {
  const Matrix& qv = q.value();
  const Matrix& kv = k.value();
  const Matrix& vv = v.value();
  check(qv.same_shape(kv) && qv.same_shape(vv), "attention q/k/v shape mismatch");
  check(seq_len > 0 && qv.rows() % seq_len == 0, "attention rows not a multiple of seq_len");
  check(allowed.rows() == seq_len && allowed.cols() == seq_len, "attention mask shape");
  check(heads > 0 && qv.cols() % heads == 0, "attention heads must divide width");
  const std::size_t d = qv.cols();
  const std::size_t dh = d / heads;
  const std::size_t blocks = qv.rows() / seq_len;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto& kern = simd::active_kernels();

  // probs[(b * heads + h) * L * L + i * L + j]
  std::vector<double> probs(blocks * heads * seq_len * seq_len, 0.0);
  Matrix out(qv.rows(), d);
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t base = b * seq_len;
    for (std::size_t h = 0; h < heads; ++h) {
      double* P = probs.data() + (b * heads + h) * seq_len * seq_len;
      const std::size_t off = h * dh;
      for (std::size_t i = 0; i < seq_len; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        double* prow = P + i * seq_len;
        for (std::size_t j = 0; j < seq_len; ++j) {
          if (allowed(i, j) == 0.0) continue;
          prow[j] = kern.dot(qv.row(base + i).data() + off, kv.row(base + j).data() + off, dh) * inv_sqrt;
          mx = std::max(mx, prow[j]);
        }
        check(std::isfinite(mx), "attention mask row without visible positions");
        double z = 0.0;
        for (std::size_t j = 0; j < seq_len; ++j) {
          if (allowed(i, j) == 0.0) continue;
          prow[j] = std::exp(prow[j] - mx);
          z += prow[j];
        }
        for (std::size_t j = 0; j < seq_len; ++j) {
          if (allowed(i, j) == 0.0) continue;
          prow[j] /= z;
          kern.axpy(prow[j], vv.row(base + j).data() + off, out.row(base + i).data() + off, dh);
        }
      }
    }
  }

  const std::size_t iq = q.id(), ik = k.id(), iv = v.id();
  return q.tape().record(
      std::move(out), {q, k, v},
      [iq, ik, iv, probs = std::move(probs), seq_len, heads, dh, blocks, inv_sqrt](Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        const Matrix& qv = t.value(iq);
        const Matrix& kv = t.value(ik);
        const Matrix& vv = t.value(iv);
        const bool need_q = t.requires_grad(iq), need_k = t.requires_grad(ik), need_v = t.requires_grad(iv);
        Matrix* gq = need_q ? &t.grad(iq) : nullptr;
        Matrix* gk = need_k ? &t.grad(ik) : nullptr;
        Matrix* gv = need_v ? &t.grad(iv) : nullptr;
        const auto& kern = simd::active_kernels();
        std::vector<double> dp(seq_len);
        for (std::size_t b = 0; b < blocks; ++b) {
          const std::size_t base = b * seq_len;
          for (std::size_t h = 0; h < heads; ++h) {
            const double* P = probs.data() + (b * heads + h) * seq_len * seq_len;
            const std::size_t off = h * dh;
            for (std::size_t i = 0; i < seq_len; ++i) {
              const double* prow = P + i * seq_len;
              const double* gi = g.row(base + i).data() + off;
              double weighted = 0.0;
              for (std::size_t j = 0; j < seq_len; ++j) {
                if (prow[j] == 0.0) {
                  dp[j] = 0.0;
                  continue;
                }
                dp[j] = kern.dot(gi, vv.row(base + j).data() + off, dh);
                weighted += prow[j] * dp[j];
                if (gv) kern.axpy(prow[j], gi, gv->row(base + j).data() + off, dh);
              }
              for (std::size_t j = 0; j < seq_len; ++j) {
                if (prow[j] == 0.0) continue;
                const double ds = prow[j] * (dp[j] - weighted) * inv_sqrt;
                if (gq) kern.axpy(ds, kv.row(base + j).data() + off, gq->row(base + i).data() + off, dh);
                if (gk) kern.axpy(ds, qv.row(base + i).data() + off, gk->row(base + j).data() + off, dh);
              }
            }
          }
        }
      });
}

Var cosine_scores(const Var& a, const Var& b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  check(av.cols() == bv.cols(), "cosine_scores width mismatch");
  const auto& kern = simd::active_kernels();
  const std::size_t d = av.cols();
  std::vector<double> na(av.rows()), nb(bv.rows());
  for (std::size_t i = 0; i < av.rows(); ++i) na[i] = std::sqrt(kern.dot(av.row(i).data(), av.row(i).data(), d));
  for (std::size_t j = 0; j < bv.rows(); ++j) nb[j] = std::sqrt(kern.dot(bv.row(j).data(), bv.row(j).data(), d));
  Matrix out(av.rows(), bv.rows());
  for (std::size_t i = 0; i < av.rows(); ++i) {
    if (na[i] == 0.0) continue;
    for (std::size_t j = 0; j < bv.rows(); ++j) {
      if (nb[j] == 0.0) continue;
      out(i, j) = kern.dot(av.row(i).data(), bv.row(j).data(), d) / (na[i] * nb[j]);
    }
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib, na, nb](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& s = t.value(self);
    const Matrix& av = t.value(ia);
    const Matrix& bv = t.value(ib);
    const auto& kern = simd::active_kernels();
    const std::size_t d = av.cols();
    const bool need_a = t.requires_grad(ia), need_b = t.requires_grad(ib);
    for (std::size_t i = 0; i < av.rows(); ++i) {
      if (na[i] == 0.0) continue;
      for (std::size_t j = 0; j < bv.rows(); ++j) {
        if (nb[j] == 0.0 || g(i, j) == 0.0) continue;
        const double gij = g(i, j);
        const double inv = 1.0 / (na[i] * nb[j]);
        if (need_a) {
          double* ga = t.grad(ia).row(i).data();
          kern.axpy(gij * inv, bv.row(j).data(), ga, d);
          kern.axpy(-gij * s(i, j) / (na[i] * na[i]), av.row(i).data(), ga, d);
        }
        if (need_b) {
          double* gb = t.grad(ib).row(j).data();
          kern.axpy(gij * inv, av.row(i).data(), gb, d);
          kern.axpy(-gij * s(i, j) / (nb[j] * nb[j]), bv.row(j).data(), gb, d);
        }
      }
    }
  });
}

Var threshold_gate(const Var& scores, double threshold, bool exclude_diagonal) {
  const Matrix& s = scores.value();
  check(!exclude_diagonal || s.rows() == s.cols(), "diagonal exclusion needs a square score matrix");
  Matrix out(s.rows(), s.cols());
  std::vector<unsigned char> keep(s.size(), 0);
  for (std::size_t i = 0; i < s.rows(); ++i) {
    for (std::size_t j = 0; j < s.cols(); ++j) {
      if (exclude_diagonal && i == j) continue;
      if (s(i, j) >= threshold) {
        out(i, j) = s(i, j);
        keep[i * s.cols() + j] = 1;
      }
    }
  }
  const std::size_t is = scores.id();
  return scores.tape().record(std::move(out), {scores}, [is, keep = std::move(keep)](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& gs = t.grad(is);
    for (std::size_t i = 0; i < keep.size(); ++i)
      if (keep[i]) gs.data()[i] += g.data()[i];
  });
}

Var diffusion_aggregate(const Var& adjacency, const Var& h1, const Var& h2) {
  const Matrix& A = adjacency.value();
  const Matrix& x1 = h1.value();
  const Matrix& x2 = h2.value();
  check(A.rows() == x1.rows() && A.cols() == x2.rows() && x1.cols() == x2.cols(),
        "diffusion_aggregate shape mismatch");
  const auto& kern = simd::active_kernels();
  const std::size_t d = x1.cols();
  Matrix out = x2;
  std::vector<double> denom(A.cols(), 1.0);
  for (std::size_t i = 0; i < A.rows(); ++i) {
    for (std::size_t j = 0; j < A.cols(); ++j) {
      const double w = A(i, j);
      if (w == 0.0) continue;
      denom[j] += w;
      kern.axpy(w, x1.row(i).data(), out.row(j).data(), d);
    }
  }
  for (std::size_t j = 0; j < out.rows(); ++j)
    for (double& x : out.row(j)) x /= denom[j];

  const std::size_t iA = adjacency.id(), i1 = h1.id(), i2 = h2.id();
  return adjacency.tape().record(
      std::move(out), {adjacency, h1, h2}, [iA, i1, i2, denom = std::move(denom)](Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        const Matrix& y = t.value(self);
        const Matrix& A = t.value(iA);
        const Matrix& x1 = t.value(i1);
        const auto& kern = simd::active_kernels();
        const std::size_t d = g.cols();
        Matrix gs = g;
        for (std::size_t j = 0; j < gs.rows(); ++j)
          for (double& x : gs.row(j)) x /= denom[j];
        if (t.requires_grad(i2)) t.grad(i2) += gs;
        const bool need_A = t.requires_grad(iA), need_1 = t.requires_grad(i1);
        for (std::size_t i = 0; i < A.rows(); ++i) {
          for (std::size_t j = 0; j < A.cols(); ++j) {
            if (need_1 && A(i, j) != 0.0) kern.axpy(A(i, j), gs.row(j).data(), t.grad(i1).row(i).data(), d);
            if (need_A) {
              t.grad(iA)(i, j) += kern.dot(gs.row(j).data(), x1.row(i).data(), d) -
                                  kern.dot(gs.row(j).data(), y.row(j).data(), d);
            }
          }
        }
      });
}

Var info_nce(const Var& candidates, const std::vector<Var>& predictions, const std::vector<NceTerm>& terms) {
  const Matrix& cv = candidates.value();
  check(!predictions.empty(), "info_nce needs at least one prediction matrix");
  for (const Var& p : predictions) check(p.cols() == cv.cols(), "info_nce width mismatch");
  const auto& kern = simd::active_kernels();
  const std::size_t d = cv.cols();
  std::vector<double> logits;
  double loss = 0.0;
  for (const NceTerm& term : terms) {
    check(term.step < predictions.size(), "info_nce step out of range");
    const Matrix& pv = predictions[term.step].value();
    check(term.query < pv.rows() && term.positive < cv.rows(), "info_nce row out of range");
    const double* u = pv.row(term.query).data();
    logits.assign(1, kern.dot(cv.row(term.positive).data(), u, d));
    for (std::size_t n : term.negatives) {
      check(n < cv.rows(), "info_nce negative out of range");
      logits.push_back(kern.dot(cv.row(n).data(), u, d));
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp(l - mx);
    loss += term.weight * (mx + std::log(z) - logits.front());
  }

  std::vector<Var> inputs{candidates};
  inputs.insert(inputs.end(), predictions.begin(), predictions.end());
  std::vector<std::size_t> pred_ids;
  for (const Var& p : predictions) pred_ids.push_back(p.id());
  const std::size_t ic = candidates.id();
  return candidates.tape().record(Matrix(1, 1, loss), inputs, [ic, pred_ids, terms](Tape& t, std::size_t self) {
    const double g = t.grad(self)(0, 0);
    const Matrix& cv = t.value(ic);
    const auto& kern = simd::active_kernels();
    const std::size_t d = cv.cols();
    const bool need_c = t.requires_grad(ic);
    std::vector<std::size_t> rows;
    std::vector<double> logits;
    for (const NceTerm& term : terms) {
      const std::size_t ip = pred_ids[term.step];
      const bool need_p = t.requires_grad(ip);
      if (!need_c && !need_p) continue;
      const double* u = t.value(ip).row(term.query).data();
      rows.assign(1, term.positive);
      rows.insert(rows.end(), term.negatives.begin(), term.negatives.end());
      logits.resize(rows.size());
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < rows.size(); ++k) {
        logits[k] = kern.dot(cv.row(rows[k]).data(), u, d);
        mx = std::max(mx, logits[k]);
      }
      double z = 0.0;
      for (double& l : logits) z += (l = std::exp(l - mx));
      for (std::size_t k = 0; k < rows.size(); ++k) {
        const double dl = g * term.weight * (logits[k] / z - (k == 0 ? 1.0 : 0.0));
        if (dl == 0.0) continue;
        if (need_c) kern.axpy(dl, u, t.grad(ic).row(rows[k]).data(), d);
        if (need_p) kern.axpy(dl, cv.row(rows[k]).data(), t.grad(ip).row(term.query).data(), d);
      }
    }
  });
}

Var bce_sum(const Var& probs, const Matrix& labels, double eps, double positive_weight) {
  const Matrix& p = probs.value();
  check(p.same_shape(labels), "bce_sum label shape mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double y = labels.data()[i];
    const double pc = std::clamp(p.data()[i], eps, 1.0 - eps);
    loss -= y * positive_weight * std::log(pc) + (1.0 - y) * std::log(1.0 - pc);
  }
  const std::size_t ip = probs.id();
  return probs.tape().record(Matrix(1, 1, loss), {probs}, [ip, labels, eps, positive_weight](Tape& t, std::size_t self) {
    const double g = t.grad(self)(0, 0);
    const Matrix& p = t.value(ip);
    Matrix& gp = t.grad(ip);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double x = p.data()[i];
      if (x < eps || x > 1.0 - eps) continue;
      const double y = labels.data()[i];
      gp.data()[i] += g * (-y * positive_weight / x + (1.0 - y) / (1.0 - x));
    }
  });
}

}  // namespace brainnet::ad
