#include "brainnet/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "brainnet/error.hpp"
#include "brainnet/simd/kernels.hpp"

namespace brainnet::ad {

const Matrix& Var::value() const { return tape_->value(id_); }

double Var::scalar() const {
  const Matrix& v = value();
  require(v.rows() == 1 && v.cols() == 1, ErrorCode::kShape, "scalar() on non 1x1 value");
  return v(0, 0);
}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Parameter& param) {
  if (auto it = param_nodes_.find(&param); it != param_nodes_.end()) return Var(this, it->second);
  const bool needs = recording_ && param.trainable;
  nodes_.push_back(Node{param.value, {}, {}, needs ? &param : nullptr, needs});
  param_nodes_.emplace(&param, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

bool Tape::any_requires_grad(const Var* begin, const Var* end) const {
  for (const Var* v = begin; v != end; ++v) {
    require(v->valid() && &v->tape() == this, ErrorCode::kShape, "op mixes variables from different tapes");
    if (nodes_[v->id()].requires_grad) return true;
  }
  return false;
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, Backward backward) {
  const bool needs = recording_ && any_requires_grad(inputs.begin(), inputs.end());
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : Backward{}, nullptr, needs});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Matrix value, const std::vector<Var>& inputs, Backward backward) {
  const bool needs = recording_ && any_requires_grad(inputs.data(), inputs.data() + inputs.size());
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : Backward{}, nullptr, needs});
  return Var(this, nodes_.size() - 1);
}

Matrix& Tape::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.grad.same_shape(n.value) || (n.grad.empty() && !n.value.empty())) {
    n.grad = Matrix(n.value.rows(), n.value.cols());
  }
  return n.grad;
}

const Matrix* Tape::grad_if_any(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.grad.empty() ? nullptr : &n.grad;
}

void Tape::backward(const Var& loss) {
  require(recording_, ErrorCode::kShape, "backward() on a non-recording tape");
  require(loss.rows() == 1 && loss.cols() == 1, ErrorCode::kShape, "backward() needs a 1x1 loss");
  if (!nodes_[loss.id()].requires_grad) return;
  grad(loss.id())(0, 0) = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, i);
    if (n.param != nullptr) {
      if (!n.param->grad.same_shape(n.param->value)) n.param->zero_grad();
      n.param->grad += n.grad;
    }
  }
}

namespace {

void check(bool ok, const std::string& what) { require(ok, ErrorCode::kShape, what); }

std::string dims(const Var& v) { return std::to_string(v.rows()) + "x" + std::to_string(v.cols()); }

}  // namespace

Var matmul(const Var& a, const Var& b) {
  check(a.cols() == b.rows(), "matmul " + dims(a) + " * " + dims(b));
  Matrix out;
  brainnet::matmul(a.value(), b.value(), out);
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ia)) matmul_nt(g, t.value(ib), t.grad(ia), true);
    if (t.requires_grad(ib)) matmul_tn(t.value(ia), g, t.grad(ib), true);
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  check(a.cols() == b.cols(), "matmul_nt " + dims(a) + " * " + dims(b) + "^T");
  Matrix out;
  brainnet::matmul_nt(a.value(), b.value(), out);
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ia)) brainnet::matmul(g, t.value(ib), t.grad(ia), true);
    if (t.requires_grad(ib)) matmul_tn(g, t.value(ia), t.grad(ib), true);
  });
}

Var add(const Var& a, const Var& b) {
  check(a.value().same_shape(b.value()), "add " + dims(a) + " + " + dims(b));
  Matrix out = a.value();
  out += b.value();
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ia)) t.grad(ia) += g;
    if (t.requires_grad(ib)) t.grad(ib) += g;
  });
}

Var sub(const Var& a, const Var& b) {
  check(a.value().same_shape(b.value()), "sub " + dims(a) + " - " + dims(b));
  Matrix out = a.value();
  simd::active_kernels().axpy(-1.0, b.value().data(), out.data(), out.size());
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ia)) t.grad(ia) += g;
    if (t.requires_grad(ib)) simd::active_kernels().axpy(-1.0, g.data(), t.grad(ib).data(), g.size());
  });
}

Var mul(const Var& a, const Var& b) {
  check(a.value().same_shape(b.value()), "mul " + dims(a) + " .* " + dims(b));
  Matrix out(a.rows(), a.cols());
  simd::active_kernels().hadamard(a.value().data(), b.value().data(), out.data(), out.size());
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const auto& k = simd::active_kernels();
    Matrix tmp(g.rows(), g.cols());
    if (t.requires_grad(ia)) {
      k.hadamard(g.data(), t.value(ib).data(), tmp.data(), g.size());
      t.grad(ia) += tmp;
    }
    if (t.requires_grad(ib)) {
      k.hadamard(g.data(), t.value(ia).data(), tmp.data(), g.size());
      t.grad(ib) += tmp;
    }
  });
}

Var scale(const Var& a, double s) {
  Matrix out = a.value();
  for (double& x : out.values()) x *= s;
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, s](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    simd::active_kernels().axpy(s, g.data(), t.grad(ia).data(), g.size());
  });
}

Var add_row(const Var& a, const Var& row) {
  check(row.rows() == 1 && row.cols() == a.cols(), "add_row " + dims(a) + " + " + dims(row));
  Matrix out = a.value();
  const auto& k = simd::active_kernels();
  for (std::size_t i = 0; i < out.rows(); ++i) k.axpy(1.0, row.value().data(), out.row(i).data(), out.cols());
  const std::size_t ia = a.id(), ir = row.id();
  return a.tape().record(std::move(out), {a, row}, [ia, ir](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ia)) t.grad(ia) += g;
    if (t.requires_grad(ir)) {
      Matrix& gr = t.grad(ir);
      for (std::size_t i = 0; i < g.rows(); ++i)
        simd::active_kernels().axpy(1.0, g.row(i).data(), gr.data(), g.cols());
    }
  });
}

Var mul_row(const Var& a, const Var& row) {
  check(row.rows() == 1 && row.cols() == a.cols(), "mul_row " + dims(a) + " .* " + dims(row));
  Matrix out(a.rows(), a.cols());
  const auto& k = simd::active_kernels();
  for (std::size_t i = 0; i < out.rows(); ++i)
    k.hadamard(a.value().row(i).data(), row.value().data(), out.row(i).data(), out.cols());
  const std::size_t ia = a.id(), ir = row.id();
  return a.tape().record(std::move(out), {a, row}, [ia, ir](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& av = t.value(ia);
    const Matrix& rv = t.value(ir);
    const std::size_t n = g.cols();
    if (t.requires_grad(ia)) {
      Matrix& ga = t.grad(ia);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t c = 0; c < n; ++c) ga(i, c) += g(i, c) * rv(0, c);
    }
    if (t.requires_grad(ir)) {
      Matrix& gr = t.grad(ir);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t c = 0; c < n; ++c) gr(0, c) += g(i, c) * av(i, c);
    }
  });
}

Var add_tiled(const Var& a, const Var& block) {
  const std::size_t br = block.rows();
  check(br > 0 && a.rows() % br == 0 && a.cols() == block.cols(),
        "add_tiled " + dims(a) + " + tiles of " + dims(block));
  Matrix out = a.value();
  const auto& k = simd::active_kernels();
  for (std::size_t i = 0; i < out.rows(); ++i)
    k.axpy(1.0, block.value().row(i % br).data(), out.row(i).data(), out.cols());
  const std::size_t ia = a.id(), ib = block.id();
  return a.tape().record(std::move(out), {a, block}, [ia, ib, br](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ia)) t.grad(ia) += g;
    if (t.requires_grad(ib)) {
      Matrix& gb = t.grad(ib);
      for (std::size_t i = 0; i < g.rows(); ++i)
        simd::active_kernels().axpy(1.0, g.row(i).data(), gb.row(i % br).data(), g.cols());
    }
  });
}

Var relu(const Var& a) {
  Matrix out = a.value();
  for (double& x : out.values()) x = x > 0.0 ? x : 0.0;
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& x = t.value(ia);
    Matrix& ga = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (x.data()[i] > 0.0) ga.data()[i] += g.data()[i];
  });
}

Var sigmoid(const Var& a) {
  Matrix out = a.value();
  for (double& x : out.values()) x = 1.0 / (1.0 + std::exp(-x));
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& y = t.value(self);
    Matrix& ga = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double p = y.data()[i];
      ga.data()[i] += g.data()[i] * p * (1.0 - p);
    }
  });
}

Var reshape(const Var& a, std::size_t rows, std::size_t cols) {
  Matrix out = a.value();
  out.reshape(rows, cols);
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    simd::active_kernels().axpy(1.0, g.data(), t.grad(ia).data(), g.size());
  });
}

Var select_rows(const Var& a, const std::vector<std::size_t>& rows) {
  const Matrix& av = a.value();
  Matrix out(rows.size(), av.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    check(rows[i] < av.rows(), "select_rows index out of range");
    std::copy_n(av.row(rows[i]).data(), av.cols(), out.row(i).data());
  }
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, rows](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(ia);
    for (std::size_t i = 0; i < rows.size(); ++i)
      simd::active_kernels().axpy(1.0, g.row(i).data(), ga.row(rows[i]).data(), g.cols());
  });
}

Var slice_rows(const Var& a, std::size_t begin, std::size_t count) {
  check(begin + count <= a.rows(), "slice_rows out of range");
  const Matrix& av = a.value();
  Matrix out(count, av.cols());
  std::copy_n(av.data() + begin * av.cols(), count * av.cols(), out.data());
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, begin](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    simd::active_kernels().axpy(1.0, g.data(), t.grad(ia).data() + begin * g.cols(), g.size());
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  check(!parts.empty(), "concat_rows of nothing");
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  for (const Var& p : parts) {
    check(p.cols() == cols, "concat_rows column mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<std::size_t> ids, offsets;
  std::size_t off = 0;
  for (const Var& p : parts) {
    std::copy_n(p.value().data(), p.value().size(), out.data() + off * cols);
    ids.push_back(p.id());
    offsets.push_back(off);
    off += p.rows();
  }
  return parts.front().tape().record(std::move(out), parts, [ids, offsets](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!t.requires_grad(ids[k])) continue;
      Matrix& gp = t.grad(ids[k]);
      simd::active_kernels().axpy(1.0, g.data() + offsets[k] * g.cols(), gp.data(), gp.size());
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  check(!parts.empty(), "concat_cols of nothing");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    check(p.rows() == rows, "concat_cols row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<std::size_t> ids, offsets;
  std::size_t off = 0;
  for (const Var& p : parts) {
    for (std::size_t i = 0; i < rows; ++i)
      std::copy_n(p.value().row(i).data(), p.cols(), out.row(i).data() + off);
    ids.push_back(p.id());
    offsets.push_back(off);
    off += p.cols();
  }
  return parts.front().tape().record(std::move(out), parts, [ids, offsets](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!t.requires_grad(ids[k])) continue;
      Matrix& gp = t.grad(ids[k]);
      for (std::size_t i = 0; i < gp.rows(); ++i)
        simd::active_kernels().axpy(1.0, g.row(i).data() + offsets[k], gp.row(i).data(), gp.cols());
    }
  });
}

Var mean_row_blocks(const Var& a, std::size_t block) {
  check(block > 0 && a.rows() % block == 0, "mean_row_blocks block does not divide rows");
  const Matrix& av = a.value();
  const std::size_t groups = av.rows() / block;
  Matrix out(groups, av.cols());
  const double inv = 1.0 / static_cast<double>(block);
  for (std::size_t g = 0; g < groups; ++g)
    for (std::size_t r = 0; r < block; ++r)
      simd::active_kernels().axpy(inv, av.row(g * block + r).data(), out.row(g).data(), av.cols());
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, block, inv](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(ia);
    for (std::size_t r = 0; r < ga.rows(); ++r)
      simd::active_kernels().axpy(inv, g.row(r / block).data(), ga.row(r).data(), ga.cols());
  });
}

Var max_row_groups(const Var& a, const std::vector<std::vector<std::size_t>>& groups) {
  const Matrix& av = a.value();
  const std::size_t d = av.cols();
  Matrix out(groups.size(), d);
  std::vector<std::size_t> argmax(groups.size() * d);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    check(!groups[g].empty(), "max_row_groups: empty group");
    for (std::size_t c = 0; c < d; ++c) {
      std::size_t best = groups[g].front();
      for (std::size_t r : groups[g]) {
        check(r < av.rows(), "max_row_groups index out of range");
        if (av(r, c) > av(best, c)) best = r;
      }
      out(g, c) = av(best, c);
      argmax[g * d + c] = best;
    }
  }
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, argmax, d](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(ia);
    for (std::size_t i = 0; i < argmax.size(); ++i) ga(argmax[i], i % d) += g.data()[i];
  });
}

Var sum_all(const Var& a) {
  double s = 0.0;
  for (double x : a.value().values()) s += x;
  const std::size_t ia = a.id();
  return a.tape().record(Matrix(1, 1, s), {a}, [ia](Tape& t, std::size_t self) {
    const double g = t.grad(self)(0, 0);
    for (double& x : t.grad(ia).values()) x += g;
  });
}

Var weighted_sum(const std::vector<Var>& scalars, const std::vector<double>& weights) {
  check(!scalars.empty() && scalars.size() == weights.size(), "weighted_sum arity mismatch");
  double s = 0.0;
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    s += weights[i] * scalars[i].scalar();
    ids.push_back(scalars[i].id());
  }
  return scalars.front().tape().record(Matrix(1, 1, s), scalars, [ids, weights](Tape& t, std::size_t self) {
    const double g = t.grad(self)(0, 0);
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (t.requires_grad(ids[i])) t.grad(ids[i])(0, 0) += weights[i] * g;
  });
}

}  // namespace brainnet::ad
