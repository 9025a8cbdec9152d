#include "brainnet/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "brainnet/error.hpp"
#include "brainnet/simd/kernels.hpp"

namespace brainnet {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  require(data_.size() == rows_ * cols_, ErrorCode::kShape,
          "buffer of " + std::to_string(data_.size()) + " values for " + std::to_string(rows_) +
              "x" + std::to_string(cols_) + " matrix");
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ ? rows.begin()->size() : 0;
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    require(r.size() == cols_, ErrorCode::kShape, "ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Matrix::reshape(std::size_t rows, std::size_t cols) {
  require(rows * cols == data_.size(), ErrorCode::kShape, "reshape changes element count");
  rows_ = rows;
  cols_ = cols;
}

Matrix& Matrix::operator+=(const Matrix& o) {
  require(same_shape(o), ErrorCode::kShape, "matrix += shape mismatch");
  simd::active_kernels().axpy(1.0, o.data(), data(), size());
  return *this;
}

namespace {

void prepare_out(Matrix& out, std::size_t rows, std::size_t cols, bool accumulate) {
  if (accumulate) {
    require(out.rows() == rows && out.cols() == cols, ErrorCode::kShape,
            "accumulating matmul into wrongly shaped output");
  } else if (out.rows() != rows || out.cols() != cols) {
    out = Matrix(rows, cols);
  } else {
    out.fill(0.0);
  }
}

std::string dims(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

void matmul(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate) {
  require(a.cols() == b.rows(), ErrorCode::kShape, "matmul " + dims(a) + " * " + dims(b));
  prepare_out(out, a.rows(), b.cols(), accumulate);
  const auto& k = simd::active_kernels();
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* orow = out.data() + i * n;
    const double* arow = a.data() + i * a.cols();
    for (std::size_t p = 0; p < a.cols(); ++p) {
      if (arow[p] != 0.0) k.axpy(arow[p], b.data() + p * n, orow, n);
    }
  }
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate) {
  require(a.cols() == b.cols(), ErrorCode::kShape, "matmul_nt " + dims(a) + " * " + dims(b) + "^T");
  prepare_out(out, a.rows(), b.rows(), accumulate);
  const auto& k = simd::active_kernels();
  const std::size_t d = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      out(i, j) += k.dot(a.data() + i * d, b.data() + j * d, d);
    }
  }
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate) {
  require(a.rows() == b.rows(), ErrorCode::kShape, "matmul_tn " + dims(a) + "^T * " + dims(b));
  prepare_out(out, a.cols(), b.cols(), accumulate);
  const auto& k = simd::active_kernels();
  const std::size_t n = b.cols();
  for (std::size_t p = 0; p < a.rows(); ++p) {
    const double* arow = a.data() + p * a.cols();
    const double* brow = b.data() + p * n;
    for (std::size_t i = 0; i < a.cols(); ++i) {
      if (arow[i] != 0.0) k.axpy(arow[i], brow, out.data() + i * n, n);
    }
  }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix out;
  matmul(a, b, out);
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require(a.same_shape(b), ErrorCode::kShape, "max_abs_diff shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

}  // namespace brainnet
