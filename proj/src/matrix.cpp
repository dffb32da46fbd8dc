#include "probekit/matrix.hpp"

#include <cmath>

namespace probekit {

bool Matrix::is_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Matrix& Matrix::operator+=(const Matrix& other) {
  require_same_shape(*this, other, "Matrix::operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

void matmul_accumulate(const Matrix& a, const Matrix& b, Matrix& out) {
  if (a.cols() != b.rows()) throw contract_error("matmul: inner dimension mismatch");
  if (out.rows() != a.rows() || out.cols() != b.cols())
    throw contract_error("matmul: output shape mismatch");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  // i-k-j order keeps both B and the output row-contiguous in the inner loop.
  for (std::size_t i = 0; i < m; ++i) {
    double* out_row = out.row_ptr(i);
    const double* a_row = a.row_ptr(i);
    for (std::size_t p = 0; p < k; ++p) {
      const double aik = a_row[p];
      const double* b_row = b.row_ptr(p);
      for (std::size_t j = 0; j < n; ++j) out_row[j] += aik * b_row[j];
    }
  }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  matmul_accumulate(a, b, out);
  return out;
}

Matrix matmul_transposed_a(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw contract_error("matmul_transposed_a: dimension mismatch");
  const std::size_t m = a.cols(), k = a.rows(), n = b.cols();
  Matrix out(m, n);
  for (std::size_t p = 0; p < k; ++p) {
    const double* a_row = a.row_ptr(p);
    const double* b_row = b.row_ptr(p);
    for (std::size_t i = 0; i < m; ++i) {
      const double v = a_row[i];
      double* out_row = out.row_ptr(i);
      for (std::size_t j = 0; j < n; ++j) out_row[j] += v * b_row[j];
    }
  }
  return out;
}

Matrix matmul_transposed_b(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw contract_error("matmul_transposed_b: dimension mismatch");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  Matrix out(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    const double* a_row = a.row_ptr(i);
    double* out_row = out.row_ptr(i);
    for (std::size_t j = 0; j < n; ++j) {
      const double* b_row = b.row_ptr(j);
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a_row[p] * b_row[p];
      out_row[j] += acc;
    }
  }
  return out;
}

}  // namespace probekit
