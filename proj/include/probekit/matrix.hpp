#ifndef PROBEKIT_MATRIX_HPP
#define PROBEKIT_MATRIX_HPP

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "probekit/error.hpp"

namespace probekit {

// Dense row-major matrix of doubles. All training and evaluation arithmetic
// is 64-bit; the 32-bit activation file format widens on load.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix row(std::initializer_list<double> values) {
    Matrix m(1, values.size());
    std::size_t j = 0;
    for (double v : values) m(0, j++) = v;
    return m;
  }
  static Matrix column(std::initializer_list<double> values) {
    Matrix m(values.size(), 1);
    std::size_t i = 0;
    for (double v : values) m(i++, 0) = v;
    return m;
  }
  static Matrix scalar(double v) {
    Matrix m(1, 1);
    m(0, 0) = v;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double* row_ptr(std::size_t r) { return data_.data() + r * cols_; }
  const double* row_ptr(std::size_t r) const { return data_.data() + r * cols_; }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool is_finite() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator*=(double s);

  bool operator==(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// C = A * B. Throws contract_error on inner-dimension mismatch.
Matrix matmul(const Matrix& a, const Matrix& b);

// C += A * B into a preallocated result (hot path for the trainer).
void matmul_accumulate(const Matrix& a, const Matrix& b, Matrix& out);

// C = A^T * B without materializing the transpose.
Matrix matmul_transposed_a(const Matrix& a, const Matrix& b);

// C = A * B^T without materializing the transpose.
Matrix matmul_transposed_b(const Matrix& a, const Matrix& b);

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* where) {
  if (!a.same_shape(b)) throw contract_error(std::string(where) + ": shape mismatch");
}

}  // namespace probekit

#endif  // PROBEKIT_MATRIX_HPP
