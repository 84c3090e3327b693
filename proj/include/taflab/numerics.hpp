#pragma once

#include <array>
#include <complex>
#include <span>
#include <vector>

namespace taflab::num {

// Dense row-major matrix of doubles. Small sizes only (analysis runs on
// hidden dimensions of a few dozen).
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols),
        data_(static_cast<std::size_t>(rows) * cols, fill) {}

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  double& operator()(int i, int j) {
    return data_[static_cast<std::size_t>(i) * cols_ + j];
  }
  double operator()(int i, int j) const {
    return data_[static_cast<std::size_t>(i) * cols_ + j];
  }

  std::span<double> row(int i) {
    return {data_.data() + static_cast<std::size_t>(i) * cols_,
            static_cast<std::size_t>(cols_)};
  }
  std::span<const double> row(int i) const {
    return {data_.data() + static_cast<std::size_t>(i) * cols_,
            static_cast<std::size_t>(cols_)};
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  Matrix transposed() const;

  friend Matrix operator*(const Matrix& a, const Matrix& b);

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

std::vector<double> matvec(const Matrix& m, std::span<const double> v);

// Full complex spectrum, sorted by descending modulus; complex values
// appear in conjugate pairs.
struct ComplexSpectrum {
  std::vector<std::complex<double>> eigenvalues;

  double max_modulus() const {
    return eigenvalues.empty() ? 0.0 : std::abs(eigenvalues.front());
  }
};

// Eigenvalues of a real square matrix: balance, Householder reduction to
// Hessenberg form, then Francis double-shift QR with deflation. Throws
// std::runtime_error if a sweep fails to converge within the iteration cap.
ComplexSpectrum eigenvalues(const Matrix& m);

// Determinant via LU with partial pivoting.
double determinant(const Matrix& m);

// Symmetric eigendecomposition by cyclic Jacobi rotations. Returns
// eigenvalues in descending order; rows of `vectors` are the matching
// orthonormal eigenvectors.
void symmetric_eigen(const Matrix& a, std::vector<double>& values,
                     Matrix& vectors);

struct PcaResult {
  Matrix components;                      // k x d, orthonormal rows
  Matrix projected;                       // n x k
  std::vector<double> explained_variance; // descending
  std::vector<double> mean;               // d
};

// PCA of an n x d data matrix via Jacobi eigendecomposition of the sample
// covariance. Zero-variance directions yield zero variance, not an error.
PcaResult pca(const Matrix& x, int k);

// Coordinates of h in the span of H's two columns: (H^T H)^{-1} H^T h.
// Throws std::runtime_error when H^T H has condition number > 1e12.
std::array<double, 2> pinv_project(const Matrix& h_basis,
                                   std::span<const double> h);

struct LogisticModel {
  std::vector<double> weights;
  double bias = 0.0;

  double decision(std::span<const double> x) const;
  double probability(std::span<const double> x) const;
  int predict(std::span<const double> x) const {
    return decision(x) > 0.0 ? 1 : 0;
  }
};

// Binary logistic regression by gradient descent with an adaptive step,
// run until the gradient norm drops below 1e-6 or `max_iter` steps.
// Throws std::invalid_argument unless both classes are present.
LogisticModel logistic_fit(const Matrix& x, const std::vector<int>& labels,
                           double l2 = 1e-4, int max_iter = 2000);

}  // namespace taflab::num
