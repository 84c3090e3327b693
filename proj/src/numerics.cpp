#include "taflab/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace taflab::num {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

double sign_of(double magnitude, double sign) {
  return sign >= 0.0 ? std::fabs(magnitude) : -std::fabs(magnitude);
}

// Osborne balancing (radix 2): diagonal similarity scaling that equalizes
// row and column norms. Leaves the spectrum unchanged.
void balance(Matrix& a) {
  const int n = a.rows();
  const double radix = 2.0, sq = radix * radix;
  bool done = false;
  while (!done) {
    done = true;
    for (int i = 0; i < n; ++i) {
      double r = 0.0, c = 0.0;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        c += std::fabs(a(j, i));
        r += std::fabs(a(i, j));
      }
      if (c == 0.0 || r == 0.0) continue;
      double g = r / radix, f = 1.0;
      const double s = c + r;
      while (c < g) {
        f *= radix;
        c *= sq;
      }
      g = r * radix;
      while (c > g) {
        f /= radix;
        c /= sq;
      }
      if ((c + r) / f < 0.95 * s) {
        done = false;
        g = 1.0 / f;
        for (int j = 0; j < n; ++j) a(i, j) *= g;
        for (int j = 0; j < n; ++j) a(j, i) *= f;
      }
    }
  }
}

// Householder reduction to upper Hessenberg form (eigenvalues only, no
// transform accumulation).
void hessenberg(Matrix& a) {
  const int n = a.rows();
  std::vector<double> v(n);
  for (int k = 0; k + 2 < n; ++k) {
    double norm = 0.0;
    for (int i = k + 1; i < n; ++i) norm += a(i, k) * a(i, k);
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    const double alpha = -sign_of(norm, a(k + 1, k));
    double vnorm2 = 0.0;
    for (int i = k + 1; i < n; ++i) {
      v[i] = a(i, k);
      if (i == k + 1) v[i] -= alpha;
      vnorm2 += v[i] * v[i];
    }
    if (vnorm2 == 0.0) continue;

    // A <- (I - 2vv^T/|v|^2) A
    for (int j = k; j < n; ++j) {
      double dot = 0.0;
      for (int i = k + 1; i < n; ++i) dot += v[i] * a(i, j);
      const double scale = 2.0 * dot / vnorm2;
      for (int i = k + 1; i < n; ++i) a(i, j) -= scale * v[i];
    }
    // A <- A (I - 2vv^T/|v|^2)
    for (int i = 0; i < n; ++i) {
      double dot = 0.0;
      for (int j = k + 1; j < n; ++j) dot += a(i, j) * v[j];
      const double scale = 2.0 * dot / vnorm2;
      for (int j = k + 1; j < n; ++j) a(i, j) -= scale * v[j];
    }
    a(k + 1, k) = alpha;
    for (int i = k + 2; i < n; ++i) a(i, k) = 0.0;
  }
}

// Francis double-shift QR on an upper Hessenberg matrix with deflation and
// exceptional shifts. Iteration cap of 100 sweeps per eigenvalue.
std::vector<std::complex<double>> hessenberg_qr(Matrix& a) {
  const int n = a.rows();
  std::vector<std::complex<double>> eig(n);

  double anorm = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = std::max(i - 1, 0); j < n; ++j) anorm += std::fabs(a(i, j));
  if (anorm == 0.0) return eig;  // zero matrix

  int nn = n - 1;
  double t = 0.0;
  while (nn >= 0) {
    int its = 0;
    int l;
    do {
      for (l = nn; l >= 1; --l) {
        double s = std::fabs(a(l - 1, l - 1)) + std::fabs(a(l, l));
        if (s == 0.0) s = anorm;
        if (std::fabs(a(l, l - 1)) <= kEps * s) {
          a(l, l - 1) = 0.0;
          break;
        }
      }
      if (l < 0) l = 0;
      double x = a(nn, nn);
      if (l == nn) {
        eig[nn] = {x + t, 0.0};
        --nn;
      } else {
        double y = a(nn - 1, nn - 1);
        double w = a(nn, nn - 1) * a(nn - 1, nn);
        if (l == nn - 1) {
          double p = 0.5 * (y - x);
          double q = p * p + w;
          double z = std::sqrt(std::fabs(q));
          x += t;
          if (q >= 0.0) {
            z = p + sign_of(z, p);
            eig[nn - 1] = eig[nn] = {x + z, 0.0};
            if (z != 0.0) eig[nn] = {x - w / z, 0.0};
          } else {
            eig[nn - 1] = {x + p, z};
            eig[nn] = {x + p, -z};
          }
          nn -= 2;
        } else {
          if (its == 100)
            throw std::runtime_error("eigenvalues: QR iteration did not converge");
          if (its != 0 && its % 10 == 0) {
            // exceptional shift to break limit cycles
            t += x;
            for (int i = 0; i <= nn; ++i) a(i, i) -= x;
            double s = std::fabs(a(nn, nn - 1)) + std::fabs(a(nn - 1, nn - 2));
            y = x = 0.75 * s;
            w = -0.4375 * s * s;
          }
          ++its;
          int m;
          double p = 0.0, q = 0.0, r = 0.0, z = 0.0;
          for (m = nn - 2; m >= l; --m) {
            z = a(m, m);
            double rr = x - z;
            double ss = y - z;
            p = (rr * ss - w) / a(m + 1, m) + a(m, m + 1);
            q = a(m + 1, m + 1) - z - rr - ss;
            r = a(m + 2, m + 1);
            double s = std::fabs(p) + std::fabs(q) + std::fabs(r);
            p /= s;
            q /= s;
            r /= s;
            if (m == l) break;
            const double u = std::fabs(a(m, m - 1)) * (std::fabs(q) + std::fabs(r));
            const double v = std::fabs(p) * (std::fabs(a(m - 1, m - 1)) +
                                             std::fabs(z) +
                                             std::fabs(a(m + 1, m + 1)));
            if (u <= kEps * v) break;
          }
          for (int i = m + 2; i <= nn; ++i) {
            a(i, i - 2) = 0.0;
            if (i != m + 2) a(i, i - 3) = 0.0;
          }
          for (int k = m; k <= nn - 1; ++k) {
            if (k != m) {
              p = a(k, k - 1);
              q = a(k + 1, k - 1);
              r = k != nn - 1 ? a(k + 2, k - 1) : 0.0;
              x = std::fabs(p) + std::fabs(q) + std::fabs(r);
              if (x != 0.0) {
                p /= x;
                q /= x;
                r /= x;
              }
            }
            double s = sign_of(std::sqrt(p * p + q * q + r * r), p);
            if (s == 0.0) continue;
            if (k == m) {
              if (l != m) a(k, k - 1) = -a(k, k - 1);
            } else {
              a(k, k - 1) = -s * x;
            }
            p += s;
            x = p / s;
            y = q / s;
            z = r / s;
            q /= p;
            r /= p;
            for (int j = k; j <= nn; ++j) {
              p = a(k, j) + q * a(k + 1, j);
              if (k != nn - 1) {
                p += r * a(k + 2, j);
                a(k + 2, j) -= p * z;
              }
              a(k + 1, j) -= p * y;
              a(k, j) -= p * x;
            }
            const int mmin = nn < k + 3 ? nn : k + 3;
            for (int i = l; i <= mmin; ++i) {
              p = x * a(i, k) + y * a(i, k + 1);
              if (k != nn - 1) {
                p += z * a(i, k + 2);
                a(i, k + 2) -= p * r;
              }
              a(i, k + 1) -= p * q;
              a(i, k) -= p;
            }
          }
        }
      }
    } while (l < nn - 1);
  }
  return eig;
}

}  // namespace

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul shape mismatch");
  Matrix c(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

std::vector<double> matvec(const Matrix& m, std::span<const double> v) {
  if (static_cast<std::size_t>(m.cols()) != v.size())
    throw std::invalid_argument("matvec shape mismatch");
  std::vector<double> out(m.rows(), 0.0);
  for (int i = 0; i < m.rows(); ++i) {
    double acc = 0.0;
    for (int j = 0; j < m.cols(); ++j) acc += m(i, j) * v[j];
    out[i] = acc;
  }
  return out;
}

ComplexSpectrum eigenvalues(const Matrix& m) {
  if (m.rows() != m.cols())
    throw std::invalid_argument("eigenvalues: matrix must be square");
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j)
      if (!std::isfinite(m(i, j)))
        throw std::invalid_argument("eigenvalues: non-finite entry");

  Matrix work = m;
  balance(work);
  hessenberg(work);
  ComplexSpectrum spectrum;
  spectrum.eigenvalues = hessenberg_qr(work);
  std::stable_sort(spectrum.eigenvalues.begin(), spectrum.eigenvalues.end(),
                   [](const auto& a, const auto& b) {
                     const double ma = std::abs(a), mb = std::abs(b);
                     if (ma != mb) return ma > mb;
                     return a.imag() > b.imag();
                   });
  return spectrum;
}

double determinant(const Matrix& m) {
  if (m.rows() != m.cols())
    throw std::invalid_argument("determinant: matrix must be square");
  Matrix a = m;
  const int n = a.rows();
  double det = 1.0;
  for (int k = 0; k < n; ++k) {
    int pivot = k;
    for (int i = k + 1; i < n; ++i)
      if (std::fabs(a(i, k)) > std::fabs(a(pivot, k))) pivot = i;
    if (a(pivot, k) == 0.0) return 0.0;
    if (pivot != k) {
      for (int j = 0; j < n; ++j) std::swap(a(pivot, j), a(k, j));
      det = -det;
    }
    det *= a(k, k);
    for (int i = k + 1; i < n; ++i) {
      const double factor = a(i, k) / a(k, k);
      for (int j = k; j < n; ++j) a(i, j) -= factor * a(k, j);
    }
  }
  return det;
}

void symmetric_eigen(const Matrix& a_in, std::vector<double>& values,
                     Matrix& vectors) {
  if (a_in.rows() != a_in.cols())
    throw std::invalid_argument("symmetric_eigen: matrix must be square");
  const int n = a_in.rows();
  Matrix a = a_in;
  Matrix v = Matrix::identity(n);

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30) break;

    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (std::fabs(a(p, q)) < 1e-300) continue;
        const double tau = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = sign_of(1.0, tau) /
                         (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (int i = 0; i < n; ++i) {
          const double aip = a(i, p), aiq = a(i, q);
          a(i, p) = c * aip - s * aiq;
          a(i, q) = s * aip + c * aiq;
        }
        for (int j = 0; j < n; ++j) {
          const double apj = a(p, j), aqj = a(q, j);
          a(p, j) = c * apj - s * aqj;
          a(q, j) = s * apj + c * aqj;
        }
        for (int i = 0; i < n; ++i) {
          const double vip = v(i, p), viq = v(i, q);
          v(i, p) = c * vip - s * viq;
          v(i, q) = s * vip + c * viq;
        }
      }
    }
  }

  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](int i, int j) { return a(i, i) > a(j, j); });
  values.resize(n);
  vectors = Matrix(n, n);
  for (int r = 0; r < n; ++r) {
    values[r] = a(order[r], order[r]);
    for (int i = 0; i < n; ++i) vectors(r, i) = v(i, order[r]);
  }
}

PcaResult pca(const Matrix& x, int k) {
  const int n = x.rows(), d = x.cols();
  if (n < 2) throw std::invalid_argument("pca: need at least 2 samples");
  if (k < 1 || k > std::min(n, d))
    throw std::invalid_argument("pca: invalid component count");

  PcaResult result;
  result.mean.assign(d, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) result.mean[j] += x(i, j);
  for (double& m : result.mean) m /= n;

  Matrix centered(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) centered(i, j) = x(i, j) - result.mean[j];

  Matrix cov(d, d);
  for (int a = 0; a < d; ++a) {
    for (int b = a; b < d; ++b) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += centered(i, a) * centered(i, b);
      cov(a, b) = cov(b, a) = acc / (n - 1);
    }
  }

  std::vector<double> evals;
  Matrix evecs;
  symmetric_eigen(cov, evals, evecs);

  result.components = Matrix(k, d);
  result.explained_variance.resize(k);
  for (int r = 0; r < k; ++r) {
    result.explained_variance[r] = std::max(evals[r], 0.0);
    for (int j = 0; j < d; ++j) result.components(r, j) = evecs(r, j);
  }
  result.projected = Matrix(n, k);
  for (int i = 0; i < n; ++i)
    for (int r = 0; r < k; ++r) {
      double acc = 0.0;
      for (int j = 0; j < d; ++j) acc += centered(i, j) * result.components(r, j);
      result.projected(i, r) = acc;
    }
  return result;
}

std::array<double, 2> pinv_project(const Matrix& h_basis,
                                   std::span<const double> h) {
  if (h_basis.cols() != 2 || static_cast<std::size_t>(h_basis.rows()) != h.size())
    throw std::invalid_argument("pinv_project: basis must be d x 2 matching h");
  const int d = h_basis.rows();
  double g00 = 0.0, g01 = 0.0, g11 = 0.0, r0 = 0.0, r1 = 0.0;
  for (int i = 0; i < d; ++i) {
    const double c0 = h_basis(i, 0), c1 = h_basis(i, 1);
    g00 += c0 * c0;
    g01 += c0 * c1;
    g11 += c1 * c1;
    r0 += c0 * h[i];
    r1 += c1 * h[i];
  }
  // condition number of the 2x2 Gram matrix from its analytic eigenvalues
  const double tr = g00 + g11;
  const double det = g00 * g11 - g01 * g01;
  const double disc = std::sqrt(std::max(tr * tr / 4.0 - det, 0.0));
  const double lo = tr / 2.0 - disc, hi = tr / 2.0 + disc;
  if (lo <= 0.0 || hi / lo > 1e12)
    throw std::runtime_error("pinv_project: degenerate basis (ill-conditioned Gram matrix)");
  return {(g11 * r0 - g01 * r1) / det, (g00 * r1 - g01 * r0) / det};
}

double LogisticModel::decision(std::span<const double> x) const {
  double z = bias;
  for (std::size_t j = 0; j < weights.size(); ++j) z += weights[j] * x[j];
  return z;
}

double LogisticModel::probability(std::span<const double> x) const {
  const double z = decision(x);
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                  : std::exp(z) / (1.0 + std::exp(z));
}

LogisticModel logistic_fit(const Matrix& x, const std::vector<int>& labels,
                           double l2, int max_iter) {
  const int n = x.rows(), d = x.cols();
  if (static_cast<int>(labels.size()) != n)
    throw std::invalid_argument("logistic_fit: label count mismatch");
  bool has0 = false, has1 = false;
  for (int y : labels) (y ? has1 : has0) = true;
  if (!has0 || !has1)
    throw std::invalid_argument("logistic_fit: both classes must be present");

  LogisticModel model;
  model.weights.assign(d, 0.0);
  std::vector<double> grad_w(d), best_w;
  double grad_b = 0.0;

  auto objective = [&](const std::vector<double>& w, double b, bool with_grad) {
    if (with_grad) {
      std::fill(grad_w.begin(), grad_w.end(), 0.0);
      grad_b = 0.0;
    }
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
      double z = b;
      for (int j = 0; j < d; ++j) z += w[j] * x(i, j);
      // softplus(z) - y z, numerically stable
      loss += (z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z))) -
              labels[i] * z;
      if (with_grad) {
        const double p = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                                  : std::exp(z) / (1.0 + std::exp(z));
        const double delta = p - labels[i];
        for (int j = 0; j < d; ++j) grad_w[j] += delta * x(i, j);
        grad_b += delta;
      }
    }
    loss /= n;
    for (int j = 0; j < d; ++j) loss += 0.5 * l2 * w[j] * w[j];
    if (with_grad) {
      for (int j = 0; j < d; ++j) grad_w[j] = grad_w[j] / n + l2 * w[j];
      grad_b /= n;
    }
    return loss;
  };

  double lr = 1.0;
  double loss = objective(model.weights, model.bias, true);
  for (int it = 0; it < max_iter; ++it) {
    double gnorm2 = grad_b * grad_b;
    for (double g : grad_w) gnorm2 += g * g;
    if (std::sqrt(gnorm2) < 1e-6) break;

    std::vector<double> w_new(d);
    for (int j = 0; j < d; ++j) w_new[j] = model.weights[j] - lr * grad_w[j];
    const double b_new = model.bias - lr * grad_b;
    const double loss_new = objective(w_new, b_new, false);
    if (loss_new <= loss) {
      model.weights = std::move(w_new);
      model.bias = b_new;
      loss = objective(model.weights, model.bias, true);
      lr *= 1.1;
    } else {
      lr *= 0.5;
      if (lr < 1e-12) break;
    }
  }
  return model;
}

}  // namespace taflab::num
