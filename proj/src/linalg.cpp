#include "fsdp/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fsdp/errors.hpp"
#include "fsdp/kernels.hpp"

namespace fsdp {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ShapeError(what);
}

}  // namespace

// ---- SymMatrix ----

SymMatrix::SymMatrix(std::size_t p) : p_(p), a_(p * p, 0.0) {
  if (p == 0) throw ShapeError("SymMatrix: dim must be >= 1");
}

SymMatrix::SymMatrix(std::size_t p, std::vector<double> entries)
    : p_(p), a_(std::move(entries)) {
  if (p == 0) throw ShapeError("SymMatrix: dim must be >= 1");
  require(a_.size() == p * p, "SymMatrix: entry count != p*p");
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i + 1; j < p; ++j) {
      const double s = 0.5 * (a_[i * p + j] + a_[j * p + i]);
      a_[i * p + j] = s;
      a_[j * p + i] = s;
    }
  }
}

SymMatrix SymMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  const std::size_t p = rows.size();
  std::vector<double> e;
  e.reserve(p * p);
  for (const auto& r : rows) {
    require(r.size() == p, "SymMatrix::from_rows: not square");
    e.insert(e.end(), r.begin(), r.end());
  }
  return SymMatrix(p, std::move(e));
}

SymMatrix SymMatrix::identity(std::size_t p) {
  SymMatrix m(p);
  for (std::size_t i = 0; i < p; ++i) m.a_[i * p + i] = 1.0;
  return m;
}

SymMatrix SymMatrix::diag(const std::vector<double>& d) {
  SymMatrix m(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m.a_[i * d.size() + i] = d[i];
  return m;
}

SymMatrix& SymMatrix::operator+=(const SymMatrix& o) {
  require(p_ == o.p_, "SymMatrix +=: dim mismatch");
  for (std::size_t i = 0; i < a_.size(); ++i) a_[i] += o.a_[i];
  return *this;
}

SymMatrix& SymMatrix::operator-=(const SymMatrix& o) {
  require(p_ == o.p_, "SymMatrix -=: dim mismatch");
  for (std::size_t i = 0; i < a_.size(); ++i) a_[i] -= o.a_[i];
  return *this;
}

SymMatrix& SymMatrix::operator*=(double s) {
  for (double& x : a_) x *= s;
  return *this;
}

SymMatrix& SymMatrix::axpy(double alpha, const SymMatrix& o) {
  require(p_ == o.p_, "SymMatrix axpy: dim mismatch");
  // Elementwise, so symmetry of both operands is preserved exactly.
  for (std::size_t i = 0; i < a_.size(); ++i) a_[i] += alpha * o.a_[i];
  return *this;
}

double SymMatrix::trace() const {
  double t = 0.0;
  for (std::size_t i = 0; i < p_; ++i) t += a_[i * p_ + i];
  return t;
}

SymMatrix operator+(SymMatrix a, const SymMatrix& b) { return a += b; }
SymMatrix operator-(SymMatrix a, const SymMatrix& b) { return a -= b; }
SymMatrix operator*(double s, SymMatrix a) { return a *= s; }

// ---- Factor ----

Factor::Factor(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), a_(rows * cols, 0.0) {}

Factor::Factor(std::size_t rows, std::size_t cols, std::vector<double> entries)
    : rows_(rows), cols_(cols), a_(std::move(entries)) {
  require(a_.size() == rows * cols, "Factor: entry count != rows*cols");
}

Factor Factor::from_rows(const std::vector<std::vector<double>>& rows) {
  const std::size_t n = rows.size();
  const std::size_t c = n ? rows[0].size() : 0;
  std::vector<double> e;
  e.reserve(n * c);
  for (const auto& r : rows) {
    require(r.size() == c, "Factor::from_rows: ragged rows");
    e.insert(e.end(), r.begin(), r.end());
  }
  return Factor(n, c, std::move(e));
}

Factor Factor::identity(std::size_t p) {
  Factor f(p, p);
  for (std::size_t i = 0; i < p; ++i) f(i, i) = 1.0;
  return f;
}

Factor& Factor::operator+=(const Factor& o) {
  require(rows_ == o.rows_ && cols_ == o.cols_, "Factor +=: shape mismatch");
  for (std::size_t i = 0; i < a_.size(); ++i) a_[i] += o.a_[i];
  return *this;
}

Factor& Factor::operator-=(const Factor& o) {
  require(rows_ == o.rows_ && cols_ == o.cols_, "Factor -=: shape mismatch");
  for (std::size_t i = 0; i < a_.size(); ++i) a_[i] -= o.a_[i];
  return *this;
}

Factor& Factor::operator*=(double s) {
  for (double& x : a_) x *= s;
  return *this;
}

Factor& Factor::axpy(double alpha, const Factor& o) {
  require(rows_ == o.rows_ && cols_ == o.cols_, "Factor axpy: shape mismatch");
  kernels::axpy(alpha, o.a_.data(), a_.data(), a_.size());
  return *this;
}

Factor Factor::transpose() const {
  Factor t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Factor operator+(Factor a, const Factor& b) { return a += b; }
Factor operator-(Factor a, const Factor& b) { return a -= b; }
Factor operator*(double s, Factor a) { return a *= s; }

// ---- products and norms ----

double tol_recon(const SymMatrix& m) { return 1e-9 * std::max(1.0, frob_norm(m)); }

double tol_psd(const SymMatrix& m) {
  return 1e-8 * std::max(1.0, norms(m).spectral);
}

SymMatrix gram(const Factor& u) {
  const std::size_t p = u.rows();
  std::vector<double> out(p * p);
  kernels::gemm_nt(u.data(), u.data(), out.data(), p, u.cols(), p);
  return SymMatrix(p, std::move(out));
}

Factor mul(const SymMatrix& m, const Factor& u) {
  require(m.dim() == u.rows(), "mul: dim mismatch");
  const Factor ut = u.transpose();
  Factor out(m.dim(), u.cols());
  kernels::gemm_nt(m.data(), ut.data(), out.data(), m.dim(), m.dim(), u.cols());
  return out;
}

Factor matmul(const Factor& a, const Factor& b) {
  require(a.cols() == b.rows(), "matmul: inner dim mismatch");
  const Factor bt = b.transpose();
  Factor out(a.rows(), b.cols());
  kernels::gemm_nt(a.data(), bt.data(), out.data(), a.rows(), a.cols(), b.cols());
  return out;
}

Factor matmul_tn(const Factor& a, const Factor& b) {
  require(a.rows() == b.rows(), "matmul_tn: row mismatch");
  return matmul(a.transpose(), b);
}

double frob_dot(const SymMatrix& a, const SymMatrix& b) {
  require(a.dim() == b.dim(), "frob_dot: dim mismatch");
  return kernels::dot(a.data(), b.data(), a.entries().size());
}

double frob_dot(const Factor& a, const Factor& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "frob_dot: shape mismatch");
  return kernels::dot(a.data(), b.data(), a.size());
}

double frob_norm(const SymMatrix& a) { return std::sqrt(frob_dot(a, a)); }
double frob_norm(const Factor& a) { return std::sqrt(frob_dot(a, a)); }

double max_abs(const Factor& a) {
  double m = 0.0;
  for (double x : a.entries()) m = std::max(m, std::fabs(x));
  return m;
}

bool all_finite(const Factor& a) {
  for (double x : a.entries())
    if (!std::isfinite(x)) return false;
  return true;
}

bool all_finite(const SymMatrix& a) {
  for (double x : a.entries())
    if (!std::isfinite(x)) return false;
  return true;
}

// ---- symmetric eigendecomposition: cyclic Jacobi ----

EigDecomp eig_sym(const SymMatrix& m) {
  const std::size_t n = m.dim();
  std::vector<double> a(m.entries());
  Factor v = Factor::identity(n);
  std::vector<double> d(n), b(n), z(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) d[i] = b[i] = a[i * n + i];
  if (!all_finite(m)) throw EigFail("eig_sym: non-finite input");

  auto A = [&](std::size_t i, std::size_t j) -> double& { return a[i * n + j]; };
  auto rotate = [](double& x, double& y, double s, double tau) {
    const double g = x, h = y;
    x = g - s * (h + g * tau);
    y = h + s * (g - h * tau);
  };

  bool converged = n == 1;
  for (int sweep = 1; sweep <= kMaxEigSweeps && !converged; ++sweep) {
    double sm = 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) sm += std::fabs(A(p, q));
    if (sm == 0.0) {
      converged = true;
      break;
    }
    const double tresh = sweep < 4 ? 0.2 * sm / static_cast<double>(n * n) : 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double g = 100.0 * std::fabs(A(p, q));
        if (sweep > 4 && std::fabs(d[p]) + g == std::fabs(d[p]) &&
            std::fabs(d[q]) + g == std::fabs(d[q])) {
          A(p, q) = 0.0;
        } else if (std::fabs(A(p, q)) > tresh) {
          double h = d[q] - d[p];
          double t;
          if (std::fabs(h) + g == std::fabs(h)) {
            t = A(p, q) / h;
          } else {
            const double theta = 0.5 * h / A(p, q);
            t = 1.0 / (std::fabs(theta) + std::sqrt(1.0 + theta * theta));
            if (theta < 0.0) t = -t;
          }
          const double c = 1.0 / std::sqrt(1.0 + t * t);
          const double s = t * c;
          const double tau = s / (1.0 + c);
          h = t * A(p, q);
          z[p] -= h;
          z[q] += h;
          d[p] -= h;
          d[q] += h;
          A(p, q) = 0.0;
          // Only the upper triangle is kept current.
          for (std::size_t j = 0; j < p; ++j) rotate(A(j, p), A(j, q), s, tau);
          for (std::size_t j = p + 1; j < q; ++j) rotate(A(p, j), A(j, q), s, tau);
          for (std::size_t j = q + 1; j < n; ++j) rotate(A(p, j), A(q, j), s, tau);
          for (std::size_t j = 0; j < n; ++j) rotate(v(j, p), v(j, q), s, tau);
        }
      }
    }
    for (std::size_t p = 0; p < n; ++p) {
      b[p] += z[p];
      d[p] = b[p];
      z[p] = 0.0;
    }
  }
  if (!converged) throw EigFail("eig_sym: no convergence after " + std::to_string(kMaxEigSweeps) + " sweeps");

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return d[x] > d[y]; });
  EigDecomp out{std::vector<double>(n), Factor(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = d[idx[k]];
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, idx[k]);
  }
  return out;
}

SymMatrix reconstruct(const EigDecomp& e) {
  const std::size_t n = e.values.size();
  Factor scaled = e.vectors;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) scaled(i, k) *= e.values[k];
  std::vector<double> out(n * n);
  kernels::gemm_nt(scaled.data(), e.vectors.data(), out.data(), n, n, n);
  return SymMatrix(n, std::move(out));
}

Truncation truncated_approx(const SymMatrix& m, std::size_t r) {
  const std::size_t p = m.dim();
  if (r == 0 || r > p) throw ShapeError("truncated_approx: need 1 <= r <= p");
  const EigDecomp e = eig_sym(m);
  const double tol = 1e-8 * std::max(1.0, std::max(std::fabs(e.values.front()), std::fabs(e.values.back())));
  if (e.values.back() < -tol) throw NotPSD("truncated_approx: smallest eigenvalue below -tol_psd");
  Factor f(p, r);
  for (std::size_t k = 0; k < r; ++k) {
    const double s = std::sqrt(std::max(0.0, e.values[k]));
    for (std::size_t i = 0; i < p; ++i) f(i, k) = e.vectors(i, k) * s;
  }
  return {gram(f), std::move(f)};
}

SymMatrix proj_psd(const SymMatrix& m) {
  EigDecomp e = eig_sym(m);
  for (double& x : e.values) x = std::max(0.0, x);
  return reconstruct(e);
}

// ---- one-sided Jacobi SVD ----

Svd svd_thin(const Factor& in) {
  // Work on the wide case through the transpose so columns <= rows.
  if (in.cols() > in.rows()) {
    Svd t = svd_thin(in.transpose());
    return {std::move(t.v), std::move(t.sigma), std::move(t.u)};
  }
  const std::size_t m = in.rows(), n = in.cols();
  // Column-major copies make the column sweeps contiguous.
  std::vector<double> a(m * n), v(n * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) a[j * m + i] = in(i, j);
  for (std::size_t j = 0; j < n; ++j) v[j * n + j] = 1.0;

  const double eps = 1e-15;
  bool rotated = true;
  int sweep = 0;
  while (rotated) {
    if (++sweep > kMaxEigSweeps) throw EigFail("svd_thin: no convergence");
    rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double* ap = &a[p * m];
        double* aq = &a[q * m];
        const double alpha = kernels::dot(ap, ap, m);
        const double beta = kernels::dot(aq, aq, m);
        const double gamma = kernels::dot(ap, aq, m);
        if (gamma == 0.0 || std::fabs(gamma) <= eps * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double x = ap[i], y = aq[i];
          ap[i] = c * x - s * y;
          aq[i] = s * x + c * y;
        }
        double* vp = &v[p * n];
        double* vq = &v[q * n];
        for (std::size_t i = 0; i < n; ++i) {
          const double x = vp[i], y = vq[i];
          vp[i] = c * x - s * y;
          vq[i] = s * x + c * y;
        }
      }
    }
  }

  std::vector<double> sig(n);
  for (std::size_t j = 0; j < n; ++j) sig[j] = std::sqrt(kernels::dot(&a[j * m], &a[j * m], m));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return sig[x] > sig[y]; });

  Svd out{Factor(m, n), std::vector<double>(n), Factor(n, n)};
  const double cut = sig.empty() ? 0.0 : sig[idx[0]] * 1e-14 * static_cast<double>(m);
  std::vector<bool> filled(n, false);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = idx[k];
    out.sigma[k] = sig[j];
    for (std::size_t i = 0; i < n; ++i) out.v(i, k) = v[j * n + i];
    if (sig[j] > cut && sig[j] > 0.0) {
      for (std::size_t i = 0; i < m; ++i) out.u(i, k) = a[j * m + i] / sig[j];
      filled[k] = true;
    }
  }
  // Complete left vectors for (numerically) zero singular values by
  // Gram-Schmidt on the standard basis, so U always has orthonormal columns.
  std::size_t e = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (filled[k]) continue;
    while (e < m) {
      std::vector<double> w(m, 0.0);
      w[e++] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t c = 0; c < n; ++c) {
          if (!filled[c]) continue;
          double d = 0.0;
          for (std::size_t i = 0; i < m; ++i) d += out.u(i, c) * w[i];
          for (std::size_t i = 0; i < m; ++i) w[i] -= d * out.u(i, c);
        }
      }
      double nw = 0.0;
      for (double x : w) nw += x * x;
      nw = std::sqrt(nw);
      if (nw > 1e-8) {
        for (std::size_t i = 0; i < m; ++i) out.u(i, k) = w[i] / nw;
        filled[k] = true;
        break;
      }
    }
  }
  return out;
}

Factor procrustes_rotation(const Factor& u, const Factor& v) {
  if (u.rows() != v.rows() || u.cols() != v.cols()) throw ShapeError("procrustes: shape mismatch");
  // V^T U = W S Z^T  =>  R = W Z^T
  const Svd s = svd_thin(matmul_tn(v, u));
  return matmul(s.u, s.v.transpose());
}

double procrustes_dist(const Factor& u, const Factor& v) {
  const Factor r = procrustes_rotation(u, v);
  return frob_norm(u - matmul(v, r));
}

std::vector<double> singular_values(const SymMatrix& m) {
  std::vector<double> s = eig_sym(m).values;
  for (double& x : s) x = std::fabs(x);
  std::stable_sort(s.begin(), s.end(), std::greater<>());
  return s;
}

std::vector<double> singular_values(const Factor& a) { return svd_thin(a).sigma; }

Norms norms(const SymMatrix& m, std::optional<std::size_t> r) {
  Norms out{frob_norm(m), 0.0, std::nullopt};
  const std::vector<double> s = singular_values(m);
  out.spectral = s.front();
  if (r) {
    if (*r == 0 || *r > m.dim()) throw ShapeError("norms: r out of range");
    out.sigma_r = s[*r - 1];
  }
  return out;
}

Factor orthonormal_basis(const Factor& u) {
  const Svd s = svd_thin(u);
  const double smax = s.sigma.empty() ? 0.0 : s.sigma.front();
  const double cut = smax * 1e-12 * static_cast<double>(std::max(u.rows(), u.cols()));
  std::size_t rank = 0;
  while (rank < s.sigma.size() && s.sigma[rank] > cut && s.sigma[rank] > 0.0) ++rank;
  Factor q(u.rows(), rank);
  for (std::size_t i = 0; i < u.rows(); ++i)
    for (std::size_t k = 0; k < rank; ++k) q(i, k) = s.u(i, k);
  return q;
}

SymMatrix column_projector(const Factor& u) {
  const Factor q = orthonormal_basis(u);
  if (q.cols() == 0) return SymMatrix(u.rows());
  return gram(q);
}

}  // namespace fsdp
