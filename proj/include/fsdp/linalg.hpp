#pragma once
// Dense symmetric matrices, p x r factors, and the handful of decompositions
// the solvers and the theory module need. Everything is row-major double.

#include <cstddef>
#include <optional>
#include <vector>

namespace fsdp {

class Factor;

class SymMatrix {
 public:
  SymMatrix() = default;
  /// p x p zeros.
  explicit SymMatrix(std::size_t p);
  /// Takes a full p x p row-major array and stores (M + M^T)/2.
  SymMatrix(std::size_t p, std::vector<double> entries);
  static SymMatrix from_rows(const std::vector<std::vector<double>>& rows);
  static SymMatrix identity(std::size_t p);
  static SymMatrix diag(const std::vector<double>& d);

  std::size_t dim() const { return p_; }
  double operator()(std::size_t i, std::size_t j) const { return a_[i * p_ + j]; }
  /// Writes both (i,j) and (j,i).
  void set(std::size_t i, std::size_t j, double v) {
    a_[i * p_ + j] = v;
    a_[j * p_ + i] = v;
  }
  void add_to(std::size_t i, std::size_t j, double v) {
    a_[i * p_ + j] += v;
    if (i != j) a_[j * p_ + i] += v;
  }
  const double* data() const { return a_.data(); }
  const std::vector<double>& entries() const { return a_; }

  SymMatrix& operator+=(const SymMatrix& o);
  SymMatrix& operator-=(const SymMatrix& o);
  SymMatrix& operator*=(double s);
  /// this += alpha * o
  SymMatrix& axpy(double alpha, const SymMatrix& o);

  double trace() const;
  bool operator==(const SymMatrix& o) const { return p_ == o.p_ && a_ == o.a_; }

 private:
  std::size_t p_ = 0;
  std::vector<double> a_;
};

SymMatrix operator+(SymMatrix a, const SymMatrix& b);
SymMatrix operator-(SymMatrix a, const SymMatrix& b);
SymMatrix operator*(double s, SymMatrix a);

class Factor {
 public:
  Factor() = default;
  Factor(std::size_t rows, std::size_t cols);
  Factor(std::size_t rows, std::size_t cols, std::vector<double> entries);
  static Factor from_rows(const std::vector<std::vector<double>>& rows);
  static Factor identity(std::size_t p);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return a_.size(); }
  double operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
  const double* data() const { return a_.data(); }
  double* data() { return a_.data(); }
  const std::vector<double>& entries() const { return a_; }

  Factor& operator+=(const Factor& o);
  Factor& operator-=(const Factor& o);
  Factor& operator*=(double s);
  Factor& axpy(double alpha, const Factor& o);
  Factor transpose() const;

  bool operator==(const Factor& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && a_ == o.a_;
  }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> a_;
};

Factor operator+(Factor a, const Factor& b);
Factor operator-(Factor a, const Factor& b);
Factor operator*(double s, Factor a);

struct EigDecomp {
  std::vector<double> values;  // descending
  Factor vectors;              // p x p, columns are eigenvectors
};

struct Norms {
  double frobenius;
  double spectral;
  std::optional<double> sigma_r;
};

struct Svd {
  Factor u;                    // rows x k
  std::vector<double> sigma;   // descending, length k = min(rows, cols)
  Factor v;                    // cols x k
};

inline constexpr int kMaxEigSweeps = 100;

double tol_recon(const SymMatrix& m);
double tol_psd(const SymMatrix& m);
inline constexpr double kTolOrth = 1e-10;

/// U U^T
SymMatrix gram(const Factor& u);
/// M U
Factor mul(const SymMatrix& m, const Factor& u);
/// A B for general factors (A: p x k, B: k x r).
Factor matmul(const Factor& a, const Factor& b);
/// A^T B (A: k x p, B: k x r) -> p x r.
Factor matmul_tn(const Factor& a, const Factor& b);

double frob_dot(const SymMatrix& a, const SymMatrix& b);
double frob_dot(const Factor& a, const Factor& b);
double frob_norm(const SymMatrix& a);
double frob_norm(const Factor& a);
double max_abs(const Factor& a);
bool all_finite(const Factor& a);
bool all_finite(const SymMatrix& a);

EigDecomp eig_sym(const SymMatrix& m);
SymMatrix reconstruct(const EigDecomp& e);

struct Truncation {
  SymMatrix approx;
  Factor factor;
};
Truncation truncated_approx(const SymMatrix& m, std::size_t r);

SymMatrix proj_psd(const SymMatrix& m);

/// Thin SVD by one-sided Jacobi; intended for tall-skinny or small inputs.
Svd svd_thin(const Factor& a);

/// Orthogonal R minimizing ||U - V R||_F.
Factor procrustes_rotation(const Factor& u, const Factor& v);
double procrustes_dist(const Factor& u, const Factor& v);

/// Norms of a symmetric matrix; sigma_r is the r-th largest |eigenvalue|.
Norms norms(const SymMatrix& m, std::optional<std::size_t> r = std::nullopt);
std::vector<double> singular_values(const SymMatrix& m);
std::vector<double> singular_values(const Factor& a);

/// Orthonormal basis (p x rank) of the column space of U.
Factor orthonormal_basis(const Factor& u);
/// Orthogonal projector Q Q^T onto the column space of U.
SymMatrix column_projector(const Factor& u);

}  // namespace fsdp
