#ifndef LASERS_SPARSE_CODING_HPP
#define LASERS_SPARSE_CODING_HPP

#include <lasers/common.hpp>
#include <lasers/dictionary.hpp>

#include <functional>
#include <optional>

namespace lasers {

// Sparse codes stored as (support, coefficients) per column, support kept in
// greedy selection order.
struct SparseCode {
  struct Column {
    std::vector<int> support;
    std::vector<double> coeffs;
  };
  int k = 0;
  std::vector<Column> columns;
};

// Precomputed correlations shared by every column of a coding batch:
// gram(i, j) = <atom_i, atom_j>, alpha0.col(n) = correlations of signal n
// with every atom.
struct GramState {
  Matrix gram;
  Matrix alpha0;
};

GramState make_gram_state(const Dictionary& d, const SignalMatrix& signals);

// Lower-triangular Cholesky factor of the gram matrix restricted to the
// current support, grown one row per pursuit iteration.
class CholeskyFactor {
 public:
  CholeskyFactor() = default;
  explicit CholeskyFactor(int capacity) : l_(Matrix::Zero(capacity, capacity)) {}

  int size() const { return size_; }

  // Appends one row for an atom whose gram column against the current
  // support is g_col and whose self-correlation is diag. Returns false when
  // the new pivot diag - |w|^2 falls below min_pivot (atom nearly inside the
  // span of the support); the factor is left unchanged in that case.
  bool try_extend(const Vector& g_col, double diag, double min_pivot = 1e-12);

  // Solves (L L^T) x = b on the current support.
  Vector solve_normal(const Vector& b) const;

  // Dense copy of the current factor, size() x size().
  Matrix matrix() const { return l_.topLeftCorner(size_, size_); }

 private:
  Matrix l_;
  int size_ = 0;
};

// try_extend that throws SingularSupportError instead of reporting failure.
CholeskyFactor extend_cholesky(const CholeskyFactor& f, const Vector& g_col, double diag);

struct OmpResult {
  std::vector<int> support;  // selection order
  std::vector<double> coeffs;
  double residual_norm = 0.0;
};

// Reference pursuit: explicit residual, least-squares re-solve on the full
// support each iteration. Ties in the correlation argmax break to the lowest
// atom index; stops early once the residual norm drops below 1e-12.
OmpResult naive_omp(const Vector& y, const Dictionary& d, int s);

struct BatchOmpStats {
  long skipped_atoms = 0;      // near-dependent atoms passed over
  long truncated_columns = 0;  // columns that ran out of usable atoms
};

// Per-iteration trace hook used by the factorization audit tests.
struct OmpTrace {
  std::vector<std::vector<int>> supports;
  std::vector<Matrix> factors;
};

// Batch-OMP: Gram matrix and initial correlations computed once, residual
// correlations updated through alpha = alpha0 - G_tau gamma_tau, normal
// equations solved with a progressively extended Cholesky factor.
// Matches naive_omp column-for-column: same supports, same selection order,
// coefficients within 1e-8.
//
// R. Rubinstein, M. Zibulevsky, M. Elad, "Efficient implementation of the
// K-SVD algorithm using batch orthogonal matching pursuit", 2008.
SparseCode batch_omp(const SignalMatrix& signals, const Dictionary& d, int s, int threads = 1,
                     BatchOmpStats* stats = nullptr);

// Single-column kernel; exposed for the equivalence and factor audits.
SparseCode::Column batch_omp_column(const Vector& alpha0, double signal_sq_norm,
                                    const Matrix& gram, int s, BatchOmpStats* stats = nullptr,
                                    OmpTrace* trace = nullptr);

// zhat column n = sum_t coeffs[t] * atom(support[t]).
SignalMatrix reconstruct(const SparseCode& code, const Dictionary& d);

}  // namespace lasers

#endif
