#include <lasers/sparse_coding.hpp>

#include <algorithm>
#include <cmath>
#include <mutex>

namespace lasers {

GramState make_gram_state(const Dictionary& d, const SignalMatrix& signals) {
  require(signals.rows() == d.l, "make_gram_state: signal dim != atom dim");
  GramState g;
  g.gram.noalias() = d.atoms * d.atoms.transpose();
  g.alpha0.noalias() = d.atoms * signals;
  return g;
}

bool CholeskyFactor::try_extend(const Vector& g_col, double diag, double min_pivot) {
  if (size_ == 0) {
    if (diag <= min_pivot) return false;
    if (l_.rows() < 1) l_ = Matrix::Zero(8, 8);
    l_(0, 0) = std::sqrt(diag);
    size_ = 1;
    return true;
  }
  require(g_col.size() == size_, "try_extend: gram column size != factor size");
  const Vector w =
      l_.topLeftCorner(size_, size_).triangularView<Eigen::Lower>().solve(g_col);
  const double pivot = diag - w.squaredNorm();
  if (pivot <= min_pivot) return false;
  if (size_ + 1 > l_.rows()) {
    Matrix grown = Matrix::Zero(l_.rows() * 2, l_.rows() * 2);
    grown.topLeftCorner(l_.rows(), l_.cols()) = l_;
    l_.swap(grown);
  }
  l_.row(size_).head(size_) = w.transpose();
  l_(size_, size_) = std::sqrt(pivot);
  ++size_;
  return true;
}

Vector CholeskyFactor::solve_normal(const Vector& b) const {
  require(b.size() == size_, "solve_normal: rhs size != factor size");
  const auto lower = l_.topLeftCorner(size_, size_).triangularView<Eigen::Lower>();
  Vector y = lower.solve(b);
  lower.transpose().solveInPlace(y);
  return y;
}

CholeskyFactor extend_cholesky(const CholeskyFactor& f, const Vector& g_col, double diag) {
  CholeskyFactor out = f;
  if (!out.try_extend(g_col, diag))
    throw SingularSupportError("extend_cholesky: non-positive pivot, atom nearly dependent");
  return out;
}

namespace {

// argmax |values[j]| over j not yet selected, ties to the lowest index.
int best_unselected(const Vector& values, const std::vector<char>& selected) {
  int best = -1;
  double best_mag = -1.0;
  for (int j = 0; j < values.size(); ++j) {
    if (selected[j]) continue;
    const double mag = std::abs(values[j]);
    if (mag > best_mag) {
      best_mag = mag;
      best = j;
    }
  }
  return best;
}

constexpr double kResidualStop = 1e-12;

}  // namespace

OmpResult naive_omp(const Vector& y, const Dictionary& d, int s) {
  require(y.size() == d.l, "naive_omp: signal dim != atom dim");
  if (s < 1 || s > std::min(d.k, d.l))
    throw ConfigError("naive_omp: sparsity must satisfy 1 <= s <= min(K, L)");

  OmpResult r;
  Vector residual = y;
  std::vector<char> selected(std::size_t(d.k), 0);
  Matrix sub(0, d.l);  // selected atoms, one per row

  for (int it = 0; it < s; ++it) {
    if (residual.norm() < kResidualStop) break;
    const Vector corr = d.atoms * residual;
    const int j = best_unselected(corr, selected);
    if (j < 0) break;
    selected[std::size_t(j)] = 1;
    r.support.push_back(j);

    sub.conservativeResize(sub.rows() + 1, Eigen::NoChange);
    sub.row(sub.rows() - 1) = d.atoms.row(j);

    // Least squares on the full support through the normal equations.
    const Matrix gram = sub * sub.transpose();
    Eigen::LDLT<Matrix> ldlt(gram);
    if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array().abs() < 1e-13).any())
      throw SingularSupportError("naive_omp: support gram is singular");
    const Vector coeffs = ldlt.solve(sub * y);
    residual = y - sub.transpose() * coeffs;
    r.coeffs.assign(coeffs.data(), coeffs.data() + coeffs.size());
  }
  r.residual_norm = residual.norm();
  return r;
}

SparseCode::Column batch_omp_column(const Vector& alpha0, double signal_sq_norm,
                                    const Matrix& gram, int s, BatchOmpStats* stats,
                                    OmpTrace* trace) {
  const int k = int(gram.rows());
  SparseCode::Column col;
  Vector alpha = alpha0;
  std::vector<char> selected(std::size_t(k), 0);
  CholeskyFactor factor(std::min(s, k));
  Vector coeffs;
  double err_sq = signal_sq_norm;
  double delta_prev = 0.0;

  while (int(col.support.size()) < s) {
    if (err_sq < kResidualStop * kResidualStop) break;
    int j = best_unselected(alpha, selected);
    // Near-dependent atoms are skipped and the next-best candidate tried.
    while (j >= 0) {
      Vector g_col(col.support.size());
      for (std::size_t t = 0; t < col.support.size(); ++t)
        g_col[Eigen::Index(t)] = gram(col.support[t], j);
      if (factor.try_extend(g_col, gram(j, j))) break;
      selected[std::size_t(j)] = 1;  // unusable for this column
      if (stats) ++stats->skipped_atoms;
      j = best_unselected(alpha, selected);
    }
    if (j < 0) {
      if (stats) ++stats->truncated_columns;
      break;
    }
    selected[std::size_t(j)] = 1;
    col.support.push_back(j);

    Vector alpha0_sub(col.support.size());
    for (std::size_t t = 0; t < col.support.size(); ++t)
      alpha0_sub[Eigen::Index(t)] = alpha0[col.support[t]];
    coeffs = factor.solve_normal(alpha0_sub);

    if (trace) {
      trace->supports.push_back(col.support);
      trace->factors.push_back(factor.matrix());
    }

    // alpha = alpha0 - G_tau gamma_tau; the support entries of beta also
    // feed the residual-energy recurrence.
    Vector beta = Vector::Zero(k);
    for (std::size_t t = 0; t < col.support.size(); ++t)
      beta += gram.col(col.support[t]) * coeffs[Eigen::Index(t)];
    alpha = alpha0 - beta;

    double delta = 0.0;
    for (std::size_t t = 0; t < col.support.size(); ++t)
      delta += coeffs[Eigen::Index(t)] * beta[col.support[t]];
    err_sq = std::max(0.0, err_sq - delta + delta_prev);
    delta_prev = delta;
  }

  col.coeffs.assign(coeffs.data(), coeffs.data() + coeffs.size());
  col.coeffs.resize(col.support.size());
  return col;
}

SparseCode batch_omp(const SignalMatrix& signals, const Dictionary& d, int s, int threads,
                     BatchOmpStats* stats) {
  require(signals.rows() == d.l, "batch_omp: signal dim != atom dim");
  if (s < 1 || s > std::min(d.k, int(signals.rows())))
    throw ConfigError("batch_omp: sparsity must satisfy 1 <= s <= min(K, dim)");

  const GramState g = make_gram_state(d, signals);
  const std::int64_t n = signals.cols();
  SparseCode code;
  code.k = d.k;
  code.columns.resize(std::size_t(n));

  std::mutex merge_mutex;
  parallel_for(n, threads, [&](std::int64_t begin, std::int64_t end) {
    BatchOmpStats range_stats;
    BatchOmpStats* slot = stats ? &range_stats : nullptr;
    for (std::int64_t i = begin; i < end; ++i) {
      code.columns[std::size_t(i)] = batch_omp_column(
          g.alpha0.col(i), signals.col(i).squaredNorm(), g.gram, s, slot);
    }
    if (stats) {
      std::lock_guard<std::mutex> lock(merge_mutex);
      stats->skipped_atoms += range_stats.skipped_atoms;
      stats->truncated_columns += range_stats.truncated_columns;
    }
  });
  return code;
}

SignalMatrix reconstruct(const SparseCode& code, const Dictionary& d) {
  require(code.k == d.k, "reconstruct: code and dictionary disagree on K");
  SignalMatrix out = SignalMatrix::Zero(d.l, std::int64_t(code.columns.size()));
  for (std::size_t n = 0; n < code.columns.size(); ++n) {
    const auto& col = code.columns[n];
    for (std::size_t t = 0; t < col.support.size(); ++t)
      out.col(std::int64_t(n)) += col.coeffs[t] * d.atoms.row(col.support[t]).transpose();
  }
  return out;
}

}  // namespace lasers
