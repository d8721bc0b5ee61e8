#include <lasers/dictionary.hpp>
#include <lasers/sparse_coding.hpp>

#include <cmath>

namespace lasers {

void Dictionary::normalize_rows() {
  for (int j = 0; j < k; ++j) {
    const double norm = atoms.row(j).norm();
    if (norm > 0.0) atoms.row(j) /= norm;
  }
}

Dictionary init_dictionary(int k, int l, InitStrategy strategy, std::uint64_t seed,
                           const SignalMatrix* data) {
  if (k < 1 || l < 1) throw ConfigError("init_dictionary: k and l must be >= 1");
  Dictionary d(k, l);
  Rng rng(seed);
  if (strategy == InitStrategy::GaussianNormalized) {
    for (int j = 0; j < k; ++j)
      for (int c = 0; c < l; ++c) d.atoms(j, c) = rng.normal();
  } else {
    if (!data || data->cols() < k)
      throw DataError("init_dictionary: DataSample needs at least k data columns");
    if (data->rows() != l) throw DimensionError("init_dictionary: data dim != l");
    // k distinct columns via a partial Fisher-Yates over the column indices.
    std::vector<std::int64_t> idx(std::size_t(data->cols()));
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = std::int64_t(i);
    for (int j = 0; j < k; ++j) {
      const std::uint64_t pick = j + rng.bounded(std::uint64_t(idx.size() - j));
      std::swap(idx[std::size_t(j)], idx[pick]);
      d.atoms.row(j) = data->col(idx[std::size_t(j)]).transpose();
    }
  }
  d.normalize_rows();
  return d;
}

Matrix dict_gradient(const Dictionary& d, const SignalMatrix& z, const SparseCode& code) {
  require(code.k == d.k, "dict_gradient: code and dictionary disagree on K");
  require(z.rows() == d.l, "dict_gradient: signal dim != atom dim");
  require(std::int64_t(code.columns.size()) == z.cols(),
          "dict_gradient: code and signal column counts differ");

  Matrix grad = Matrix::Zero(d.k, d.l);
  for (std::size_t n = 0; n < code.columns.size(); ++n) {
    const auto& col = code.columns[n];
    if (col.support.empty()) continue;
    Vector err = -z.col(std::int64_t(n));
    for (std::size_t t = 0; t < col.support.size(); ++t)
      err += col.coeffs[t] * d.atoms.row(col.support[t]).transpose();
    for (std::size_t t = 0; t < col.support.size(); ++t)
      grad.row(col.support[t]) += 2.0 * col.coeffs[t] * err.transpose();
  }
  return grad;
}

void adam_step(Matrix& param, const Matrix& grad, AdamState& state, const AdamParams& p) {
  require(param.rows() == grad.rows() && param.cols() == grad.cols(),
          "adam_step: parameter/gradient shape mismatch");
  if (state.m.size() == 0) state = AdamState::zeros(int(param.rows()), int(param.cols()));
  ++state.t;
  state.m = p.beta1 * state.m + (1.0 - p.beta1) * grad;
  state.v = p.beta2 * state.v + (1.0 - p.beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(p.beta1, double(state.t));
  const double bc2 = 1.0 - std::pow(p.beta2, double(state.t));
  param -=
      (p.lr / bc1) * state.m.cwiseQuotient(((state.v / bc2).cwiseSqrt().array() + p.epsilon).matrix());
}

void adam_step(Vector& param, const Vector& grad, AdamState& state, const AdamParams& params) {
  Matrix p = param;
  adam_step(p, Matrix(grad), state, params);
  param = p;
}

void apply_gradient_update(Dictionary& d, const Matrix& grad, AdamState& state,
                           const AdamParams& params) {
  adam_step(d.atoms, grad, state, params);
  d.normalize_rows();
}

double adaptive_beta(long t, long xi) {
  if (t < 1 || xi < 1) throw ConfigError("adaptive_beta: t and xi must be >= 1");
  const double theta = (t < xi) ? double(t) * double(xi) : double(xi) * double(xi) + double(t - xi);
  return (theta + 1.0 - double(xi)) / (theta + 1.0);
}

namespace {
constexpr double kUsageFloor = 1e-10;
}

int bcd_sweep(Dictionary& d, const Matrix& a, const Matrix& b, bool normalize_atoms) {
  require(a.rows() == d.k && a.cols() == d.k, "bcd_sweep: A must be K x K");
  require(b.rows() == d.l && b.cols() == d.k, "bcd_sweep: B must be L x K");
  int skipped = 0;
  for (int j = 0; j < d.k; ++j) {
    const double ajj = a(j, j);
    if (ajj < kUsageFloor) {
      ++skipped;
      continue;
    }
    Vector u = b.col(j) - d.atoms.transpose() * a.col(j) + ajj * d.atoms.row(j).transpose();
    u /= ajj;
    const double norm = u.norm();
    if (normalize_atoms && norm > 0.0) u /= norm;
    d.atoms.row(j) = u.transpose();
  }
  return skipped;
}

double bcd_surrogate(const Dictionary& d, const Matrix& a, const Matrix& b) {
  const Matrix gram = d.atoms * d.atoms.transpose();
  return (gram.cwiseProduct(a)).sum() - 2.0 * (d.atoms.transpose().cwiseProduct(b)).sum();
}

BcdReport online_bcd_update(OnlineDLState& state, Dictionary& d, const SignalMatrix& z,
                            const SparseCode& code) {
  require(state.a.rows() == d.k, "online_bcd_update: state dims do not match dictionary");
  require(state.b.rows() == d.l, "online_bcd_update: state dims do not match dictionary");
  if (state.xi < 1) state.xi = std::int64_t(z.cols());
  ++state.t;
  const double beta = adaptive_beta(state.t, state.xi);

  state.a *= beta;
  state.b *= beta;
  for (std::size_t n = 0; n < code.columns.size(); ++n) {
    const auto& col = code.columns[n];
    for (std::size_t t1 = 0; t1 < col.support.size(); ++t1) {
      for (std::size_t t2 = 0; t2 < col.support.size(); ++t2)
        state.a(col.support[t1], col.support[t2]) += col.coeffs[t1] * col.coeffs[t2];
      state.b.col(col.support[t1]) += col.coeffs[t1] * z.col(std::int64_t(n));
    }
  }

  BcdReport report;
  report.skipped_atoms = bcd_sweep(d, state.a, state.b, true);
  return report;
}

int reseed_dead_atoms(Dictionary& d, const std::vector<long>& usage_counts,
                      const SignalMatrix& data, long threshold, std::uint64_t seed) {
  require(int(usage_counts.size()) == d.k, "reseed_dead_atoms: usage size != K");
  require(data.rows() == d.l, "reseed_dead_atoms: data dim != atom dim");
  Rng rng(seed);
  int count = 0;
  for (int j = 0; j < d.k; ++j) {
    if (usage_counts[std::size_t(j)] >= threshold) continue;
    Vector col = data.col(std::int64_t(rng.bounded(std::uint64_t(data.cols()))));
    const double norm = col.norm();
    if (norm > 0.0) col /= norm;
    d.atoms.row(j) = col.transpose();
    ++count;
  }
  return count;
}

}  // namespace lasers
