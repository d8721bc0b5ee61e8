#include <lasers/data_io.hpp>
#include <lasers/sparse_coding.hpp>

#include <doctest.h>

#include <cmath>

#include "oracles.hpp"

using namespace lasers;

namespace {

Dictionary two_atom_basis() {
  Dictionary d(2, 2);
  d.atoms << 1, 0, 0, 1;
  return d;
}

}  // namespace

TEST_CASE("naive pursuit on an orthonormal pair picks the active atom") {
  const Dictionary d = two_atom_basis();
  Vector y(2);
  y << 3, 0;
  const OmpResult r = naive_omp(y, d, 1);
  REQUIRE(r.support == std::vector<int>{0});
  CHECK(r.coeffs[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(r.residual_norm == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("full-sparsity pursuit over an orthonormal basis is exact") {
  lasers::Rng rng(1);
  const int l = 6;
  // Householder reflector gives an exactly orthonormal atom set.
  Vector v = oracles::random_vector(l, rng);
  v.normalize();
  Matrix q = Matrix::Identity(l, l) - 2.0 * v * v.transpose();
  Dictionary d(l, l);
  d.atoms = q;
  for (int trial = 0; trial < 10; ++trial) {
    const Vector y = oracles::random_vector(l, rng);
    const OmpResult r = naive_omp(y, d, l);
    CHECK(r.residual_norm < 1e-12);
  }
}

TEST_CASE("greedy residual never beats the exhaustive best subset") {
  lasers::Rng rng(02);
  for (int trial = 0; trial < 50; ++trial) {
    const Dictionary d = oracles::random_unit_dictionary(8, 4, 100 + std::uint64_t(trial));
    const Vector y = oracles::random_vector(4, rng);
    const OmpResult r = naive_omp(y, d, 2);
    const double best = oracles::best_subset_residual(y, d, 2);
    CHECK(r.residual_norm >= best - 1e-10);
  }
}

TEST_CASE("batch pursuit equals the reference pursuit column by column") {
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int s = 1 + trial % 8;
    const Dictionary d = oracles::random_unit_dictionary(64, 32, 500 + std::uint64_t(trial));
    lasers::Rng rng(900 + std::uint64_t(trial));
    const Vector y = oracles::random_vector(32, rng);
    const OmpResult ref = naive_omp(y, d, s);

    SignalMatrix batch(32, 1);
    batch.col(0) = y;
    const SparseCode code = batch_omp(batch, d, s);
    const auto& col = code.columns[0];
    REQUIRE(col.support == ref.support);
    REQUIRE(col.coeffs.size() == ref.coeffs.size());
    for (std::size_t t = 0; t < col.coeffs.size(); ++t)
      CHECK(std::abs(col.coeffs[t] - ref.coeffs[t]) < 1e-8);
    ++checked;
  }
  CHECK(checked == 200);
}

TEST_CASE("orthonormal gram keeps the factor at the identity") {
  const int l = 5;
  Dictionary d(l, l);
  d.atoms = Matrix::Identity(l, l);
  lasers::Rng rng(8);
  const Vector y = oracles::random_vector(l, rng);
  OmpTrace trace;
  const GramState g = make_gram_state(d, y);
  batch_omp_column(g.alpha0.col(0), y.squaredNorm(), g.gram, l, nullptr, &trace);
  for (const Matrix& factor : trace.factors)
    CHECK((factor - Matrix::Identity(factor.rows(), factor.cols())).norm() < 1e-14);
}

TEST_CASE("two correlated atoms produce the closed-form factor") {
  const double rho = 0.6;
  Dictionary d(2, 2);
  d.atoms << 1, 0, rho, std::sqrt(1 - rho * rho);
  Vector y(2);
  y << 1.0, 0.1;  // atom 0 wins the first pick, atom 1 the second
  OmpTrace trace;
  const GramState g = make_gram_state(d, y);
  batch_omp_column(g.alpha0.col(0), y.squaredNorm(), g.gram, 2, nullptr, &trace);
  REQUIRE(trace.factors.size() == 2);
  const Matrix& factor = trace.factors[1];
  CHECK(factor(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(factor(1, 0) == doctest::Approx(rho).epsilon(1e-12));
  CHECK(factor(1, 1) == doctest::Approx(std::sqrt(1 - rho * rho)).epsilon(1e-12));
}

TEST_CASE("factor extension matches a dense Cholesky") {
  lasers::Rng rng(17);
  const int n = 8;
  const Matrix base = oracles::random_matrix(n, n, rng);
  const Matrix gram = base * base.transpose() + 0.5 * Matrix::Identity(n, n);

  CholeskyFactor f;
  for (int j = 0; j < n; ++j) {
    Vector g_col(j);
    for (int t = 0; t < j; ++t) g_col[t] = gram(t, j);
    f = extend_cholesky(f, g_col, gram(j, j));
  }
  const Matrix l = f.matrix();
  CHECK((l * l.transpose() - gram).norm() < 1e-10);
}

TEST_CASE("empty factor extends to the unit root") {
  CholeskyFactor f;
  f = extend_cholesky(f, Vector(0), 1.0);
  REQUIRE(f.size() == 1);
  CHECK(f.matrix()(0, 0) == 1.0);
}

TEST_CASE("near-dependent extension reports failure") {
  CholeskyFactor f;
  REQUIRE(f.try_extend(Vector(0), 1.0));
  Vector g_col(1);
  g_col << 1.0;  // second atom identical to the first
  CHECK_FALSE(f.try_extend(g_col, 1.0));
  CHECK(f.size() == 1);
  CHECK_THROWS_AS(extend_cholesky(f, g_col, 1.0), SingularSupportError);
}

TEST_CASE("near-dependent atoms are skipped instead of breaking the factor") {
  // Atom 1 is an epsilon-rotation of atom 0: after atom 0 enters the support
  // its correlation is tiny but nonzero, it wins the second argmax, and the
  // pivot 1 - |w|^2 underflows the tolerance.
  Dictionary d(3, 3);
  d.atoms << 1, 0, 0,
             1, 1e-8, 0,
             0, 0, 1;
  d.normalize_rows();
  SignalMatrix y(3, 1);
  y << 1.0, -1e-3, 1e-13;
  BatchOmpStats stats;
  const SparseCode code = batch_omp(y, d, 2, 1, &stats);
  const auto& col = code.columns[0];
  REQUIRE(col.support.size() == 2);
  CHECK(col.support[0] == 0);
  CHECK(col.support[1] == 2);
  CHECK(stats.skipped_atoms == 1);
  CHECK(stats.truncated_columns == 0);
}

TEST_CASE("columns out of usable atoms are truncated") {
  Dictionary d(2, 2);
  d.atoms << 1, 0,
             1, 1e-8;
  d.normalize_rows();
  SignalMatrix y(2, 1);
  y << 1.0, -1e-3;
  BatchOmpStats stats;
  const SparseCode code = batch_omp(y, d, 2, 1, &stats);
  CHECK(code.columns[0].support == std::vector<int>{0});
  CHECK(stats.skipped_atoms == 1);
  CHECK(stats.truncated_columns == 1);
}

TEST_CASE("reconstruction matches the dense code-times-dictionary product") {
  lasers::Rng rng(23);
  const Dictionary d = oracles::random_unit_dictionary(10, 6, 77);
  SparseCode code;
  code.k = 10;
  Matrix dense = Matrix::Zero(5, 10);  // n x K coefficient matrix
  for (int n = 0; n < 5; ++n) {
    SparseCode::Column col;
    std::vector<int> pool{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    rng.shuffle(pool);
    for (int t = 0; t < 3; ++t) {
      col.support.push_back(pool[std::size_t(t)]);
      col.coeffs.push_back(rng.normal());
      dense(n, pool[std::size_t(t)]) = col.coeffs.back();
    }
    code.columns.push_back(col);
  }
  const SignalMatrix out = reconstruct(code, d);
  const Matrix expected = (dense * d.atoms).transpose();
  CHECK((out - expected).norm() < 1e-12);

  SparseCode empty;
  empty.k = 10;
  empty.columns.resize(2);
  CHECK(reconstruct(empty, d).norm() == 0.0);
}

TEST_CASE("single-atom reconstruction scales that atom") {
  const Dictionary d = oracles::random_unit_dictionary(4, 3, 5);
  SparseCode code;
  code.k = 4;
  code.columns.push_back({{2}, {1.5}});
  const SignalMatrix out = reconstruct(code, d);
  CHECK((out.col(0) - 1.5 * d.atoms.row(2).transpose()).norm() < 1e-15);
}

TEST_CASE("residual norms are non-increasing and end orthogonal to the support") {
  for (int trial = 0; trial < 25; ++trial) {
    const Dictionary d = oracles::random_unit_dictionary(16, 8, 300 + std::uint64_t(trial));
    lasers::Rng rng(400 + std::uint64_t(trial));
    const Vector y = oracles::random_vector(8, rng);
    const OmpResult r = naive_omp(y, d, 4);

    double prev = y.norm();
    for (std::size_t len = 1; len <= r.support.size(); ++len) {
      const std::vector<int> prefix(r.support.begin(), r.support.begin() + std::ptrdiff_t(len));
      const double res = oracles::support_residual(y, d, prefix);
      CHECK(res <= prev + 1e-10);
      prev = res;
    }

    Matrix sub(r.support.size(), d.l);
    Vector coeffs(r.support.size());
    for (std::size_t t = 0; t < r.support.size(); ++t) {
      sub.row(Eigen::Index(t)) = d.atoms.row(r.support[t]);
      coeffs[Eigen::Index(t)] = r.coeffs[t];
    }
    const Vector residual = y - sub.transpose() * coeffs;
    CHECK((sub * residual).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("planted supports are recovered on noiseless data") {
  const Dictionary truth = oracles::random_unit_dictionary(64, 32, 1234);
  PlantedModel model{truth, 3, 0.0, 0.5};
  auto [ds, code] = generate_planted(model, 300, 4321);
  const SparseCode recovered = batch_omp(ds.samples, truth, 3);
  int exact = 0;
  for (std::size_t n = 0; n < code.columns.size(); ++n) {
    std::vector<int> want = code.columns[n].support;
    std::vector<int> got = recovered.columns[n].support;
    std::sort(want.begin(), want.end());
    std::sort(got.begin(), got.end());
    if (want == got) ++exact;
  }
  CHECK(double(exact) / double(code.columns.size()) >= 0.95);
}

TEST_CASE("gram state is symmetric with a unit diagonal for unit atoms") {
  const Dictionary d = oracles::random_unit_dictionary(20, 10, 71);
  lasers::Rng rng(72);
  const SignalMatrix signals = oracles::random_matrix(10, 7, rng);
  const GramState g = make_gram_state(d, signals);
  CHECK((g.gram - g.gram.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  for (int j = 0; j < 20; ++j) CHECK(std::abs(g.gram(j, j) - 1.0) < 1e-9);
  CHECK(g.alpha0.rows() == 20);
  CHECK(g.alpha0.cols() == 7);
  CHECK((g.alpha0.col(3) - d.atoms * signals.col(3)).norm() < 1e-14);
}

TEST_CASE("the reference pursuit raises on a singular support") {
  // The near-duplicate atom carries the only remaining correlation, so the
  // reference pursuit selects it and the support gram goes singular. The
  // batch variant skips the same atom instead (tested above).
  Dictionary d(3, 3);
  d.atoms << 1, 0, 0,
             1, 1e-8, 0,
             0, 0, 1;
  d.normalize_rows();
  Vector y(3);
  y << 1.0, -1e-3, 1e-13;
  CHECK_THROWS_AS(naive_omp(y, d, 2), SingularSupportError);
}

TEST_CASE("batch coding is identical across thread counts") {
  const Dictionary d = oracles::random_unit_dictionary(32, 16, 9);
  lasers::Rng rng(10);
  const SignalMatrix signals = oracles::random_matrix(16, 64, rng);
  const SparseCode seq = batch_omp(signals, d, 4, 1);
  const SparseCode par = batch_omp(signals, d, 4, 4);
  REQUIRE(seq.columns.size() == par.columns.size());
  for (std::size_t n = 0; n < seq.columns.size(); ++n) {
    CHECK(seq.columns[n].support == par.columns[n].support);
    CHECK(seq.columns[n].coeffs == par.columns[n].coeffs);
  }
}
