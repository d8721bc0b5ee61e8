#include <lasers/data_io.hpp>
#include <lasers/dictionary.hpp>
#include <lasers/sparse_coding.hpp>

#include <doctest.h>

#include <cmath>

#include "oracles.hpp"

using namespace lasers;

TEST_CASE("gaussian initialization yields unit rows, deterministic per seed") {
  const Dictionary a = init_dictionary(4, 4, InitStrategy::GaussianNormalized, 99);
  const Dictionary b = init_dictionary(4, 4, InitStrategy::GaussianNormalized, 99);
  const Dictionary c = init_dictionary(4, 4, InitStrategy::GaussianNormalized, 100);
  for (int j = 0; j < 4; ++j) CHECK(a.atoms.row(j).norm() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(a.atoms == b.atoms);
  CHECK(a.atoms != c.atoms);
}

TEST_CASE("data-sample initialization picks distinct normalized columns") {
  SignalMatrix data = Matrix::Identity(4, 4);  // orthonormal columns
  const Dictionary d = init_dictionary(4, 4, InitStrategy::DataSample, 7, &data);
  // Every atom is one of the basis vectors and all four appear once.
  std::vector<int> seen(4, 0);
  for (int j = 0; j < 4; ++j) {
    int hits = 0;
    for (int c = 0; c < 4; ++c) {
      if (std::abs(d.atoms(j, c) - 1.0) < 1e-12) {
        ++seen[std::size_t(c)];
        ++hits;
      } else {
        CHECK(std::abs(d.atoms(j, c)) < 1e-12);
      }
    }
    CHECK(hits == 1);
  }
  for (int c = 0; c < 4; ++c) CHECK(seen[std::size_t(c)] == 1);

  SignalMatrix small = Matrix::Identity(4, 2);
  CHECK_THROWS_AS(init_dictionary(4, 4, InitStrategy::DataSample, 7, &small), DataError);
  CHECK_THROWS_AS(init_dictionary(4, 4, InitStrategy::DataSample, 7, nullptr), DataError);
}

TEST_CASE("perfect reconstruction has zero dictionary gradient") {
  const Dictionary d = oracles::random_unit_dictionary(6, 4, 5);
  SparseCode code;
  code.k = 6;
  code.columns.push_back({{1, 3}, {0.5, -1.25}});
  const SignalMatrix z = reconstruct(code, d);
  CHECK(dict_gradient(d, z, code).norm() < 1e-14);
}

TEST_CASE("single-column single-atom gradient matches the closed form") {
  const Dictionary d = oracles::random_unit_dictionary(5, 3, 6);
  lasers::Rng rng(60);
  const Vector z = oracles::random_vector(3, rng);
  const double c = 0.8;
  SparseCode code;
  code.k = 5;
  code.columns.push_back({{2}, {c}});
  SignalMatrix zm(3, 1);
  zm.col(0) = z;
  const Matrix grad = dict_gradient(d, zm, code);
  const Vector expected = 2.0 * c * (c * d.atoms.row(2).transpose() - z);
  CHECK((grad.row(2).transpose() - expected).norm() < 1e-12);
  for (int j = 0; j < 5; ++j)
    if (j != 2) CHECK(grad.row(j).norm() == 0.0);
}

TEST_CASE("dictionary gradient matches central finite differences at every sparsity") {
  for (int s = 1; s <= 8; ++s) {
    Dictionary d = oracles::random_unit_dictionary(16, 12, 200 + std::uint64_t(s));
    lasers::Rng rng(300 + std::uint64_t(s));
    const SignalMatrix z = oracles::random_matrix(12, 6, rng);

    SparseCode code;
    code.k = 16;
    for (int n = 0; n < 6; ++n) {
      SparseCode::Column col;
      std::vector<int> pool(16);
      for (int j = 0; j < 16; ++j) pool[std::size_t(j)] = j;
      rng.shuffle(pool);
      for (int t = 0; t < s; ++t) {
        col.support.push_back(pool[std::size_t(t)]);
        col.coeffs.push_back(rng.normal());
      }
      code.columns.push_back(col);
    }

    const Matrix analytic = dict_gradient(d, z, code);
    const Matrix fd = oracles::finite_difference(d.atoms, [&] {
      return (z - reconstruct(code, d)).squaredNorm();
    });
    CHECK(oracles::relative_error(analytic, fd) < 1e-5);
  }
}

TEST_CASE("adam with zero gradient leaves unit atoms unchanged") {
  Dictionary d = oracles::random_unit_dictionary(4, 4, 8);
  const Matrix before = d.atoms;
  AdamState state = AdamState::zeros(4, 4);
  apply_gradient_update(d, Matrix::Zero(4, 4), state, AdamParams{});
  CHECK((d.atoms - before).norm() < 1e-15);
}

TEST_CASE("first adam step matches the scalar hand calculation") {
  // One parameter, gradient g: m = (1-b1) g, v = (1-b2) g^2, and after bias
  // correction the step is exactly -lr * g / (|g| + eps).
  Matrix param(1, 1);
  param << 2.0;
  Matrix grad(1, 1);
  grad << 0.7;
  AdamState state = AdamState::zeros(1, 1);
  AdamParams p;
  p.lr = 1e-3;
  adam_step(param, grad, state, p);
  const double expected = 2.0 - 1e-3 * 0.7 / (std::abs(0.7) + 1e-8);
  CHECK(param(0, 0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("repeated adam updates on a fixed batch drive reconstruction down") {
  const Dictionary truth = oracles::random_unit_dictionary(16, 8, 1010);
  PlantedModel model{truth, 2, 0.0, 0.5};
  auto [ds, ignored] = generate_planted(model, 48, 2020);

  Dictionary d = init_dictionary(16, 8, InitStrategy::DataSample, 3030, &ds.samples);
  AdamState state = AdamState::zeros(16, 8);
  AdamParams params;
  params.lr = 1e-3;

  int improved = 0;
  double prev = std::numeric_limits<double>::infinity();
  const int steps = 500;
  for (int step = 0; step < steps; ++step) {
    const SparseCode code = batch_omp(ds.samples, d, 2);
    const double err = (ds.samples - reconstruct(code, d)).squaredNorm();
    if (err < prev) ++improved;
    prev = err;
    Matrix grad = dict_gradient(d, ds.samples, code);
    apply_gradient_update(d, grad, state, params);
  }
  CHECK(double(improved) / double(steps) >= 0.95);
}

TEST_CASE("adaptive forgetting factor follows its schedule") {
  CHECK(adaptive_beta(1, 4) == doctest::Approx(0.2).epsilon(1e-12));       // theta = 4
  CHECK(adaptive_beta(4, 4) == doctest::Approx(13.0 / 17.0).epsilon(1e-12));  // theta = 16
  double prev = 0.0;
  for (long t = 1; t <= 4000; t *= 2) {
    const double beta = adaptive_beta(t, 8);
    CHECK(beta > 0.0);
    CHECK(beta <= 1.0);
    CHECK(beta >= prev);
    prev = beta;
  }
  CHECK(adaptive_beta(1000000, 8) > 0.999);
}

TEST_CASE("single-atom block update lands on the normalized target") {
  Dictionary d(1, 3);
  d.atoms << 1, 0, 0;
  Matrix a(1, 1);
  a << 2.0;
  Matrix b(3, 1);
  b << 0.0, 3.0, 4.0;
  bcd_sweep(d, a, b, true);
  Vector expected(3);
  expected << 0.0, 0.6, 0.8;  // b / ||b||
  CHECK((d.atoms.row(0).transpose() - expected).norm() < 1e-12);
}

TEST_CASE("identity accumulators are a fixed point of the block update") {
  Dictionary d = oracles::random_unit_dictionary(5, 4, 21);
  const Matrix before = d.atoms;
  const Matrix a = Matrix::Identity(5, 5);
  const Matrix b = before.transpose();  // L x K with columns = old atoms
  bcd_sweep(d, a, b, true);
  CHECK((d.atoms - before).norm() < 1e-12);
}

TEST_CASE("unused atoms are skipped by the block update") {
  Dictionary d = oracles::random_unit_dictionary(3, 3, 22);
  const Matrix before = d.atoms;
  Matrix a = Matrix::Zero(3, 3);
  a(1, 1) = 1.0;  // only atom 1 has mass
  Matrix b = Matrix::Zero(3, 3);
  b.col(1) << 1, 1, 1;
  const int skipped = bcd_sweep(d, a, b, true);
  CHECK(skipped == 2);
  CHECK((d.atoms.row(0) - before.row(0)).norm() == 0.0);
  CHECK((d.atoms.row(2) - before.row(2)).norm() == 0.0);
}

TEST_CASE("the un-normalized block sweep never increases the surrogate") {
  for (int trial = 0; trial < 30; ++trial) {
    Dictionary d = oracles::random_unit_dictionary(10, 6, 700 + std::uint64_t(trial));
    lasers::Rng rng(800 + std::uint64_t(trial));
    const SignalMatrix z = oracles::random_matrix(6, 24, rng);
    const SparseCode code = batch_omp(z, d, 3);
    // Accumulators straight from one batch of codes.
    Matrix a = Matrix::Zero(10, 10);
    Matrix b = Matrix::Zero(6, 10);
    for (std::size_t n = 0; n < code.columns.size(); ++n) {
      const auto& col = code.columns[n];
      for (std::size_t t1 = 0; t1 < col.support.size(); ++t1) {
        for (std::size_t t2 = 0; t2 < col.support.size(); ++t2)
          a(col.support[t1], col.support[t2]) += col.coeffs[t1] * col.coeffs[t2];
        b.col(col.support[t1]) += col.coeffs[t1] * z.col(std::int64_t(n));
      }
    }
    const double before = bcd_surrogate(d, a, b);
    bcd_sweep(d, a, b, false);
    const double after = bcd_surrogate(d, a, b);
    CHECK(after <= before + 1e-9 * std::abs(before));
  }
}

TEST_CASE("online update keeps atoms unit norm and reports skips") {
  Dictionary d = oracles::random_unit_dictionary(8, 5, 31);
  OnlineDLState state = OnlineDLState::init(8, 5, 0);
  lasers::Rng rng(32);
  for (int step = 0; step < 5; ++step) {
    const SignalMatrix z = oracles::random_matrix(5, 12, rng);
    const SparseCode code = batch_omp(z, d, 2);
    online_bcd_update(state, d, z, code);
    for (int j = 0; j < d.k; ++j) {
      const double norm = d.atoms.row(j).norm();
      if (state.a(j, j) >= 1e-10) CHECK(norm == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
  CHECK(state.t == 5);
  CHECK(state.xi == 12);
}

TEST_CASE("dead atom reseeding replaces exactly the unused atoms") {
  Dictionary d = oracles::random_unit_dictionary(4, 3, 41);
  const Matrix before = d.atoms;
  lasers::Rng rng(42);
  const SignalMatrix data = oracles::random_matrix(3, 10, rng);

  std::vector<long> healthy{5, 5, 5, 5};
  CHECK(reseed_dead_atoms(d, healthy, data, 1, 43) == 0);
  CHECK((d.atoms - before).norm() == 0.0);

  std::vector<long> one_dead{5, 0, 5, 5};
  Dictionary d1 = d, d2 = d;
  CHECK(reseed_dead_atoms(d1, one_dead, data, 1, 44) == 1);
  CHECK(d1.atoms.row(1).norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((d1.atoms.row(0) - before.row(0)).norm() == 0.0);
  reseed_dead_atoms(d2, one_dead, data, 1, 44);
  CHECK(d1.atoms == d2.atoms);  // deterministic per seed
}
