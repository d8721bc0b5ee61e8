#ifndef LASERS_DICTIONARY_HPP
#define LASERS_DICTIONARY_HPP

#include <lasers/common.hpp>

namespace lasers {

struct SparseCode;

// K x L atom matrix, one atom per row. Doubles as the VQ embedding matrix;
// the dictionary-learning update rules keep rows unit-norm, the VQ EMA rule
// does not.
struct Dictionary {
  int k = 0;
  int l = 0;
  Matrix atoms;  // K x L

  Dictionary() = default;
  Dictionary(int k_, int l_) : k(k_), l(l_), atoms(Matrix::Zero(k_, l_)) {}

  Vector atom(int j) const { return atoms.row(j).transpose(); }
  void normalize_rows();
};

enum class InitStrategy { GaussianNormalized, DataSample };

// GaussianNormalized: i.i.d. standard normal rows, normalized.
// DataSample: k distinct signal columns, normalized. Deterministic per seed.
Dictionary init_dictionary(int k, int l, InitStrategy strategy, std::uint64_t seed,
                           const SignalMatrix* data = nullptr);

// Gradient of sum_n ||z_n - sum_t gamma_tn atom_t||^2 with respect to the
// atom matrix, at fixed codes: 2 gamma^T (gamma D - Z), assembled sparsely.
Matrix dict_gradient(const Dictionary& d, const SignalMatrix& z, const SparseCode& code);

struct AdamState {
  Matrix m;
  Matrix v;
  long t = 0;

  static AdamState zeros(int rows, int cols) {
    return AdamState{Matrix::Zero(rows, cols), Matrix::Zero(rows, cols), 0};
  }
};

struct AdamParams {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// One Adam step on the atom matrix followed by row renormalization.
void apply_gradient_update(Dictionary& d, const Matrix& grad, AdamState& state,
                           const AdamParams& params);

// Generic Adam step, shared with the coder parameter updates.
void adam_step(Matrix& param, const Matrix& grad, AdamState& state, const AdamParams& params);
void adam_step(Vector& param, const Vector& grad, AdamState& state, const AdamParams& params);

// Forgetting factor for the online accumulators: beta = (theta + 1 - xi) / (theta + 1)
// with theta = t*xi for t < xi and xi^2 + t - xi afterwards. Always in (0, 1].
double adaptive_beta(long t, long xi);

// Accumulators for learning-rate-free online dictionary learning:
// a = moving average of gamma gamma^T (K x K), b = moving average of
// Z gamma^T (L x K).
struct OnlineDLState {
  Matrix a;
  Matrix b;
  long t = 0;
  long xi = 0;

  static OnlineDLState init(int k, int l, long xi) {
    return OnlineDLState{Matrix::Zero(k, k), Matrix::Zero(l, k), 0, xi};
  }
};

// One block-coordinate sweep over all atoms:
//   d_j <- (1/a_jj)(b_col_j - D^T a_col_j + a_jj d_j), then renormalized.
// Atoms with a_jj below 1e-10 are left untouched. Returns skipped count.
int bcd_sweep(Dictionary& d, const Matrix& a, const Matrix& b, bool normalize_atoms);

// Surrogate objective tr(D D^T A) - 2 tr(D B) in the row-atom convention;
// one un-normalized BCD sweep never increases it.
double bcd_surrogate(const Dictionary& d, const Matrix& a, const Matrix& b);

struct BcdReport {
  int skipped_atoms = 0;
};

// Advances the accumulators with the adaptive forgetting factor, then runs
// one normalized BCD sweep.
BcdReport online_bcd_update(OnlineDLState& state, Dictionary& d, const SignalMatrix& z,
                            const SparseCode& code);

// Replaces atoms whose usage fell below threshold with random data columns
// (normalized). Deterministic per seed. Returns number reseeded.
int reseed_dead_atoms(Dictionary& d, const std::vector<long>& usage_counts,
                      const SignalMatrix& data, long threshold, std::uint64_t seed);

}  // namespace lasers

#endif
