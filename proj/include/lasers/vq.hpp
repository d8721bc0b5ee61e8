#ifndef LASERS_VQ_HPP
#define LASERS_VQ_HPP

#include <lasers/common.hpp>
#include <lasers/dictionary.hpp>

namespace lasers {

// Embedding matrix plus the EMA bookkeeping for codeword updates. Counts
// start at one and sums at the codewords themselves so unused entries keep
// their sum/count ratio (and therefore their position) under decay.
struct Codebook {
  Dictionary embedding;  // E, K x L
  Vector ema_counts;     // N
  Matrix ema_sums;       // m
  double decay = 0.99;
  double epsilon = 1e-5;

  static Codebook from_dictionary(Dictionary d, double decay = 0.99, double epsilon = 1e-5);
  int k() const { return embedding.k; }
  int l() const { return embedding.l; }
};

struct Assignment {
  std::vector<int> indices;      // nearest codeword per column
  std::vector<double> distances;  // squared L2 to the chosen codeword
};

// Nearest codeword per column in squared L2, ties to the lowest index.
Assignment assign(const SignalMatrix& z, const Codebook& cb, int threads = 1);

// Column n = codeword indices[n]; equals one-hot(z) * E.
SignalMatrix one_hot_reconstruct(const Assignment& a, const Codebook& cb);

// The two latent-space terms of the quantization objective. Both are the
// mean squared entry difference; they differ only in which side the caller
// stop-gradients. weighted_total = codebook_term + beta * commitment_term.
struct VqLossTerms {
  double codebook_term = 0.0;
  double commitment_term = 0.0;
  double weighted_total = 0.0;
};

VqLossTerms vq_losses(const SignalMatrix& z, const SignalMatrix& zhat, double beta);

// EMA codeword update with Laplace-smoothed counts:
//   N_k <- decay N_k + (1-decay) n_k
//   m_k <- decay m_k + (1-decay) sum of assigned columns
//   e_k <- m_k / smoothed(N_k)
// Codewords whose count is (numerically) zero are left unchanged.
void ema_update(Codebook& cb, const SignalMatrix& z, const Assignment& a);

}  // namespace lasers

#endif
