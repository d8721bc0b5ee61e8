#include <lasers/vq.hpp>

namespace lasers {

Codebook Codebook::from_dictionary(Dictionary d, double decay, double epsilon) {
  if (decay < 0.0 || decay >= 1.0) throw ConfigError("Codebook: decay must be in [0, 1)");
  Codebook cb;
  cb.ema_counts = Vector::Ones(d.k);
  cb.ema_sums = d.atoms;
  cb.embedding = std::move(d);
  cb.decay = decay;
  cb.epsilon = epsilon;
  return cb;
}

Assignment assign(const SignalMatrix& z, const Codebook& cb, int threads) {
  require(z.rows() == cb.l(), "assign: signal dim != codeword dim");
  const std::int64_t n = z.cols();
  Assignment a;
  a.indices.resize(std::size_t(n));
  a.distances.resize(std::size_t(n));
  // ||z - e||^2 = ||z||^2 - 2 <z, e> + ||e||^2, scanned per column so the
  // result is the exact minimum and ties break to the lowest index.
  const Vector e_sq = cb.embedding.atoms.rowwise().squaredNorm();
  parallel_for(n, threads, [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t i = begin; i < end; ++i) {
      const Vector corr = cb.embedding.atoms * z.col(i);
      const double z_sq = z.col(i).squaredNorm();
      int best = 0;
      double best_dist = z_sq - 2.0 * corr[0] + e_sq[0];
      for (int j = 1; j < cb.k(); ++j) {
        const double dist = z_sq - 2.0 * corr[j] + e_sq[j];
        if (dist < best_dist) {
          best_dist = dist;
          best = j;
        }
      }
      a.indices[std::size_t(i)] = best;
      a.distances[std::size_t(i)] = std::max(0.0, best_dist);
    }
  });
  return a;
}

SignalMatrix one_hot_reconstruct(const Assignment& a, const Codebook& cb) {
  SignalMatrix out(cb.l(), std::int64_t(a.indices.size()));
  for (std::size_t i = 0; i < a.indices.size(); ++i) {
    const int j = a.indices[i];
    require(j >= 0 && j < cb.k(), "one_hot_reconstruct: index out of range");
    out.col(std::int64_t(i)) = cb.embedding.atoms.row(j).transpose();
  }
  return out;
}

VqLossTerms vq_losses(const SignalMatrix& z, const SignalMatrix& zhat, double beta) {
  require(z.rows() == zhat.rows() && z.cols() == zhat.cols(), "vq_losses: shape mismatch");
  if (beta < 0.0) throw ConfigError("vq_losses: beta must be >= 0");
  const double msd = (z - zhat).squaredNorm() / double(z.size());
  return VqLossTerms{msd, msd, msd + beta * msd};
}

void ema_update(Codebook& cb, const SignalMatrix& z, const Assignment& a) {
  require(z.rows() == cb.l(), "ema_update: signal dim != codeword dim");
  require(std::int64_t(a.indices.size()) == z.cols(), "ema_update: assignment size mismatch");
  const int k = cb.k();
  Vector batch_counts = Vector::Zero(k);
  Matrix batch_sums = Matrix::Zero(k, cb.l());
  for (std::size_t i = 0; i < a.indices.size(); ++i) {
    batch_counts[a.indices[i]] += 1.0;
    batch_sums.row(a.indices[i]) += z.col(std::int64_t(i)).transpose();
  }
  cb.ema_counts = cb.decay * cb.ema_counts + (1.0 - cb.decay) * batch_counts;
  cb.ema_sums = cb.decay * cb.ema_sums + (1.0 - cb.decay) * batch_sums;

  const double total = cb.ema_counts.sum();
  if (total <= 0.0) return;
  for (int j = 0; j < k; ++j) {
    if (cb.ema_counts[j] <= 1e-12) continue;  // never assigned: stay put
    const double smoothed =
        (cb.ema_counts[j] + cb.epsilon) / (total + k * cb.epsilon) * total;
    cb.embedding.atoms.row(j) = cb.ema_sums.row(j) / smoothed;
  }
}

}  // namespace lasers
