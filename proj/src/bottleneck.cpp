#include <lasers/bottleneck.hpp>
#include <lasers/metrics.hpp>

#include <iostream>

namespace lasers {

Bottleneck Bottleneck::identity() { return Bottleneck{}; }

Bottleneck Bottleneck::vq(Codebook cb) {
  Bottleneck b;
  b.kind = BottleneckKind::VQ;
  b.codebook = std::move(cb);
  return b;
}

Bottleneck Bottleneck::dl(Dictionary d, int sparsity, PatchGeometry geometry) {
  Bottleneck b;
  b.kind = BottleneckKind::DL;
  b.dictionary = std::move(d);
  b.sparsity = sparsity;
  b.geometry = geometry;
  const int dim = geometry.signal_dim(b.dictionary.l);
  if (dim > b.dictionary.k)
    std::cerr << "warning: coding unit dim " << dim << " exceeds atom count "
              << b.dictionary.k << "; the sparse problem is undercomplete\n";
  return b;
}

int Bottleneck::k() const {
  switch (kind) {
    case BottleneckKind::VQ: return codebook.k();
    case BottleneckKind::DL: return dictionary.k;
    default: return 0;
  }
}

BottleneckOutput Bottleneck::forward(const LatentTensor& z_e) const {
  BottleneckOutput out;
  if (kind == BottleneckKind::Identity) {
    out.zhat = z_e;
    return out;
  }

  if (kind == BottleneckKind::VQ) {
    const PatchGeometry fibers{};
    const SignalMatrix z = unfold(z_e, fibers);
    Assignment a = assign(z, codebook, threads);
    const SignalMatrix zhat = one_hot_reconstruct(a, codebook);
    const VqLossTerms losses = vq_losses(z, zhat, 0.0);
    out.zhat = fold(zhat, fibers, z_e.h, z_e.w, z_e.l);
    out.codebook_term = losses.codebook_term;
    out.commitment_term = losses.commitment_term;
    out.usage.assign(std::size_t(codebook.k()), 0);
    for (int idx : a.indices) ++out.usage[std::size_t(idx)];
    out.assignment = std::move(a);
    return out;
  }

  const SignalMatrix z = unfold(z_e, geometry);
  BatchOmpStats stats;
  SparseCode code = batch_omp(z, dictionary, sparsity, threads, &stats);
  if (stats.truncated_columns > 0)
    std::cerr << "warning: " << stats.truncated_columns
              << " columns ran out of independent atoms and were truncated\n";
  const SignalMatrix zhat = reconstruct(code, dictionary);
  const VqLossTerms losses = vq_losses(z, zhat, 0.0);
  out.zhat = fold(zhat, geometry, z_e.h, z_e.w, z_e.l);
  out.codebook_term = losses.codebook_term;
  out.commitment_term = losses.commitment_term;
  out.usage.assign(std::size_t(dictionary.k), 0);
  for (const auto& col : code.columns)
    for (int j : col.support) ++out.usage[std::size_t(j)];
  out.code = std::move(code);
  return out;
}

LatentTensor straight_through(const LatentTensor& z_e, const LatentTensor& zhat) {
  require(z_e.h == zhat.h && z_e.w == zhat.w && z_e.l == zhat.l,
          "straight_through: shape mismatch");
  return zhat;
}

double dl_objective(double recon_loss, double codebook_term, double commitment_term,
                    double beta) {
  if (beta < 0.0) throw ConfigError("dl_objective: beta must be >= 0");
  return recon_loss + codebook_term + beta * commitment_term;
}

}  // namespace lasers
