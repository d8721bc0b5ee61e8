#ifndef LASERS_BOTTLENECK_HPP
#define LASERS_BOTTLENECK_HPP

#include <lasers/sparse_coding.hpp>
#include <lasers/tensor.hpp>
#include <lasers/vq.hpp>

#include <optional>

namespace lasers {

enum class BottleneckKind { Identity, VQ, DL };

struct BottleneckOutput {
  LatentTensor zhat;
  std::optional<Assignment> assignment;  // VQ
  std::optional<SparseCode> code;        // DL
  double codebook_term = 0.0;
  double commitment_term = 0.0;
  std::vector<long> usage;  // per codeword/atom selection counts, empty for Identity
};

// The lossy compression stage between encoder and decoder. Identity passes
// the latent through; VQ snaps each fiber to its nearest codeword; DL codes
// each unit (fiber or patch) as a sparse combination of dictionary atoms.
struct Bottleneck {
  BottleneckKind kind = BottleneckKind::Identity;
  Codebook codebook;      // active when kind == VQ
  Dictionary dictionary;  // active when kind == DL
  int sparsity = 1;
  PatchGeometry geometry;  // DL coding unit; VQ always codes fibers
  int threads = 1;

  static Bottleneck identity();
  static Bottleneck vq(Codebook cb);
  static Bottleneck dl(Dictionary d, int sparsity, PatchGeometry geometry = {});

  int k() const;
  BottleneckOutput forward(const LatentTensor& z_e) const;
};

// Value side of the straight-through estimator: the output equals zhat
// bit-for-bit. The gradient contract (downstream gradients flow to z_e
// unchanged) is implemented by the training step.
LatentTensor straight_through(const LatentTensor& z_e, const LatentTensor& zhat);

// recon + codebook_term + beta * commitment_term.
double dl_objective(double recon_loss, double codebook_term, double commitment_term, double beta);

}  // namespace lasers

#endif
