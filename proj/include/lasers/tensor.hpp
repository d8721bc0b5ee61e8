#ifndef LASERS_TENSOR_HPP
#define LASERS_TENSOR_HPP

#include <lasers/common.hpp>

namespace lasers {

// H x W x L latent tensor. Fibers are contiguous: entry (i, j, c) lives at
// ((i * W) + j) * L + c.
struct LatentTensor {
  int h = 0;
  int w = 0;
  int l = 0;
  std::vector<double> data;

  LatentTensor() = default;
  LatentTensor(int h_, int w_, int l_)
      : h(h_), w(w_), l(l_), data(std::size_t(h_) * std::size_t(w_) * std::size_t(l_), 0.0) {
    require(h_ > 0 && w_ > 0 && l_ > 0, "LatentTensor dims must be positive");
  }

  double& at(int i, int j, int c) { return data[(std::size_t(i) * w + j) * l + c]; }
  double at(int i, int j, int c) const { return data[(std::size_t(i) * w + j) * l + c]; }
  std::size_t size() const { return data.size(); }
};

enum class CodingUnit { Fiber, Patch };

struct PatchGeometry {
  int p_h = 1;
  int p_w = 1;
  CodingUnit unit = CodingUnit::Fiber;

  int signal_dim(int l) const {
    return unit == CodingUnit::Fiber ? l : p_h * p_w * l;
  }
};

// Fiber mode: one column per spatial site (i, j), row-major site order.
// Patch mode: one column per non-overlapping p_h x p_w patch, fibers
// concatenated row-major inside the patch, patches row-major over the grid.
SignalMatrix unfold(const LatentTensor& z, const PatchGeometry& g);

// Exact inverse of unfold for the same geometry and target shape.
LatentTensor fold(const SignalMatrix& m, const PatchGeometry& g, int h, int w, int l);

// Views the latent batch of a signal matrix (L x n) as a 1 x n x L tensor.
LatentTensor tensor_from_columns(const SignalMatrix& m);
SignalMatrix columns_from_tensor(const LatentTensor& z);

}  // namespace lasers

#endif
