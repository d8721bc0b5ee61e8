#include <lasers/tensor.hpp>

#include <cstring>

namespace lasers {

static void check_geometry(const LatentTensor& z, const PatchGeometry& g) {
  if (g.unit == CodingUnit::Patch) {
    require(g.p_h > 0 && g.p_w > 0, "patch dims must be positive");
    if (z.h % g.p_h != 0 || z.w % g.p_w != 0)
      throw DimensionError("tensor dims not divisible by patch dims");
  }
}

SignalMatrix unfold(const LatentTensor& z, const PatchGeometry& g) {
  check_geometry(z, g);
  if (g.unit == CodingUnit::Fiber) {
    // Fiber layout is already column-contiguous in site order.
    SignalMatrix m(z.l, z.h * z.w);
    std::memcpy(m.data(), z.data.data(), sizeof(double) * z.size());
    return m;
  }
  const int gh = z.h / g.p_h;
  const int gw = z.w / g.p_w;
  SignalMatrix m(g.p_h * g.p_w * z.l, gh * gw);
  for (int pi = 0; pi < gh; ++pi) {
    for (int pj = 0; pj < gw; ++pj) {
      double* col = m.col(pi * gw + pj).data();
      for (int di = 0; di < g.p_h; ++di) {
        for (int dj = 0; dj < g.p_w; ++dj) {
          const double* fiber = &z.data[(std::size_t(pi * g.p_h + di) * z.w + (pj * g.p_w + dj)) * z.l];
          std::memcpy(col + (di * g.p_w + dj) * z.l, fiber, sizeof(double) * z.l);
        }
      }
    }
  }
  return m;
}

LatentTensor fold(const SignalMatrix& m, const PatchGeometry& g, int h, int w, int l) {
  require(h > 0 && w > 0 && l > 0, "fold target dims must be positive");
  LatentTensor z(h, w, l);
  if (g.unit == CodingUnit::Fiber) {
    if (m.rows() != l || m.cols() != std::int64_t(h) * w)
      throw DimensionError("fold: matrix shape does not match fiber geometry");
    std::memcpy(z.data.data(), m.data(), sizeof(double) * z.size());
    return z;
  }
  if (h % g.p_h != 0 || w % g.p_w != 0)
    throw DimensionError("fold: target dims not divisible by patch dims");
  const int gh = h / g.p_h;
  const int gw = w / g.p_w;
  if (m.rows() != std::int64_t(g.p_h) * g.p_w * l || m.cols() != std::int64_t(gh) * gw)
    throw DimensionError("fold: matrix shape does not match patch geometry");
  for (int pi = 0; pi < gh; ++pi) {
    for (int pj = 0; pj < gw; ++pj) {
      const double* col = m.col(pi * gw + pj).data();
      for (int di = 0; di < g.p_h; ++di) {
        for (int dj = 0; dj < g.p_w; ++dj) {
          double* fiber = &z.data[(std::size_t(pi * g.p_h + di) * w + (pj * g.p_w + dj)) * l];
          std::memcpy(fiber, col + (di * g.p_w + dj) * l, sizeof(double) * l);
        }
      }
    }
  }
  return z;
}

LatentTensor tensor_from_columns(const SignalMatrix& m) {
  LatentTensor z(1, int(m.cols()), int(m.rows()));
  std::memcpy(z.data.data(), m.data(), sizeof(double) * z.size());
  return z;
}

SignalMatrix columns_from_tensor(const LatentTensor& z) {
  PatchGeometry fiber;
  return unfold(z, fiber);
}

}  // namespace lasers
