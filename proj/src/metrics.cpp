#include <lasers/metrics.hpp>

#include <cmath>
#include <limits>

namespace lasers {

UsageHistogram UsageHistogram::from_counts(std::vector<long> c) {
  UsageHistogram h;
  h.counts = std::move(c);
  for (long v : h.counts) {
    if (v < 0) throw DataError("UsageHistogram: negative count");
    h.total += v;
  }
  return h;
}

double mse(const SignalMatrix& a, const SignalMatrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "mse: shape mismatch");
  return (a - b).squaredNorm() / double(a.size());
}

double mse(const LatentTensor& a, const LatentTensor& b) {
  require(a.h == b.h && a.w == b.w && a.l == b.l, "mse: tensor shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    acc += d * d;
  }
  return acc / double(a.data.size());
}

double psnr_from_mse(double mse_value, double peak) {
  if (peak <= 0.0) throw ConfigError("psnr: peak must be positive");
  if (mse_value <= 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse_value);
}

double psnr(const SignalMatrix& a, const SignalMatrix& b, double peak) {
  return psnr_from_mse(mse(a, b), peak);
}

double perplexity(const UsageHistogram& h) {
  if (h.total <= 0) throw DataError("perplexity: empty histogram");
  double entropy = 0.0;
  for (long c : h.counts) {
    if (c <= 0) continue;
    const double p = double(c) / double(h.total);
    entropy -= p * std::log(p);
  }
  return std::exp(entropy);
}

double utilization(const UsageHistogram& h) {
  if (h.total <= 0) throw DataError("utilization: empty histogram");
  long used = 0;
  for (long c : h.counts)
    if (c > 0) ++used;
  return double(used) / double(h.counts.size());
}

Matrix top_singular_projection(const LatentTensor& z) {
  const int hw = z.h * z.w;
  Eigen::Map<const Matrix> fibers_cm(z.data.data(), z.l, hw);
  const Matrix fibers = fibers_cm.transpose();  // (H*W) x L, row = fiber

  Matrix image = Matrix::Zero(z.h, z.w);
  const Matrix cov = fibers.transpose() * fibers;  // L x L, PSD
  if (cov.norm() == 0.0) return image;

  Rng rng(0x1a5e125);
  Vector v(z.l);
  for (int c = 0; c < z.l; ++c) v[c] = rng.normal();
  v.normalize();
  for (int it = 0; it < 1000; ++it) {
    Vector next = cov * v;
    const double norm = next.norm();
    if (norm == 0.0) return image;
    next /= norm;
    const double step = (next - v).norm();
    v = next;
    if (step < 1e-10) break;
  }

  int max_idx = 0;
  for (int c = 1; c < z.l; ++c)
    if (std::abs(v[c]) > std::abs(v[max_idx])) max_idx = c;
  if (v[max_idx] < 0.0) v = -v;

  Vector proj = fibers * v;
  const double lo = proj.minCoeff();
  const double hi = proj.maxCoeff();
  if (hi > lo) proj = (proj.array() - lo) / (hi - lo);
  else proj.setZero();
  for (int i = 0; i < z.h; ++i)
    for (int j = 0; j < z.w; ++j) image(i, j) = proj[i * z.w + j];
  return image;
}

std::vector<double> savitzky_golay(const std::vector<double>& series, int window, int order) {
  const int n = int(series.size());
  if (window < 1 || window % 2 == 0) throw ConfigError("savitzky_golay: window must be odd");
  if (order < 0 || order >= window) throw ConfigError("savitzky_golay: need order < window");
  if (n < window) throw ConfigError("savitzky_golay: series shorter than window");

  const int half = window / 2;
  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - half);
    const int hi = std::min(n - 1, i + half);
    const int points = hi - lo + 1;
    const int eff_order = std::min(order, points - 1);

    Matrix vand(points, eff_order + 1);
    Vector rhs(points);
    for (int t = 0; t < points; ++t) {
      const double x = double(lo + t - i);
      double pw = 1.0;
      for (int p = 0; p <= eff_order; ++p) {
        vand(t, p) = pw;
        pw *= x;
      }
      rhs[t] = series[std::size_t(lo + t)];
    }
    const Vector coef = (vand.transpose() * vand).ldlt().solve(vand.transpose() * rhs);
    out[std::size_t(i)] = coef[0];  // fit evaluated at the point itself
  }
  return out;
}

}  // namespace lasers
