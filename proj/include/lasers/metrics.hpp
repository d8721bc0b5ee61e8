#ifndef LASERS_METRICS_HPP
#define LASERS_METRICS_HPP

#include <lasers/common.hpp>
#include <lasers/tensor.hpp>

namespace lasers {

struct UsageHistogram {
  std::vector<long> counts;
  long total = 0;

  explicit UsageHistogram(int k = 0) : counts(std::size_t(k), 0) {}
  static UsageHistogram from_counts(std::vector<long> c);
  void add(int index, long amount = 1) {
    counts[std::size_t(index)] += amount;
    total += amount;
  }
  int k() const { return int(counts.size()); }
};

double mse(const SignalMatrix& a, const SignalMatrix& b);
double mse(const LatentTensor& a, const LatentTensor& b);

// 10 log10(peak^2 / mse); +infinity when the inputs coincide.
double psnr(const SignalMatrix& a, const SignalMatrix& b, double peak = 1.0);
double psnr_from_mse(double mse_value, double peak = 1.0);

// exp of the entropy of the empirical usage distribution, in [1, K]. K means
// uniform use, 1 means total collapse onto a single entry.
double perplexity(const UsageHistogram& h);

// Fraction of entries with nonzero count.
double utilization(const UsageHistogram& h);

// Projects each fiber onto the top right-singular vector of the (H*W) x L
// fiber matrix (power iteration, tol 1e-10, <= 1000 iterations, sign fixed so
// the largest-magnitude entry is positive). Result is H x W, min-max scaled
// to [0, 1]; an all-zero tensor maps to an all-zero image.
Matrix top_singular_projection(const LatentTensor& z);

// Savitzky-Golay smoothing: least-squares polynomial fit per window,
// evaluated at the center point; edge points use the fit over the truncated
// window evaluated at their own offset.
std::vector<double> savitzky_golay(const std::vector<double>& series, int window, int order);

}  // namespace lasers

#endif
