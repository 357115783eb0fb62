#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace condcov {

// Quantile of the standard normal distribution (Wichura's AS 241, PPND16).
double normal_quantile(double p);

double mean(std::span<const double> x);

// Unbiased sample variance; requires at least two values.
double sample_variance(std::span<const double> x);

double median(std::vector<double> x);

// Compensated (Kahan) accumulator for long sums.
class KahanSum {
public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// splitmix64 step; used to derive independent per-stream seeds from a
// master seed so parallel and serial runs see identical substreams.
std::uint64_t splitmix64(std::uint64_t x);

// Seed for stream `stream` derived from `master`.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(master + 0x9e3779b97f4a7c15ULL * (stream + 1));
}

// Run fn(i) for i in [0, count) on up to `threads` workers (0 = hardware).
// Each index is processed exactly once; callers store results by index so
// the outcome does not depend on scheduling.
void parallel_for(std::size_t count, int threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace condcov
