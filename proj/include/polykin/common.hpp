#ifndef POLYKIN_COMMON_HPP
#define POLYKIN_COMMON_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

namespace polykin {

// Log verbosity comes from the POLYKIN_LOG environment variable:
// 0 = silent, 1 = warnings (default), 2 = info, 3 = debug.
int log_level();
void log_warn(const std::string& msg);
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

// Deterministic 64-bit linear congruential generator (Knuth MMIX constants),
//   x <- 6364136223846793005 * x + 1442695040888963407   (mod 2^64).
// All random sampling in validators and property sweeps goes through this
// generator so that runs are reproducible from the seed alone.
class Lcg64 {
 public:
  explicit Lcg64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ = state_ * 6364136223846793005ULL + 1442695040888963407ULL;
    return state_;
  }

  // Uniform in [0, 1), from the top 53 bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

 private:
  std::uint64_t state_;
};

// Splits [0, n) into `threads` contiguous chunks and runs fn(begin, end) on
// each.  threads <= 1 runs everything inline on the calling thread.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t, std::size_t)>& fn);

// Chunked sum: partial sums are produced per chunk and combined in chunk
// order, so the result is deterministic for a fixed thread count.  With
// threads <= 1 this is a plain left-to-right sum.
double parallel_sum(std::size_t n, int threads,
                    const std::function<double(std::size_t, std::size_t)>& chunk_sum);

// x * ln(x), with values below the 1e-300 floor treated as exactly zero.
double xlogx(double x);

}  // namespace polykin

#endif  // POLYKIN_COMMON_HPP
