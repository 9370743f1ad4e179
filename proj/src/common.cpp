#include "polykin/common.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <thread>
#include <vector>

namespace polykin {

int log_level() {
  static const int level = [] {
    const char* env = std::getenv("POLYKIN_LOG");
    if (!env) return 1;
    return std::atoi(env);
  }();
  return level;
}

void log_warn(const std::string& msg) {
  if (log_level() >= 1) std::fprintf(stderr, "[polykin warn] %s\n", msg.c_str());
}

void log_info(const std::string& msg) {
  if (log_level() >= 2) std::fprintf(stderr, "[polykin info] %s\n", msg.c_str());
}

void log_debug(const std::string& msg) {
  if (log_level() >= 3) std::fprintf(stderr, "[polykin debug] %s\n", msg.c_str());
}

void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  if (threads <= 1 || static_cast<std::size_t>(threads) >= n) {
    fn(0, n);
    return;
  }
  const std::size_t nt = static_cast<std::size_t>(threads);
  const std::size_t chunk = (n + nt - 1) / nt;
  std::vector<std::thread> pool;
  pool.reserve(nt - 1);
  for (std::size_t t = 1; t < nt; ++t) {
    const std::size_t b = t * chunk;
    if (b >= n) break;
    const std::size_t e = std::min(n, b + chunk);
    pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  fn(0, std::min(n, chunk));
  for (auto& th : pool) th.join();
}

double parallel_sum(std::size_t n, int threads,
                    const std::function<double(std::size_t, std::size_t)>& chunk_sum) {
  if (n == 0) return 0.0;
  if (threads <= 1 || static_cast<std::size_t>(threads) >= n) return chunk_sum(0, n);
  const std::size_t nt = static_cast<std::size_t>(threads);
  const std::size_t chunk = (n + nt - 1) / nt;
  std::vector<double> partial(nt, 0.0);
  std::vector<std::thread> pool;
  pool.reserve(nt - 1);
  for (std::size_t t = 1; t < nt; ++t) {
    const std::size_t b = t * chunk;
    if (b >= n) break;
    const std::size_t e = std::min(n, b + chunk);
    pool.emplace_back([&chunk_sum, &partial, t, b, e] { partial[t] = chunk_sum(b, e); });
  }
  partial[0] = chunk_sum(0, std::min(n, chunk));
  for (auto& th : pool) th.join();
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

double xlogx(double x) {
  if (x < 1e-300) return 0.0;
  return x * std::log(x);
}

}  // namespace polykin
