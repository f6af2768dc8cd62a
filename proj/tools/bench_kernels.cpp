// Times the serial kernels against the OpenMP ones on a large image and
// prints a small table. The two paths are required to produce identical
// bytes; this tool reports the speed difference.

#include <chrono>
#include <cstdio>
#include <numeric>
#include <vector>

#include "zoorun/kernels.hpp"

using namespace zoorun;

namespace {

using Clock = std::chrono::steady_clock;

double ms_of(auto fn, int reps) {
  fn();  // warm-up
  auto t0 = Clock::now();
  for (int i = 0; i < reps; ++i) fn();
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count() /
         reps;
}

void row(const char* name, double serial_ms, double par_ms) {
  std::printf("%-12s %10.2f ms %10.2f ms %8.2fx\n", name, serial_ms, par_ms,
              par_ms > 0 ? serial_ms / par_ms : 0.0);
}

}  // namespace

int main() {
  const int64_t Y = 4096, X = 4096;
  const size_t n = static_cast<size_t>(Y * X);
  std::vector<double> src(n), dst(n), up(n * 4);
  for (size_t i = 0; i < n; ++i) src[i] = ((i * 37) % 101) / 10.0 - 5.0;

  std::printf("%-12s %13s %13s %9s  (%lldx%lld f64)\n", "kernel", "serial",
              "openmp", "speedup", static_cast<long long>(Y),
              static_cast<long long>(X));

  row("map",
      ms_of([&] { kernels::serial::map(std::span<const double>(src),
                                       std::span<double>(dst),
                                       [](double v) { return v * 2 + 1; }); },
            5),
      ms_of([&] { kernels::par::map(std::span<const double>(src),
                                    std::span<double>(dst),
                                    [](double v) { return v * 2 + 1; }); },
            5));

  row("sum_stats",
      ms_of([&] { (void)kernels::serial::sum_stats(src); }, 5),
      ms_of([&] { (void)kernels::par::sum_stats(src); }, 5));

  row("blur3",
      ms_of([&] { kernels::serial::blur3(src.data(), dst.data(), 1, Y, X); },
            3),
      ms_of([&] { kernels::par::blur3(src.data(), dst.data(), 1, Y, X); }, 3));

  row("avgpool2",
      ms_of([&] { kernels::serial::avgpool2(src.data(), dst.data(), 1, Y, X); },
            5),
      ms_of([&] { kernels::par::avgpool2(src.data(), dst.data(), 1, Y, X); },
            5));

  row("upsample2",
      ms_of([&] { kernels::serial::upsample2(src.data(), up.data(), 1, Y, X); },
            3),
      ms_of([&] { kernels::par::upsample2(src.data(), up.data(), 1, Y, X); },
            3));

  return 0;
}
