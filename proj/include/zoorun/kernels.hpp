#pragma once

#include <cstdint>
#include <span>

namespace zoorun::kernels {

// Every kernel has a serial reference implementation and an OpenMP variant
// that must produce bit-identical f64 results. Reductions use a fixed chunk
// decomposition combined in chunk order, so the result does not depend on
// the thread count. The dispatching entry points honor the process-wide mode.

enum class Mode { Serial, Parallel };

Mode mode();
void set_mode(Mode m);

constexpr int64_t kReduceChunk = 4096;

struct SumStats {
  double sum = 0.0;
  double sumsq = 0.0;
  int64_t count = 0;
};

namespace serial {

template <typename F>
void map(std::span<const double> in, std::span<double> out, F f) {
  const int64_t n = static_cast<int64_t>(in.size());
  for (int64_t i = 0; i < n; ++i) out[i] = f(in[i]);
}

SumStats sum_stats(std::span<const double> xs);

// Layout [n][Y][X], row-major. blur3 is the 3x3 box mean with
// edge-replicate padding.
void blur3(const double* in, double* out, int64_t n, int64_t Y, int64_t X);
// Non-overlapping 2x2 mean; Y and X must be even; out is [n][Y/2][X/2].
void avgpool2(const double* in, double* out, int64_t n, int64_t Y, int64_t X);
// Nearest-neighbor doubling; out is [n][2Y][2X].
void upsample2(const double* in, double* out, int64_t n, int64_t Y, int64_t X);

}  // namespace serial

namespace par {

template <typename F>
void map(std::span<const double> in, std::span<double> out, F f) {
  const int64_t n = static_cast<int64_t>(in.size());
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) out[i] = f(in[i]);
}

SumStats sum_stats(std::span<const double> xs);

void blur3(const double* in, double* out, int64_t n, int64_t Y, int64_t X);
void avgpool2(const double* in, double* out, int64_t n, int64_t Y, int64_t X);
void upsample2(const double* in, double* out, int64_t n, int64_t Y, int64_t X);

}  // namespace par

template <typename F>
void map(std::span<const double> in, std::span<double> out, F f) {
  if (mode() == Mode::Parallel)
    par::map(in, out, f);
  else
    serial::map(in, out, f);
}

SumStats sum_stats(std::span<const double> xs);
void blur3(const double* in, double* out, int64_t n, int64_t Y, int64_t X);
void avgpool2(const double* in, double* out, int64_t n, int64_t Y, int64_t X);
void upsample2(const double* in, double* out, int64_t n, int64_t Y, int64_t X);

}  // namespace zoorun::kernels
