#include "zoorun/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <vector>

namespace zoorun::kernels {

namespace {

Mode initial_mode() {
  const char* env = std::getenv("ZOORUN_SERIAL");
  if (env && env[0] == '1') return Mode::Serial;
#ifdef _OPENMP
  return Mode::Parallel;
#else
  return Mode::Serial;
#endif
}

std::atomic<Mode> g_mode{initial_mode()};

inline double blur3_at(const double* img, int64_t Y, int64_t X, int64_t y,
                       int64_t x) {
  double acc = 0.0;
  for (int64_t dy = -1; dy <= 1; ++dy) {
    const int64_t cy = std::clamp<int64_t>(y + dy, 0, Y - 1);
    for (int64_t dx = -1; dx <= 1; ++dx) {
      const int64_t cx = std::clamp<int64_t>(x + dx, 0, X - 1);
      acc += img[cy * X + cx];
    }
  }
  return acc / 9.0;
}

inline double pool_at(const double* img, int64_t X, int64_t y, int64_t x) {
  const double* r0 = img + 2 * y * X + 2 * x;
  const double* r1 = r0 + X;
  return (r0[0] + r0[1] + r1[0] + r1[1]) / 4.0;
}

inline SumStats chunk_stats(const double* xs, int64_t lo, int64_t hi) {
  SumStats s;
  for (int64_t i = lo; i < hi; ++i) {
    s.sum += xs[i];
    s.sumsq += xs[i] * xs[i];
  }
  s.count = hi - lo;
  return s;
}

SumStats combine_in_order(const std::vector<SumStats>& parts) {
  SumStats total;
  for (const SumStats& p : parts) {
    total.sum += p.sum;
    total.sumsq += p.sumsq;
    total.count += p.count;
  }
  return total;
}

}  // namespace

Mode mode() { return g_mode.load(std::memory_order_relaxed); }
void set_mode(Mode m) { g_mode.store(m, std::memory_order_relaxed); }

namespace serial {

SumStats sum_stats(std::span<const double> xs) {
  const int64_t n = static_cast<int64_t>(xs.size());
  const int64_t chunks = (n + kReduceChunk - 1) / kReduceChunk;
  std::vector<SumStats> parts(static_cast<size_t>(chunks));
  for (int64_t c = 0; c < chunks; ++c)
    parts[c] = chunk_stats(xs.data(), c * kReduceChunk,
                           std::min(n, (c + 1) * kReduceChunk));
  return combine_in_order(parts);
}

void blur3(const double* in, double* out, int64_t n, int64_t Y, int64_t X) {
  for (int64_t p = 0; p < n; ++p) {
    const double* img = in + p * Y * X;
    double* dst = out + p * Y * X;
    for (int64_t y = 0; y < Y; ++y)
      for (int64_t x = 0; x < X; ++x)
        dst[y * X + x] = blur3_at(img, Y, X, y, x);
  }
}

void avgpool2(const double* in, double* out, int64_t n, int64_t Y, int64_t X) {
  const int64_t oy = Y / 2, ox = X / 2;
  for (int64_t p = 0; p < n; ++p) {
    const double* img = in + p * Y * X;
    double* dst = out + p * oy * ox;
    for (int64_t y = 0; y < oy; ++y)
      for (int64_t x = 0; x < ox; ++x)
        dst[y * ox + x] = pool_at(img, X, y, x);
  }
}

void upsample2(const double* in, double* out, int64_t n, int64_t Y, int64_t X) {
  const int64_t oy = 2 * Y, ox = 2 * X;
  for (int64_t p = 0; p < n; ++p) {
    const double* img = in + p * Y * X;
    double* dst = out + p * oy * ox;
    for (int64_t y = 0; y < oy; ++y)
      for (int64_t x = 0; x < ox; ++x)
        dst[y * ox + x] = img[(y / 2) * X + x / 2];
  }
}

}  // namespace serial

namespace par {

SumStats sum_stats(std::span<const double> xs) {
  const int64_t n = static_cast<int64_t>(xs.size());
  const int64_t chunks = (n + kReduceChunk - 1) / kReduceChunk;
  std::vector<SumStats> parts(static_cast<size_t>(chunks));
#pragma omp parallel for schedule(static)
  for (int64_t c = 0; c < chunks; ++c)
    parts[c] = chunk_stats(xs.data(), c * kReduceChunk,
                           std::min(n, (c + 1) * kReduceChunk));
  return combine_in_order(parts);
}

void blur3(const double* in, double* out, int64_t n, int64_t Y, int64_t X) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t p = 0; p < n; ++p)
    for (int64_t y = 0; y < Y; ++y) {
      const double* img = in + p * Y * X;
      double* dst = out + p * Y * X;
      for (int64_t x = 0; x < X; ++x)
        dst[y * X + x] = blur3_at(img, Y, X, y, x);
    }
}

void avgpool2(const double* in, double* out, int64_t n, int64_t Y, int64_t X) {
  const int64_t oy = Y / 2, ox = X / 2;
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t p = 0; p < n; ++p)
    for (int64_t y = 0; y < oy; ++y) {
      const double* img = in + p * Y * X;
      double* dst = out + p * oy * ox;
      for (int64_t x = 0; x < ox; ++x) dst[y * ox + x] = pool_at(img, X, y, x);
    }
}

void upsample2(const double* in, double* out, int64_t n, int64_t Y, int64_t X) {
  const int64_t oy = 2 * Y, ox = 2 * X;
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t p = 0; p < n; ++p)
    for (int64_t y = 0; y < oy; ++y) {
      const double* img = in + p * Y * X;
      double* dst = out + p * oy * ox;
      for (int64_t x = 0; x < ox; ++x) dst[y * ox + x] = img[(y / 2) * X + x / 2];
    }
}

}  // namespace par

SumStats sum_stats(std::span<const double> xs) {
  return mode() == Mode::Parallel ? par::sum_stats(xs) : serial::sum_stats(xs);
}

void blur3(const double* in, double* out, int64_t n, int64_t Y, int64_t X) {
  mode() == Mode::Parallel ? par::blur3(in, out, n, Y, X)
                           : serial::blur3(in, out, n, Y, X);
}

void avgpool2(const double* in, double* out, int64_t n, int64_t Y, int64_t X) {
  mode() == Mode::Parallel ? par::avgpool2(in, out, n, Y, X)
                           : serial::avgpool2(in, out, n, Y, X);
}

void upsample2(const double* in, double* out, int64_t n, int64_t Y, int64_t X) {
  mode() == Mode::Parallel ? par::upsample2(in, out, n, Y, X)
                           : serial::upsample2(in, out, n, Y, X);
}

}  // namespace zoorun::kernels
