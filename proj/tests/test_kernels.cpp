#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "support.hpp"
#include "zoorun/kernels.hpp"

using namespace zoorun;

namespace {

std::vector<double> rand_vec(std::mt19937& rng, size_t n) {
  return testsup::random_f64(rng, n, -100, 100);
}

// Naive 3x3 box mean with edge replication, the convolution oracle.
std::vector<double> blur3_oracle(const std::vector<double>& in, int64_t Y,
                                 int64_t X) {
  std::vector<double> out(in.size());
  auto clamp = [](int64_t v, int64_t hi) {
    return std::min(std::max(v, int64_t{0}), hi - 1);
  };
  for (int64_t y = 0; y < Y; ++y)
    for (int64_t x = 0; x < X; ++x) {
      double s = 0;
      for (int64_t dy = -1; dy <= 1; ++dy)
        for (int64_t dx = -1; dx <= 1; ++dx)
          s += in[static_cast<size_t>(clamp(y + dy, Y) * X +
                                      clamp(x + dx, X))];
      out[static_cast<size_t>(y * X + x)] = s / 9.0;
    }
  return out;
}

}  // namespace

TEST_CASE("serial and parallel map are bit-identical") {
  std::mt19937 rng(5);
  for (size_t n : {size_t{1}, size_t{17}, size_t{4096}, size_t{100003}}) {
    auto in = rand_vec(rng, n);
    std::vector<double> a(n), b(n);
    auto f = [](double x) { return std::sin(x) * 2.0 + 1.0; };
    kernels::serial::map(std::span<const double>(in), std::span<double>(a), f);
    kernels::par::map(std::span<const double>(in), std::span<double>(b), f);
    CHECK(a == b);
  }
}

TEST_CASE("sum_stats is deterministic and mode-independent") {
  std::mt19937 rng(9);
  for (size_t n : {size_t{0}, size_t{1}, size_t{4095}, size_t{4096},
                   size_t{4097}, size_t{1 << 18}}) {
    auto in = rand_vec(rng, n);
    auto s = kernels::serial::sum_stats(in);
    auto p = kernels::par::sum_stats(in);
    // Bit-identical, not merely close.
    CHECK(s.sum == p.sum);
    CHECK(s.sumsq == p.sumsq);
    CHECK(s.count == p.count);
    // And equal to the fixed-chunk reference summation.
    double chunk_sum = 0;
    for (size_t beg = 0; beg < n; beg += kernels::kReduceChunk) {
      double partial = 0;
      for (size_t i = beg;
           i < std::min(n, beg + static_cast<size_t>(kernels::kReduceChunk));
           ++i)
        partial += in[i];
      chunk_sum += partial;
    }
    CHECK(s.sum == chunk_sum);
  }
}

TEST_CASE("blur3 matches the convolution oracle") {
  std::mt19937 rng(13);
  for (auto [Y, X] : std::vector<std::pair<int64_t, int64_t>>{
           {1, 1}, {1, 5}, {3, 3}, {7, 16}, {33, 31}}) {
    auto in = rand_vec(rng, static_cast<size_t>(Y * X));
    std::vector<double> s(in.size()), p(in.size());
    kernels::serial::blur3(in.data(), s.data(), 1, Y, X);
    kernels::par::blur3(in.data(), p.data(), 1, Y, X);
    CHECK(s == p);
    auto oracle = blur3_oracle(in, Y, X);
    for (size_t i = 0; i < in.size(); ++i)
      CHECK(s[i] == doctest::Approx(oracle[i]).epsilon(1e-12));
  }
}

TEST_CASE("avgpool2 averages non-overlapping 2x2 blocks") {
  std::mt19937 rng(15);
  const int64_t Y = 6, X = 8, n = 2;
  auto in = rand_vec(rng, static_cast<size_t>(n * Y * X));
  std::vector<double> s(static_cast<size_t>(n * (Y / 2) * (X / 2)));
  std::vector<double> p(s.size());
  kernels::serial::avgpool2(in.data(), s.data(), n, Y, X);
  kernels::par::avgpool2(in.data(), p.data(), n, Y, X);
  CHECK(s == p);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t y = 0; y < Y / 2; ++y)
      for (int64_t x = 0; x < X / 2; ++x) {
        auto at = [&](int64_t yy, int64_t xx) {
          return in[static_cast<size_t>((i * Y + yy) * X + xx)];
        };
        const double want = (at(2 * y, 2 * x) + at(2 * y, 2 * x + 1) +
                             at(2 * y + 1, 2 * x) + at(2 * y + 1, 2 * x + 1)) /
                            4.0;
        CHECK(s[static_cast<size_t>((i * (Y / 2) + y) * (X / 2) + x)] ==
              doctest::Approx(want).epsilon(1e-12));
      }
}

TEST_CASE("upsample2 repeats each pixel 2x2") {
  std::mt19937 rng(19);
  const int64_t Y = 3, X = 4;
  auto in = rand_vec(rng, static_cast<size_t>(Y * X));
  std::vector<double> s(static_cast<size_t>(4 * Y * X)), p(s.size());
  kernels::serial::upsample2(in.data(), s.data(), 1, Y, X);
  kernels::par::upsample2(in.data(), p.data(), 1, Y, X);
  CHECK(s == p);
  for (int64_t y = 0; y < 2 * Y; ++y)
    for (int64_t x = 0; x < 2 * X; ++x)
      CHECK(s[static_cast<size_t>(y * 2 * X + x)] ==
            in[static_cast<size_t>((y / 2) * X + x / 2)]);
}

TEST_CASE("dispatch honors the process-wide mode") {
  kernels::set_mode(kernels::Mode::Serial);
  CHECK(kernels::mode() == kernels::Mode::Serial);
  kernels::set_mode(kernels::Mode::Parallel);
  CHECK(kernels::mode() == kernels::Mode::Parallel);
}
