#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "json.hpp"
#include "support.hpp"
#include "zoorun/kernels.hpp"
#include "zoorun/processing.hpp"

using namespace zoorun;
using nlohmann::json;

namespace {

spec::ProcStep step(const std::string& name, json kwargs,
                    const std::string& mode = "") {
  spec::ProcStep s;
  s.name = name;
  const bool stats =
      name == "zero_mean_unit_variance" || name == "scale_range";
  s.mode = !mode.empty() ? mode : (stats ? "per_sample" : "fixed");
  s.kwargs = std::move(kwargs);
  return s;
}

Tensor f64_tensor(std::mt19937& rng, const std::string& axes,
                  std::vector<int64_t> shape) {
  int64_t n = 1;
  for (int64_t s : shape) n *= s;
  return Tensor::from_values<double>(
      "t", axes, std::move(shape),
      testsup::random_f64(rng, static_cast<size_t>(n), -50, 50));
}

double brute_percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double r = q / 100.0 * static_cast<double>(v.size() - 1);
  const size_t lo = static_cast<size_t>(std::floor(r));
  const double frac = r - std::floor(r);
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}

}  // namespace

TEST_CASE("binarize uses a strict greater-than") {
  proc::ProcContext ctx;
  auto t = Tensor::from_values<double>("t", "x", {3}, {1.0, 2.0, 3.0});
  auto out = proc::apply_step(step("binarize", {{"threshold", 2.0}}), t, ctx);
  auto v = out.values<double>();
  CHECK(v[0] == 0.0);
  CHECK(v[1] == 0.0);  // equal is NOT above threshold
  CHECK(v[2] == 1.0);
}

TEST_CASE("clip and scale_linear basics") {
  proc::ProcContext ctx;
  auto t = Tensor::from_values<double>("t", "x", {4}, {-5, 0, 5, 50});
  auto c = proc::apply_step(step("clip", {{"min", -1.0}, {"max", 10.0}}), t,
                            ctx);
  CHECK(c.values<double>()[0] == -1.0);
  CHECK(c.values<double>()[3] == 10.0);

  auto s = proc::apply_step(
      step("scale_linear", {{"gain", 2.0}, {"offset", 1.0}}), t, ctx);
  CHECK(s.values<double>()[2] == 11.0);
}

TEST_CASE("scale_linear per-channel arrays broadcast along c") {
  proc::ProcContext ctx;
  auto t = Tensor::from_values<double>("t", "cx", {2, 3},
                                       {1, 2, 3, 10, 20, 30});
  auto out = proc::apply_step(
      step("scale_linear",
           {{"gain", {2.0, 0.5}}, {"offset", {0.0, 1.0}}}),
      t, ctx);
  auto v = out.values<double>();
  CHECK(v[0] == 2.0);
  CHECK(v[2] == 6.0);
  CHECK(v[3] == 6.0);   // 10*0.5 + 1
  CHECK(v[5] == 16.0);  // 30*0.5 + 1
}

TEST_CASE("sigmoid matches the closed form") {
  proc::ProcContext ctx;
  std::mt19937 rng(3);
  Tensor t = f64_tensor(rng, "yx", {5, 7});
  auto out = proc::apply_step(step("sigmoid", json::object()), t, ctx);
  auto xs = t.values<double>();
  auto ys = out.values<double>();
  for (size_t i = 0; i < xs.size(); ++i)
    CHECK(ys[i] == doctest::Approx(1.0 / (1.0 + std::exp(-xs[i])))
                       .epsilon(1e-12));
}

TEST_CASE("zero_mean_unit_variance trivial examples") {
  proc::ProcContext ctx;
  auto t = Tensor::from_values<double>("t", "x", {2}, {0.0, 2.0});
  auto out = proc::apply_step(
      step("zero_mean_unit_variance", {{"eps", 0.0}}), t, ctx);
  CHECK(out.values<double>()[0] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(out.values<double>()[1] == doctest::Approx(1.0).epsilon(1e-12));

  // Constant tensor: std 0, eps rescues the division.
  auto c = Tensor::from_values<double>("t", "x", {4}, {3, 3, 3, 3});
  auto z = proc::apply_step(step("zero_mean_unit_variance", json::object()),
                            c, ctx);
  for (double v : z.values<double>()) CHECK(v == 0.0);
}

TEST_CASE("zero_mean_unit_variance post-condition on random tensors") {
  std::mt19937 rng(17);
  for (int iter = 0; iter < 200; ++iter) {
    proc::ProcContext ctx;
    Tensor t = f64_tensor(rng, "yx", {8, 9});
    auto out = proc::apply_step(
        step("zero_mean_unit_variance", {{"eps", 0.0}}), t, ctx);
    auto v = out.values<double>();
    double sum = 0, sumsq = 0;
    for (double x : v) sum += x;
    for (double x : v) sumsq += x * x;
    const double n = static_cast<double>(v.size());
    const double mean = sum / n;
    const double stddev = std::sqrt(sumsq / n - mean * mean);
    CHECK(std::abs(mean) <= 1e-10);
    CHECK(std::abs(stddev - 1.0) <= 1e-10);
  }
}

TEST_CASE("zero_mean_unit_variance per-channel axes subset oracle") {
  std::mt19937 rng(23);
  for (int iter = 0; iter < 50; ++iter) {
    proc::ProcContext ctx;
    Tensor t = f64_tensor(rng, "cyx", {3, 4, 5});
    auto out = proc::apply_step(
        step("zero_mean_unit_variance", {{"axes", "yx"}, {"eps", 0.0}}), t,
        ctx);
    // Brute-force per-channel two-pass oracle.
    for (int64_t c = 0; c < 3; ++c) {
      double sum = 0;
      for (int64_t y = 0; y < 4; ++y)
        for (int64_t x = 0; x < 5; ++x) sum += t.at<double>({c, y, x});
      const double mean = sum / 20.0;
      double var = 0;
      for (int64_t y = 0; y < 4; ++y)
        for (int64_t x = 0; x < 5; ++x) {
          const double d = t.at<double>({c, y, x}) - mean;
          var += d * d;
        }
      const double stddev = std::sqrt(var / 20.0);
      for (int64_t y = 0; y < 4; ++y)
        for (int64_t x = 0; x < 5; ++x)
          CHECK(out.at<double>({c, y, x}) ==
                doctest::Approx((t.at<double>({c, y, x}) - mean) / stddev)
                    .epsilon(1e-9));
    }
  }
}

TEST_CASE("zero_mean_unit_variance fixed mode uses given statistics") {
  proc::ProcContext ctx;
  auto t = Tensor::from_values<double>("t", "x", {2}, {10.0, 14.0});
  auto out = proc::apply_step(
      step("zero_mean_unit_variance",
           {{"mean", 12.0}, {"std", 2.0}, {"eps", 0.0}}, "fixed"),
      t, ctx);
  CHECK(out.values<double>()[0] == doctest::Approx(-1.0));
  CHECK(out.values<double>()[1] == doctest::Approx(1.0));
}

TEST_CASE("scale_range trivial min-max example") {
  proc::ProcContext ctx;
  auto t = Tensor::from_values<double>("t", "x", {3}, {2, 4, 6});
  auto out = proc::apply_step(
      step("scale_range",
           {{"min_percentile", 0.0}, {"max_percentile", 100.0},
            {"eps", 0.0}}),
      t, ctx);
  auto v = out.values<double>();
  CHECK(v[0] == doctest::Approx(0.0));
  CHECK(v[1] == doctest::Approx(0.5));
  CHECK(v[2] == doctest::Approx(1.0));

  auto c = Tensor::from_values<double>("t", "x", {3}, {5, 5, 5});
  auto z = proc::apply_step(step("scale_range", json::object()), c, ctx);
  for (double x : z.values<double>()) CHECK(x == 0.0);
}

TEST_CASE("scale_range percentile oracle on random tensors") {
  std::mt19937 rng(29);
  for (int iter = 0; iter < 200; ++iter) {
    proc::ProcContext ctx;
    Tensor t = f64_tensor(rng, "x", {100});
    auto out = proc::apply_step(
        step("scale_range",
             {{"min_percentile", 10.0}, {"max_percentile", 90.0},
              {"eps", 0.0}}),
        t, ctx);
    std::vector<double> vals(t.values<double>().begin(),
                             t.values<double>().end());
    const double lo = brute_percentile(vals, 10.0);
    const double hi = brute_percentile(vals, 90.0);
    auto xs = t.values<double>();
    auto ys = out.values<double>();
    for (size_t i = 0; i < xs.size(); ++i)
      CHECK(std::abs(ys[i] - (xs[i] - lo) / (hi - lo)) <= 1e-9);
  }
}

TEST_CASE("scale_range fixed mode") {
  proc::ProcContext ctx;
  auto t = Tensor::from_values<double>("t", "x", {2}, {1.0, 3.0});
  auto out = proc::apply_step(
      step("scale_range",
           {{"min_value", 1.0}, {"max_value", 5.0}, {"eps", 0.0}}, "fixed"),
      t, ctx);
  CHECK(out.values<double>()[0] == doctest::Approx(0.0));
  CHECK(out.values<double>()[1] == doctest::Approx(0.5));
}

TEST_CASE("chain runs in f64 and casts once at the end") {
  proc::ProcContext ctx;
  // u8 input: intermediate values would truncate if any step ran in u8.
  auto t = Tensor::from_values<uint8_t>("t", "x", {3}, {0, 5, 10});
  std::vector<spec::ProcStep> steps = {
      step("scale_linear", {{"gain", 0.5}, {"offset", 0.25}}),
      step("scale_linear", {{"gain", 2.0}, {"offset", 0.0}})};
  auto out = proc::apply_chain(steps, t, ctx, DType::u8);
  CHECK(out.dtype() == DType::u8);
  auto v = out.values<uint8_t>();
  // (x*0.5+0.25)*2 = x + 0.5 -> round half to even
  CHECK(v[0] == 0);   // 0.5 -> 0
  CHECK(v[1] == 6);   // 5.5 -> 6
  CHECK(v[2] == 10);  // 10.5 -> 10
}

TEST_CASE("empty chain with matching dtype is the identity") {
  proc::ProcContext ctx;
  auto t = Tensor::from_values<float>("t", "x", {2}, {1.5f, -2.5f});
  auto out = proc::apply_chain({}, t, ctx, DType::f32);
  CHECK(out == t);
}

TEST_CASE("chain errors carry the step index") {
  proc::ProcContext ctx;
  auto t = Tensor::from_values<double>("t", "x", {2}, {1, 2});
  // Per-channel gain on a tensor without a 'c' axis.
  std::vector<spec::ProcStep> steps = {
      step("scale_linear", {{"gain", {1.0, 2.0}}, {"offset", 0.0}})};
  try {
    proc::apply_chain(steps, t, ctx, DType::f64);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("step 0") != std::string::npos);
  }
}

TEST_CASE("per-sample statistics land in the context cache") {
  proc::ProcContext ctx;
  auto t = Tensor::from_values<double>("in", "x", {2}, {0.0, 2.0});
  std::vector<spec::ProcStep> steps = {
      step("zero_mean_unit_variance", {{"eps", 0.0}})};
  proc::apply_chain(steps, t, ctx, DType::f64);
  auto it = ctx.sample_stats.find({"in", 0});
  REQUIRE(it != ctx.sample_stats.end());
  REQUIRE(it->second.size() == 2);
  CHECK(it->second[0] == doctest::Approx(1.0));  // mean
  CHECK(it->second[1] == doctest::Approx(1.0));  // std
}

TEST_CASE("results are identical in serial and parallel kernel modes") {
  std::mt19937 rng(31);
  Tensor t = f64_tensor(rng, "cyx", {3, 32, 33});
  std::vector<spec::ProcStep> steps = {
      step("zero_mean_unit_variance", {{"axes", "yx"}}),
      step("sigmoid", json::object()),
      step("scale_range",
           {{"min_percentile", 5.0}, {"max_percentile", 95.0}})};
  proc::ProcContext c1, c2;
  kernels::set_mode(kernels::Mode::Serial);
  Tensor a = proc::apply_chain(steps, t, c1, DType::f64);
  kernels::set_mode(kernels::Mode::Parallel);
  Tensor b = proc::apply_chain(steps, t, c2, DType::f64);
  CHECK(a == b);  // bit-identical
}
