#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "support.hpp"
#include "zoorun/zrt1.hpp"

using namespace zoorun;

TEST_CASE("axes validation") {
  CHECK(Axes("byxc").rank() == 4);
  CHECK(Axes("b").str() == "b");
  CHECK_THROWS_AS(Axes(""), BadAxes);
  CHECK_THROWS_AS(Axes("byy"), BadAxes);
  CHECK_THROWS_AS(Axes("aq"), BadAxes);
  CHECK(Axes("bzyx").index_of('y') == 2);
  CHECK(Axes("bzyx").index_of('c') == -1);
  CHECK(Axes("byxc").is_permutation_of(Axes("cbxy")));
  CHECK_FALSE(Axes("byx").is_permutation_of(Axes("byxc")));
  CHECK(Axes::spatial('z'));
  CHECK(Axes::spatial('y'));
  CHECK(Axes::spatial('x'));
  CHECK_FALSE(Axes::spatial('b'));
}

TEST_CASE("dtype name tables round-trip") {
  for (DType t : {DType::i8, DType::u8, DType::i16, DType::u16, DType::i32,
                  DType::u32, DType::i64, DType::f32, DType::f64}) {
    CHECK(dtype_from_name(dtype_name(t)) == t);
    CHECK(dtype_from_descriptor_name(dtype_descriptor_name(t)) == t);
    CHECK(byte_width(t) > 0);
  }
  CHECK(dtype_name(DType::f32) == "f32");
  CHECK(dtype_descriptor_name(DType::f32) == "float32");
  CHECK_THROWS_AS(dtype_from_name("float"), ParseError);
  CHECK_THROWS_AS(dtype_from_descriptor_name("f32"), ParseError);
}

TEST_CASE("tensor creation and indexing") {
  auto t = Tensor::from_values<float>("t", "yx", {2, 3},
                                      {1, 2, 3, 4, 5, 6});
  CHECK(t.element_count() == 6);
  CHECK(t.at<float>({1, 2}) == 6.0f);
  CHECK(t.flat_index(std::vector<int64_t>{1, 0}) == 3);
  CHECK_THROWS_AS((void)t.at<float>({2, 0}), OutOfBounds);
  CHECK_THROWS_AS((void)t.values<double>(), DTypeMismatch);
  CHECK_THROWS_AS(Tensor::from_values<float>("t", "yx", {2, 3}, {1, 2}),
                  ShapeMismatch);
}

TEST_CASE("reorder_axes permutes data correctly") {
  auto t = Tensor::from_values<float>("t", "yx", {2, 3},
                                      {1, 2, 3, 4, 5, 6});
  Tensor r = t.reorder_axes(Axes("xy"));
  CHECK(r.shape() == std::vector<int64_t>{3, 2});
  for (int64_t y = 0; y < 2; ++y)
    for (int64_t x = 0; x < 3; ++x)
      CHECK(r.at<float>({x, y}) == t.at<float>({y, x}));
  // Round trip restores the original bytes.
  CHECK(r.reorder_axes(Axes("yx")) == t);
}

TEST_CASE("reorder_axes property on random rank-4 tensors") {
  std::mt19937 rng(7);
  const std::string labels = "bcyx";
  std::vector<std::string> perms = {"bcyx", "xycb", "ybxc", "cxby"};
  for (int iter = 0; iter < 20; ++iter) {
    std::vector<int64_t> shape = {2, 3, 4, 5};
    auto vals = testsup::random_f64(rng, 120, -10, 10);
    auto t = Tensor::from_values<double>("t", labels, shape, vals);
    for (const std::string& p : perms) {
      Tensor r = t.reorder_axes(Axes(p));
      std::vector<int64_t> idx(4);
      for (idx[0] = 0; idx[0] < 2; ++idx[0])
        for (idx[1] = 0; idx[1] < 3; ++idx[1])
          for (idx[2] = 0; idx[2] < 4; ++idx[2])
            for (idx[3] = 0; idx[3] < 5; ++idx[3]) {
              std::vector<int64_t> pidx(4);
              for (size_t i = 0; i < 4; ++i)
                pidx[i] = idx[static_cast<size_t>(
                    Axes(labels).index_of(p[i]))];
              CHECK(r.values<double>()[r.flat_index(pidx)] ==
                    t.values<double>()[t.flat_index(idx)]);
            }
    }
  }
}

TEST_CASE("cast rounds half to even and saturates") {
  auto t = Tensor::from_values<float>(
      "t", "x", {8},
      {2.5f, 3.5f, -2.5f, 300.0f, -300.0f,
       std::numeric_limits<float>::quiet_NaN(), 0.4999f, -0.5f});
  Tensor c = t.cast(DType::i8);
  auto v = c.values<int8_t>();
  CHECK(v[0] == 2);    // half to even
  CHECK(v[1] == 4);    // half to even
  CHECK(v[2] == -2);   // half to even, negative
  CHECK(v[3] == 127);  // saturate high
  CHECK(v[4] == -128); // saturate low
  CHECK(v[5] == 0);    // NaN
  CHECK(v[6] == 0);
  CHECK(v[7] == 0);    // -0.5 rounds to even 0
}

TEST_CASE("cast saturates unsigned and wide types") {
  auto t = Tensor::from_values<double>("t", "x", {4}, {-1.0, 255.9, 256.0,
                                                       1e300});
  Tensor tu = t.cast(DType::u8);
  auto u = tu.values<uint8_t>();
  CHECK(u[0] == 0);
  CHECK(u[1] == 255);  // 255.9 rounds to 256, saturates
  CHECK(u[2] == 255);
  CHECK(u[3] == 255);
  Tensor ti = t.cast(DType::i64);
  CHECK(ti.values<int64_t>()[3] == std::numeric_limits<int64_t>::max());
  // int->float->int is exact for small values
  auto s = Tensor::from_values<int32_t>("s", "x", {3}, {-7, 0, 1000000});
  Tensor rt = s.cast(DType::f64).cast(DType::i32);
  CHECK(rt.values<int32_t>()[2] == 1000000);
}

TEST_CASE("slice and write_block") {
  auto t = Tensor::from_values<int32_t>("t", "yx", {3, 4},
                                        {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10,
                                         11});
  std::vector<Range> r = {{1, 3}, {1, 3}};
  Tensor s = t.slice(r);
  CHECK(s.shape() == std::vector<int64_t>{2, 2});
  CHECK(s.at<int32_t>({0, 0}) == 5);
  CHECK(s.at<int32_t>({1, 1}) == 10);
  CHECK_THROWS_AS(t.slice(std::vector<Range>{{0, 4}, {0, 1}}), OutOfBounds);

  Tensor dst = Tensor::zeros("d", Axes("yx"), {3, 4}, DType::i32);
  dst.write_block(s, std::vector<int64_t>{0, 2});
  CHECK(dst.at<int32_t>({0, 2}) == 5);
  CHECK(dst.at<int32_t>({1, 3}) == 10);
  CHECK(dst.at<int32_t>({0, 0}) == 0);
  CHECK_THROWS_AS(dst.write_block(s, std::vector<int64_t>{2, 3}), OutOfBounds);
  Tensor wrong = Tensor::zeros("w", Axes("yx"), {2, 2}, DType::f32);
  CHECK_THROWS_AS(dst.write_block(wrong, std::vector<int64_t>{0, 0}),
                  DTypeMismatch);
}

TEST_CASE("zrt1 round-trips every dtype") {
  std::mt19937 rng(11);
  for (DType t : {DType::i8, DType::u8, DType::i16, DType::u16, DType::i32,
                  DType::u32, DType::i64, DType::f32, DType::f64}) {
    Tensor src = Tensor::zeros("sample", Axes("byx"), {2, 3, 4}, t);
    std::uniform_int_distribution<int> d(0, 255);
    for (std::byte& b : src.mutable_bytes())
      b = static_cast<std::byte>(d(rng));
    auto bytes = zrt1::encode(src);
    Tensor back = zrt1::decode(bytes);
    CHECK(back == src);
    CHECK(back.name() == "sample");
    CHECK(back.dtype() == t);
  }
}

TEST_CASE("zrt1 rejects malformed containers") {
  auto t = Tensor::from_values<float>("t", "x", {2}, {1, 2});
  auto good = zrt1::encode(t);
  // Bad magic.
  auto bad = good;
  bad[0] = std::byte{'X'};
  CHECK_THROWS_AS(zrt1::decode(bad), ParseError);
  // Truncations at several boundaries.
  for (size_t len : {size_t{0}, size_t{3}, size_t{7}, good.size() - 1})
    CHECK_THROWS_AS(
        zrt1::decode(std::span<const std::byte>(good.data(), len)),
        ParseError);
  // Trailing garbage.
  bad = good;
  bad.push_back(std::byte{0});
  CHECK_THROWS_AS(zrt1::decode(bad), ParseError);
}

TEST_CASE("zrt1 file io") {
  testsup::TempDir tmp;
  auto t = Tensor::from_values<float>("t", "yx", {2, 2}, {1, 2, 3, 4});
  const auto p = tmp.path() / "t.zrt";
  zrt1::write_file(p, t);
  CHECK(zrt1::read_file(p) == t);
  CHECK_THROWS_AS(zrt1::read_file(tmp.path() / "missing.zrt"), ParseError);
}
