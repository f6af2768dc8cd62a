#include "zoorun/tensor.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace zoorun {

namespace {

std::string shape_str(std::span<const int64_t> shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

int64_t product(std::span<const int64_t> shape) {
  int64_t n = 1;
  for (int64_t s : shape) n *= s;
  return n;
}

// Saturating numeric conversion. Float sources round half to even
// (host default rounding mode) and NaN maps to 0.
template <typename To, typename From>
To convert_value(From x) {
  if constexpr (std::is_floating_point_v<To>) {
    return static_cast<To>(x);
  } else {
    double v = static_cast<double>(x);
    if constexpr (std::is_floating_point_v<From>) {
      if (std::isnan(x)) return To{0};
      v = std::nearbyint(v);
    }
    // Exact bounds of To expressed in double; 2^63 etc. are representable.
    constexpr double lo = static_cast<double>(std::numeric_limits<To>::min());
    const double hi =
        std::ldexp(1.0, std::numeric_limits<To>::digits);  // max+1 exactly
    if (v <= lo) return std::numeric_limits<To>::min();
    if (v >= hi) return std::numeric_limits<To>::max();
    return static_cast<To>(v);
  }
}

}  // namespace

std::vector<int64_t> row_major_strides(std::span<const int64_t> shape) {
  std::vector<int64_t> strides(shape.size());
  int64_t acc = 1;
  for (size_t i = shape.size(); i-- > 0;) {
    strides[i] = acc;
    acc *= shape[i];
  }
  return strides;
}

Tensor Tensor::create(std::string name, Axes axes, std::vector<int64_t> shape,
                      DType dtype, std::span<const std::byte> data) {
  if (axes.rank() != shape.size())
    throw BadAxes("tensor '" + name + "': axes \"" + axes.str() + "\" has " +
                  std::to_string(axes.rank()) + " labels but shape " +
                  shape_str(shape) + " has rank " +
                  std::to_string(shape.size()));
  for (int64_t s : shape)
    if (s < 0)
      throw ShapeMismatch("tensor '" + name + "': negative extent in shape " +
                          shape_str(shape));
  const int64_t count = product(shape);
  const size_t expected = static_cast<size_t>(count) * byte_width(dtype);
  if (data.size() != expected)
    throw ShapeMismatch("tensor '" + name + "': buffer holds " +
                        std::to_string(data.size() / byte_width(dtype)) +
                        " elements, shape " + shape_str(shape) + " needs " +
                        std::to_string(count));
  Tensor t;
  t.name_ = std::move(name);
  t.axes_ = std::move(axes);
  t.shape_ = std::move(shape);
  t.dtype_ = dtype;
  t.data_.assign(data.begin(), data.end());
  return t;
}

Tensor Tensor::zeros(std::string name, Axes axes, std::vector<int64_t> shape,
                     DType dtype) {
  std::vector<std::byte> buf(
      static_cast<size_t>(product(shape)) * byte_width(dtype), std::byte{0});
  return create(std::move(name), std::move(axes), std::move(shape), dtype,
                buf);
}

int64_t Tensor::element_count() const { return product(shape_); }

int64_t Tensor::flat_index(std::span<const int64_t> idx) const {
  if (idx.size() != shape_.size())
    throw OutOfBounds("tensor '" + name_ + "': index rank " +
                      std::to_string(idx.size()) + " does not match shape " +
                      shape_str(shape_));
  auto strides = row_major_strides(shape_);
  int64_t flat = 0;
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= shape_[i])
      throw OutOfBounds("tensor '" + name_ + "': index " +
                        std::to_string(idx[i]) + " out of range on axis " +
                        std::to_string(i) + " of shape " + shape_str(shape_));
    flat += idx[i] * strides[i];
  }
  return flat;
}

Tensor Tensor::with_name(std::string name) const {
  Tensor t = *this;
  t.name_ = std::move(name);
  return t;
}

Tensor Tensor::reorder_axes(const Axes& target) const {
  const auto perm = axes_.permutation_to(target);  // throws if not a perm
  if (target == axes_) return *this;

  std::vector<int64_t> out_shape(rank());
  for (size_t i = 0; i < rank(); ++i) out_shape[i] = shape_[perm[i]];

  Tensor out = zeros(name_, target, out_shape, dtype_);
  const size_t width = byte_width(dtype_);
  const auto src_strides = row_major_strides(shape_);
  const int64_t n = element_count();
  const std::byte* src = data_.data();
  std::byte* dst = out.data_.data();

  // Walk destination in order, mapping each multi-index back to the source.
  std::vector<int64_t> idx(rank(), 0);
  for (int64_t flat = 0; flat < n; ++flat) {
    int64_t src_flat = 0;
    for (size_t i = 0; i < rank(); ++i)
      src_flat += idx[i] * src_strides[perm[i]];
    std::memcpy(dst + flat * width, src + src_flat * width, width);
    for (size_t i = rank(); i-- > 0;) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }
  return out;
}

Tensor Tensor::cast(DType to) const {
  if (to == dtype_) return *this;
  Tensor out = zeros(name_, axes_, shape_, to);
  dispatch_dtype(dtype_, [&](auto src_tag) {
    using From = decltype(src_tag);
    auto src = values<From>();
    dispatch_dtype(to, [&](auto dst_tag) {
      using To = decltype(dst_tag);
      auto dst = out.mutable_values<To>();
      for (size_t i = 0; i < src.size(); ++i)
        dst[i] = convert_value<To>(src[i]);
    });
  });
  return out;
}

Tensor Tensor::slice(std::span<const Range> ranges) const {
  if (ranges.size() != rank())
    throw ShapeMismatch("slice: " + std::to_string(ranges.size()) +
                        " ranges for rank " + std::to_string(rank()));
  std::vector<int64_t> out_shape(rank());
  for (size_t i = 0; i < rank(); ++i) {
    const Range& r = ranges[i];
    if (r.begin < 0 || r.end < r.begin || r.end > shape_[i])
      throw OutOfBounds("slice: axis '" + std::string(1, axes_[i]) +
                        "' range [" + std::to_string(r.begin) + "," +
                        std::to_string(r.end) + ") outside [0," +
                        std::to_string(shape_[i]) + ")");
    out_shape[i] = r.length();
  }

  Tensor out = zeros(name_, axes_, out_shape, dtype_);
  if (out.element_count() == 0) return out;

  const size_t width = byte_width(dtype_);
  const auto src_strides = row_major_strides(shape_);
  const std::byte* src = data_.data();
  std::byte* dst = out.data_.data();
  const size_t last = rank() - 1;
  const size_t row_bytes = static_cast<size_t>(out_shape[last]) * width;

  std::vector<int64_t> idx(rank(), 0);  // destination index, last axis 0
  const int64_t rows = out.element_count() / out_shape[last];
  for (int64_t row = 0; row < rows; ++row) {
    int64_t src_flat = 0;
    for (size_t i = 0; i < rank(); ++i)
      src_flat += (ranges[i].begin + idx[i]) * src_strides[i];
    std::memcpy(dst + row * static_cast<int64_t>(row_bytes),
                src + src_flat * width, row_bytes);
    for (size_t i = last; i-- > 0;) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }
  return out;
}

void Tensor::write_block(const Tensor& src, std::span<const int64_t> offsets) {
  if (src.dtype_ != dtype_)
    throw DTypeMismatch("write_block: dtype mismatch between '" + src.name_ +
                        "' and '" + name_ + "'");
  if (!(src.axes_ == axes_))
    throw BadAxes("write_block: axes order mismatch (\"" + src.axes_.str() +
                  "\" vs \"" + axes_.str() + "\")");
  if (offsets.size() != rank())
    throw ShapeMismatch("write_block: offsets rank mismatch");
  for (size_t i = 0; i < rank(); ++i) {
    if (offsets[i] < 0 || offsets[i] + src.shape_[i] > shape_[i])
      throw OutOfBounds("write_block: axis '" + std::string(1, axes_[i]) +
                        "' block [" + std::to_string(offsets[i]) + "," +
                        std::to_string(offsets[i] + src.shape_[i]) +
                        ") outside [0," + std::to_string(shape_[i]) + ")");
  }
  if (src.element_count() == 0) return;

  const size_t width = byte_width(dtype_);
  const auto dst_strides = row_major_strides(shape_);
  const std::byte* s = src.data_.data();
  std::byte* d = data_.data();
  const size_t last = rank() - 1;
  const size_t row_bytes = static_cast<size_t>(src.shape_[last]) * width;

  std::vector<int64_t> idx(rank(), 0);
  const int64_t rows = src.element_count() / src.shape_[last];
  for (int64_t row = 0; row < rows; ++row) {
    int64_t dst_flat = 0;
    for (size_t i = 0; i < rank(); ++i)
      dst_flat += (offsets[i] + idx[i]) * dst_strides[i];
    std::memcpy(d + dst_flat * width, s + row * static_cast<int64_t>(row_bytes),
                row_bytes);
    for (size_t i = last; i-- > 0;) {
      if (++idx[i] < src.shape_[i]) break;
      idx[i] = 0;
    }
  }
}

}  // namespace zoorun
