#pragma once

#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "zoorun/axes.hpp"
#include "zoorun/dtype.hpp"
#include "zoorun/errors.hpp"

namespace zoorun {

// Half-open per-axis interval [begin, end).
struct Range {
  int64_t begin = 0;
  int64_t end = 0;
  int64_t length() const { return end - begin; }
};

// Named-axes, row-major N-D array with explicit dtype. Values are immutable
// after construction except through write_block, which mutates its target
// exclusively. Last axis varies fastest; serialized byte order is
// little-endian (this implementation assumes a little-endian host).
class Tensor {
 public:
  Tensor() = default;

  // Takes a copy of `data`, which must hold product(shape) elements.
  static Tensor create(std::string name, Axes axes, std::vector<int64_t> shape,
                       DType dtype, std::span<const std::byte> data);

  // Zero-filled tensor of the given geometry.
  static Tensor zeros(std::string name, Axes axes, std::vector<int64_t> shape,
                      DType dtype);

  template <typename T>
  static Tensor from_values(std::string name, const std::string& axes,
                            std::vector<int64_t> shape,
                            const std::vector<T>& values) {
    return create(std::move(name), Axes(axes), std::move(shape),
                  dtype_of<T>::value,
                  std::as_bytes(std::span<const T>(values)));
  }

  const std::string& name() const { return name_; }
  const Axes& axes() const { return axes_; }
  const std::vector<int64_t>& shape() const { return shape_; }
  DType dtype() const { return dtype_; }
  size_t rank() const { return shape_.size(); }
  int64_t element_count() const;
  size_t byte_size() const { return data_.size(); }
  std::span<const std::byte> bytes() const { return data_; }
  std::span<std::byte> mutable_bytes() { return data_; }

  template <typename T>
  std::span<const T> values() const {
    check_type<T>();
    return {reinterpret_cast<const T*>(data_.data()),
            static_cast<size_t>(element_count())};
  }
  template <typename T>
  std::span<T> mutable_values() {
    check_type<T>();
    return {reinterpret_cast<T*>(data_.data()),
            static_cast<size_t>(element_count())};
  }

  // Row-major flat offset of a multi-index.
  int64_t flat_index(std::span<const int64_t> idx) const;

  template <typename T>
  T at(std::initializer_list<int64_t> idx) const {
    std::vector<int64_t> v(idx);
    return values<T>()[flat_index(v)];
  }

  Tensor with_name(std::string name) const;

  // Permutes data so axes read `target`; target must be a permutation.
  Tensor reorder_axes(const Axes& target) const;

  // Elementwise conversion. float->int rounds half to even then saturates;
  // NaN maps to 0.
  Tensor cast(DType to) const;

  // Copies the sub-tensor covered by per-axis half-open ranges.
  Tensor slice(std::span<const Range> ranges) const;

  // Overwrites the block at `offsets` with src; axes order and dtype must
  // match and the block must fit.
  void write_block(const Tensor& src, std::span<const int64_t> offsets);

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.axes_ == b.axes_ && a.shape_ == b.shape_ &&
           a.dtype_ == b.dtype_ && a.data_ == b.data_;
  }

 private:
  template <typename T>
  void check_type() const {
    if (dtype_of<T>::value != dtype_)
      throw DTypeMismatch("tensor '" + name_ + "': element type mismatch");
  }

  std::string name_;
  Axes axes_;
  std::vector<int64_t> shape_;
  DType dtype_ = DType::f64;
  std::vector<std::byte> data_;
};

// Row-major element strides for a shape.
std::vector<int64_t> row_major_strides(std::span<const int64_t> shape);

}  // namespace zoorun
