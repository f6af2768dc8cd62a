#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace zoorun {

enum class DType : uint8_t { i8, u8, i16, u16, i32, u32, i64, f32, f64 };

constexpr size_t byte_width(DType t) {
  switch (t) {
    case DType::i8:
    case DType::u8:
      return 1;
    case DType::i16:
    case DType::u16:
      return 2;
    case DType::i32:
    case DType::u32:
    case DType::f32:
      return 4;
    case DType::i64:
    case DType::f64:
      return 8;
  }
  return 0;
}

constexpr bool is_float(DType t) { return t == DType::f32 || t == DType::f64; }

// Short wire names ("i8".."f64") used by ZRT1 and the worker protocol.
std::string dtype_name(DType t);
DType dtype_from_name(const std::string& name);

// Descriptor-surface names ("int8".."float64") used in rdf documents.
std::string dtype_descriptor_name(DType t);
DType dtype_from_descriptor_name(const std::string& name);

template <typename T>
struct dtype_of;
template <> struct dtype_of<int8_t>   { static constexpr DType value = DType::i8; };
template <> struct dtype_of<uint8_t>  { static constexpr DType value = DType::u8; };
template <> struct dtype_of<int16_t>  { static constexpr DType value = DType::i16; };
template <> struct dtype_of<uint16_t> { static constexpr DType value = DType::u16; };
template <> struct dtype_of<int32_t>  { static constexpr DType value = DType::i32; };
template <> struct dtype_of<uint32_t> { static constexpr DType value = DType::u32; };
template <> struct dtype_of<int64_t>  { static constexpr DType value = DType::i64; };
template <> struct dtype_of<float>    { static constexpr DType value = DType::f32; };
template <> struct dtype_of<double>   { static constexpr DType value = DType::f64; };

// Invokes f with a value of the concrete element type for dtype t.
template <typename F>
decltype(auto) dispatch_dtype(DType t, F&& f) {
  switch (t) {
    case DType::i8:  return f(int8_t{});
    case DType::u8:  return f(uint8_t{});
    case DType::i16: return f(int16_t{});
    case DType::u16: return f(uint16_t{});
    case DType::i32: return f(int32_t{});
    case DType::u32: return f(uint32_t{});
    case DType::i64: return f(int64_t{});
    case DType::f32: return f(float{});
    case DType::f64: return f(double{});
  }
  return f(double{});  // unreachable
}

}  // namespace zoorun
