#include "zoorun/dtype.hpp"

#include <array>
#include <utility>

#include "zoorun/errors.hpp"

namespace zoorun {

namespace {

constexpr std::array<std::pair<DType, const char*>, 9> kWireNames{{
    {DType::i8, "i8"},
    {DType::u8, "u8"},
    {DType::i16, "i16"},
    {DType::u16, "u16"},
    {DType::i32, "i32"},
    {DType::u32, "u32"},
    {DType::i64, "i64"},
    {DType::f32, "f32"},
    {DType::f64, "f64"},
}};

constexpr std::array<std::pair<DType, const char*>, 9> kDescriptorNames{{
    {DType::i8, "int8"},
    {DType::u8, "uint8"},
    {DType::i16, "int16"},
    {DType::u16, "uint16"},
    {DType::i32, "int32"},
    {DType::u32, "uint32"},
    {DType::i64, "int64"},
    {DType::f32, "float32"},
    {DType::f64, "float64"},
}};

template <size_t N>
std::string name_of(const std::array<std::pair<DType, const char*>, N>& table,
                    DType t) {
  for (const auto& [tag, name] : table)
    if (tag == t) return name;
  throw DTypeMismatch("unknown dtype tag");
}

template <size_t N>
DType tag_of(const std::array<std::pair<DType, const char*>, N>& table,
             const std::string& name, const char* what) {
  for (const auto& [tag, n] : table)
    if (name == n) return tag;
  throw ParseError(std::string("unknown ") + what + " dtype name: " + name);
}

}  // namespace

std::string dtype_name(DType t) { return name_of(kWireNames, t); }

DType dtype_from_name(const std::string& name) {
  return tag_of(kWireNames, name, "wire");
}

std::string dtype_descriptor_name(DType t) {
  return name_of(kDescriptorNames, t);
}

DType dtype_from_descriptor_name(const std::string& name) {
  return tag_of(kDescriptorNames, name, "descriptor");
}

}  // namespace zoorun
