#pragma once

#include <filesystem>
#include <vector>

#include "zoorun/tensor.hpp"

namespace zoorun::zrt1 {

// ZRT1 tensor container: magic "ZRT1", 4-byte LE header length, JSON header
// {name, axes, shape, dtype}, then raw little-endian element bytes.
std::vector<std::byte> encode(const Tensor& t);
Tensor decode(std::span<const std::byte> bytes);

void write_file(const std::filesystem::path& path, const Tensor& t);
Tensor read_file(const std::filesystem::path& path);

}  // namespace zoorun::zrt1
