#include "zoorun/zrt1.hpp"

#include <fstream>

#include "json.hpp"
#include "zoorun/errors.hpp"

namespace zoorun::zrt1 {

namespace {

constexpr char kMagic[4] = {'Z', 'R', 'T', '1'};

void put_u32le(std::vector<std::byte>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xff));
}

uint32_t get_u32le(std::span<const std::byte> b) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<uint32_t>(std::to_integer<uint8_t>(b[i])) << (8 * i);
  return v;
}

}  // namespace

std::vector<std::byte> encode(const Tensor& t) {
  nlohmann::json header = {
      {"name", t.name()},
      {"axes", t.axes().str()},
      {"shape", t.shape()},
      {"dtype", dtype_name(t.dtype())},
  };
  const std::string hs = header.dump();
  std::vector<std::byte> out;
  out.reserve(8 + hs.size() + t.byte_size());
  for (char c : kMagic) out.push_back(static_cast<std::byte>(c));
  put_u32le(out, static_cast<uint32_t>(hs.size()));
  for (char c : hs) out.push_back(static_cast<std::byte>(c));
  out.insert(out.end(), t.bytes().begin(), t.bytes().end());
  return out;
}

Tensor decode(std::span<const std::byte> bytes) {
  if (bytes.size() < 8) throw ParseError("ZRT1: truncated header");
  for (int i = 0; i < 4; ++i)
    if (std::to_integer<char>(bytes[i]) != kMagic[i])
      throw ParseError("ZRT1: bad magic");
  const uint32_t hlen = get_u32le(bytes.subspan(4));
  if (bytes.size() < 8 + static_cast<size_t>(hlen))
    throw ParseError("ZRT1: truncated header body");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(
        reinterpret_cast<const char*>(bytes.data()) + 8,
        reinterpret_cast<const char*>(bytes.data()) + 8 + hlen);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("ZRT1: malformed header: ") + e.what());
  }
  try {
    auto name = header.at("name").get<std::string>();
    Axes axes(header.at("axes").get<std::string>());
    auto shape = header.at("shape").get<std::vector<int64_t>>();
    DType dtype = dtype_from_name(header.at("dtype").get<std::string>());
    auto payload = bytes.subspan(8 + hlen);
    int64_t count = 1;
    for (int64_t s : shape) count *= s;
    const size_t expected = static_cast<size_t>(count) * byte_width(dtype);
    if (payload.size() < expected) throw ParseError("ZRT1: truncated payload");
    if (payload.size() > expected)
      throw ParseError("ZRT1: trailing bytes after payload");
    return Tensor::create(std::move(name), std::move(axes), std::move(shape),
                          dtype, payload);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("ZRT1: invalid header field: ") + e.what());
  }
}

void write_file(const std::filesystem::path& path, const Tensor& t) {
  auto bytes = encode(t);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ParseError("ZRT1: cannot open for writing: " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw ParseError("ZRT1: write failed: " + path.string());
}

Tensor read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("ZRT1: cannot open: " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(f)),
                        std::istreambuf_iterator<char>());
  return decode(std::as_bytes(std::span<const char>(raw)));
}

}  // namespace zoorun::zrt1
