#include "zoorun/frame.hpp"

#include "zoorun/errors.hpp"

namespace zoorun::worker {

namespace {

void put_u32le(std::vector<std::byte>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xff));
}

uint32_t get_u32le(std::span<const std::byte> b, size_t at,
                   const char* what) {
  if (b.size() < at + 4)
    throw ProtocolError(std::string("frame: truncated ") + what);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<uint32_t>(std::to_integer<uint8_t>(b[at + i]))
         << (8 * i);
  return v;
}

nlohmann::json parse_json(std::span<const std::byte> b, const char* what) {
  try {
    return nlohmann::json::parse(reinterpret_cast<const char*>(b.data()),
                                 reinterpret_cast<const char*>(b.data()) +
                                     b.size());
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("frame: malformed ") + what + ": " +
                        e.what());
  }
}

}  // namespace

std::vector<std::byte> encode_frame(nlohmann::json header,
                                    const std::vector<Tensor>& tensors) {
  if (!header.is_object()) throw ProtocolError("frame: header must be a map");
  if (!header.contains("meta") || !header["meta"].is_object())
    header["meta"] = nlohmann::json::object();
  header["meta"]["tensor_count"] = tensors.size();

  std::vector<std::byte> body;
  const std::string hs = header.dump();
  put_u32le(body, static_cast<uint32_t>(hs.size()));
  for (char c : hs) body.push_back(static_cast<std::byte>(c));

  for (const Tensor& t : tensors) {
    nlohmann::json th = {{"name", t.name()},
                         {"axes", t.axes().str()},
                         {"shape", t.shape()},
                         {"dtype", dtype_name(t.dtype())}};
    const std::string ts = th.dump();
    put_u32le(body, static_cast<uint32_t>(ts.size()));
    for (char c : ts) body.push_back(static_cast<std::byte>(c));
    body.insert(body.end(), t.bytes().begin(), t.bytes().end());
  }

  std::vector<std::byte> out;
  out.reserve(4 + body.size());
  put_u32le(out, static_cast<uint32_t>(body.size()));
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

Frame decode_frame_body(std::span<const std::byte> body) {
  Frame f;
  size_t at = 0;
  const uint32_t hlen = get_u32le(body, at, "header length");
  at += 4;
  if (body.size() < at + hlen)
    throw ProtocolError("frame: truncated header");
  f.header = parse_json(body.subspan(at, hlen), "header");
  at += hlen;
  if (!f.header.is_object() || !f.header.contains("op"))
    throw ProtocolError("frame: header missing op");

  size_t count = 0;
  if (f.header.contains("meta") && f.header["meta"].is_object() &&
      f.header["meta"].contains("tensor_count")) {
    if (!f.header["meta"]["tensor_count"].is_number_unsigned())
      throw ProtocolError("frame: invalid tensor_count");
    count = f.header["meta"]["tensor_count"].get<size_t>();
  }

  for (size_t i = 0; i < count; ++i) {
    const uint32_t tlen = get_u32le(body, at, "tensor header length");
    at += 4;
    if (body.size() < at + tlen)
      throw ProtocolError("frame: truncated tensor header");
    nlohmann::json th = parse_json(body.subspan(at, tlen), "tensor header");
    at += tlen;
    try {
      auto name = th.at("name").get<std::string>();
      Axes axes(th.at("axes").get<std::string>());
      auto shape = th.at("shape").get<std::vector<int64_t>>();
      DType dtype = dtype_from_name(th.at("dtype").get<std::string>());
      int64_t elems = 1;
      for (int64_t s : shape) {
        if (s < 0) throw ProtocolError("frame: negative extent");
        elems *= s;
      }
      const size_t nbytes = static_cast<size_t>(elems) * byte_width(dtype);
      if (body.size() < at + nbytes)
        throw ProtocolError("frame: truncated tensor payload");
      f.tensors.push_back(Tensor::create(std::move(name), std::move(axes),
                                         std::move(shape), dtype,
                                         body.subspan(at, nbytes)));
      at += nbytes;
    } catch (const ProtocolError&) {
      throw;
    } catch (const std::exception& e) {
      throw ProtocolError(std::string("frame: invalid tensor block: ") +
                          e.what());
    }
  }
  if (at != body.size())
    throw ProtocolError("frame: " + std::to_string(body.size() - at) +
                        " trailing bytes");
  return f;
}

Frame decode_frame(std::span<const std::byte> bytes) {
  const uint32_t blen = get_u32le(bytes, 0, "length prefix");
  if (bytes.size() != 4 + static_cast<size_t>(blen))
    throw ProtocolError("frame: length prefix " + std::to_string(blen) +
                        " does not match body size " +
                        std::to_string(bytes.size() - 4));
  return decode_frame_body(bytes.subspan(4));
}

}  // namespace zoorun::worker
