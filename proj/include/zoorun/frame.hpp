#pragma once

#include <vector>

#include "json.hpp"
#include "zoorun/tensor.hpp"

namespace zoorun::worker {

// Framed wire message: 4-byte LE length prefix covering everything after
// it, then 4-byte LE header length + compact-JSON header {op, request_id,
// meta}, then meta.tensor_count tensor blocks. Each block is a 4-byte LE
// header length + JSON {name, axes, shape, dtype} + raw little-endian
// element bytes.
struct Frame {
  nlohmann::json header;
  std::vector<Tensor> tensors;
};

// Serializes a frame; meta.tensor_count is filled in from `tensors`.
std::vector<std::byte> encode_frame(nlohmann::json header,
                                    const std::vector<Tensor>& tensors);

// Decodes a complete frame (including the length prefix). Throws
// ProtocolError on truncation, length mismatch, or malformed content.
Frame decode_frame(std::span<const std::byte> bytes);

// Body-only decode, for stream readers that already consumed the prefix.
Frame decode_frame_body(std::span<const std::byte> body);

}  // namespace zoorun::worker
