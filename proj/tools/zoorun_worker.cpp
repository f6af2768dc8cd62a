// Engine worker: hosts one loaded model and serves LOAD/RUN/CLOSE/PING
// frames over stdin/stdout. Spawned by the runner as `worker --serve` from
// inside an installed engine directory.

#include <unistd.h>

#include <cstring>
#include <iostream>
#include <optional>

#include "zoorun/errors.hpp"
#include "zoorun/frame.hpp"
#include "zoorun/ref_graph.hpp"

using namespace zoorun;

namespace {

// Reads exactly n bytes from stdin; returns false on clean EOF at a frame
// boundary.
bool read_exact(std::byte* dst, size_t n) {
  size_t off = 0;
  while (off < n) {
    ssize_t r = ::read(STDIN_FILENO, dst + off, n - off);
    if (r < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError("worker: stdin read failed");
    }
    if (r == 0) {
      if (off == 0) return false;
      throw ProtocolError("worker: stdin closed mid-frame");
    }
    off += static_cast<size_t>(r);
  }
  return true;
}

std::optional<worker::Frame> read_frame() {
  std::byte prefix[4];
  if (!read_exact(prefix, 4)) return std::nullopt;
  uint32_t blen = 0;
  for (int i = 0; i < 4; ++i)
    blen |= static_cast<uint32_t>(std::to_integer<uint8_t>(prefix[i]))
            << (8 * i);
  std::vector<std::byte> body(blen);
  if (blen > 0 && !read_exact(body.data(), blen))
    throw ProtocolError("worker: truncated frame body");
  return worker::decode_frame_body(body);
}

void write_frame(nlohmann::json header, const std::vector<Tensor>& tensors) {
  auto bytes = worker::encode_frame(std::move(header), tensors);
  size_t off = 0;
  while (off < bytes.size()) {
    ssize_t n = ::write(STDOUT_FILENO, bytes.data() + off, bytes.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      std::exit(1);  // parent went away
    }
    off += static_cast<size_t>(n);
  }
}

void reply_ack(int64_t rid, const std::vector<Tensor>& tensors = {}) {
  write_frame({{"op", "ACK"}, {"request_id", rid}}, tensors);
}

void reply_nack(int64_t rid, const std::string& message) {
  write_frame(
      {{"op", "NACK"}, {"request_id", rid}, {"meta", {{"message", message}}}},
      {});
}

int serve() {
  std::optional<refengine::RefGraph> graph;
  while (true) {
    std::optional<worker::Frame> frame;
    try {
      frame = read_frame();
    } catch (const Error& e) {
      std::cerr << "worker: " << e.what() << std::endl;
      return 1;
    }
    if (!frame) return 0;  // parent closed our stdin

    const std::string op = frame->header.value("op", std::string());
    const int64_t rid = frame->header.value("request_id", int64_t{0});
    try {
      if (op == "PING") {
        reply_ack(rid);
      } else if (op == "LOAD") {
        const auto& meta = frame->header.at("meta");
        const std::string tag = meta.at("weights_tag").get<std::string>();
        if (tag != "reference_graph") {
          reply_nack(rid, "unsupported weights format '" + tag +
                              "' in this engine");
          continue;
        }
        graph = refengine::parse_graph_file(
            meta.at("weights_path").get<std::string>());
        reply_ack(rid);
      } else if (op == "RUN") {
        if (!graph) {
          reply_nack(rid, "no model loaded");
          continue;
        }
        reply_ack(rid, refengine::run_graph(*graph, frame->tensors));
      } else if (op == "CLOSE") {
        reply_ack(rid);
        return 0;
      } else {
        reply_nack(rid, "unknown op '" + op + "'");
      }
    } catch (const std::exception& e) {
      reply_nack(rid, e.what());
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 1; i < argc; ++i)
    if (std::strcmp(argv[i], "--serve") == 0) return serve();
  std::cerr << "usage: worker --serve" << std::endl;
  return 1;
}
