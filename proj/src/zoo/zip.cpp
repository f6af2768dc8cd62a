#include "zoorun/zip.hpp"

#include <cstring>
#include <fstream>

#include <zlib.h>

#include "zoorun/errors.hpp"
#include "zoorun/util.hpp"

namespace zoorun::zip {

namespace {

constexpr uint32_t kLocalSig = 0x04034b50;
constexpr uint32_t kCentralSig = 0x02014b50;
constexpr uint32_t kEocdSig = 0x06054b50;

void put16(std::vector<std::byte>& out, uint16_t v) {
  out.push_back(static_cast<std::byte>(v & 0xff));
  out.push_back(static_cast<std::byte>(v >> 8));
}

void put32(std::vector<std::byte>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xff));
}

uint16_t get16(std::span<const std::byte> b, size_t at) {
  if (b.size() < at + 2) throw UnpackError("zip: truncated");
  return static_cast<uint16_t>(std::to_integer<uint8_t>(b[at]) |
                               (std::to_integer<uint8_t>(b[at + 1]) << 8));
}

uint32_t get32(std::span<const std::byte> b, size_t at) {
  if (b.size() < at + 4) throw UnpackError("zip: truncated");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<uint32_t>(std::to_integer<uint8_t>(b[at + i])) << (8 * i);
  return v;
}

uint32_t crc_of(std::span<const std::byte> data) {
  return static_cast<uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(data.data()),
            static_cast<uInt>(data.size())));
}

std::vector<std::byte> inflate_raw(std::span<const std::byte> comp,
                                   size_t uncomp_size) {
  std::vector<std::byte> out(uncomp_size);
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK)
    throw UnpackError("zip: inflateInit failed");
  zs.next_in = const_cast<Bytef*>(reinterpret_cast<const Bytef*>(comp.data()));
  zs.avail_in = static_cast<uInt>(comp.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || zs.total_out != uncomp_size)
    throw UnpackError("zip: deflate stream corrupt");
  return out;
}

}  // namespace

std::vector<std::byte> create(const std::vector<Entry>& entries) {
  std::vector<std::byte> out;
  struct CentralRecord {
    std::string name;
    uint32_t crc, size, offset;
  };
  std::vector<CentralRecord> central;

  for (const Entry& e : entries) {
    const auto offset = static_cast<uint32_t>(out.size());
    const uint32_t crc = crc_of(e.data);
    put32(out, kLocalSig);
    put16(out, 20);  // version needed
    put16(out, 0);   // flags
    put16(out, 0);   // method: stored
    put16(out, 0);   // mod time
    put16(out, 0);   // mod date
    put32(out, crc);
    put32(out, static_cast<uint32_t>(e.data.size()));
    put32(out, static_cast<uint32_t>(e.data.size()));
    put16(out, static_cast<uint16_t>(e.name.size()));
    put16(out, 0);  // extra len
    for (char c : e.name) out.push_back(static_cast<std::byte>(c));
    out.insert(out.end(), e.data.begin(), e.data.end());
    central.push_back({e.name, crc, static_cast<uint32_t>(e.data.size()),
                       offset});
  }

  const auto cd_start = static_cast<uint32_t>(out.size());
  for (const CentralRecord& r : central) {
    put32(out, kCentralSig);
    put16(out, 20);  // version made by
    put16(out, 20);  // version needed
    put16(out, 0);   // flags
    put16(out, 0);   // method
    put16(out, 0);   // time
    put16(out, 0);   // date
    put32(out, r.crc);
    put32(out, r.size);
    put32(out, r.size);
    put16(out, static_cast<uint16_t>(r.name.size()));
    put16(out, 0);  // extra
    put16(out, 0);  // comment
    put16(out, 0);  // disk
    put16(out, 0);  // internal attrs
    put32(out, 0);  // external attrs
    put32(out, r.offset);
    for (char c : r.name) out.push_back(static_cast<std::byte>(c));
  }
  const auto cd_size = static_cast<uint32_t>(out.size()) - cd_start;

  put32(out, kEocdSig);
  put16(out, 0);
  put16(out, 0);
  put16(out, static_cast<uint16_t>(central.size()));
  put16(out, static_cast<uint16_t>(central.size()));
  put32(out, cd_size);
  put32(out, cd_start);
  put16(out, 0);  // comment length
  return out;
}

std::vector<Entry> extract(std::span<const std::byte> archive) {
  if (archive.size() < 22) throw UnpackError("zip: too small");
  // Find the end-of-central-directory record (no archive comment expected,
  // but scan backwards a bit to be safe).
  size_t eocd = std::string::npos;
  const size_t scan_limit =
      archive.size() >= 22 + 65536 ? archive.size() - 22 - 65536 : 0;
  for (size_t at = archive.size() - 22; at + 1 > scan_limit; --at) {
    if (get32(archive, at) == kEocdSig) {
      eocd = at;
      break;
    }
    if (at == 0) break;
  }
  if (eocd == std::string::npos)
    throw UnpackError("zip: end-of-central-directory not found");

  const uint16_t count = get16(archive, eocd + 10);
  const uint32_t cd_start = get32(archive, eocd + 16);

  std::vector<Entry> entries;
  size_t at = cd_start;
  for (uint16_t i = 0; i < count; ++i) {
    if (get32(archive, at) != kCentralSig)
      throw UnpackError("zip: bad central directory record");
    const uint16_t method = get16(archive, at + 10);
    const uint32_t crc = get32(archive, at + 16);
    const uint32_t comp_size = get32(archive, at + 20);
    const uint32_t uncomp_size = get32(archive, at + 24);
    const uint16_t name_len = get16(archive, at + 28);
    const uint16_t extra_len = get16(archive, at + 30);
    const uint16_t comment_len = get16(archive, at + 32);
    const uint32_t local_off = get32(archive, at + 42);
    if (archive.size() < at + 46 + name_len)
      throw UnpackError("zip: truncated central name");
    std::string name(reinterpret_cast<const char*>(archive.data()) + at + 46,
                     name_len);
    at += 46 + name_len + extra_len + comment_len;

    if (get32(archive, local_off) != kLocalSig)
      throw UnpackError("zip: bad local header for " + name);
    const uint16_t lname = get16(archive, local_off + 26);
    const uint16_t lextra = get16(archive, local_off + 28);
    const size_t data_at = local_off + 30 + lname + lextra;
    if (archive.size() < data_at + comp_size)
      throw UnpackError("zip: truncated data for " + name);
    auto comp = archive.subspan(data_at, comp_size);

    Entry e;
    e.name = name;
    if (method == 0) {
      e.data.assign(comp.begin(), comp.end());
    } else if (method == 8) {
      e.data = inflate_raw(comp, uncomp_size);
    } else {
      throw UnpackError("zip: unsupported method " + std::to_string(method) +
                        " for " + name);
    }
    if (crc_of(e.data) != crc)
      throw UnpackError("zip: CRC mismatch for " + name);
    entries.push_back(std::move(e));
  }
  return entries;
}

void extract_to_dir(std::span<const std::byte> archive,
                    const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  for (const Entry& e : extract(archive)) {
    if (e.name.find("..") != std::string::npos ||
        (!e.name.empty() && e.name[0] == '/'))
      throw UnpackError("zip: unsafe entry name " + e.name);
    const fs::path dest = dir / e.name;
    fs::create_directories(dest.parent_path());
    write_file_bytes(dest, e.data);
  }
}

}  // namespace zoorun::zip
