#include "zoorun/util.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <fstream>

#include <openssl/evp.h>

#include "httplib.h"
#include "zoorun/errors.hpp"

namespace zoorun {

namespace {

std::string digest_to_hex(const unsigned char* digest, size_t len) {
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (size_t i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

}  // namespace

Sha256::Sha256() : ctx_(EVP_MD_CTX_new()) {
  EVP_DigestInit_ex(static_cast<EVP_MD_CTX*>(ctx_), EVP_sha256(), nullptr);
}

Sha256::~Sha256() { EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_)); }

void Sha256::update(std::span<const std::byte> data) {
  EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), data.data(), data.size());
}

std::string Sha256::hex() {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), digest, &len);
  return digest_to_hex(digest, len);
}

std::string sha256_hex(std::span<const std::byte> data) {
  Sha256 h;
  h.update(data);
  return h.hex();
}

std::string sha256_hex_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FetchError("cannot open for hashing: " + path.string());
  Sha256 h;
  char buf[1 << 16];
  while (f) {
    f.read(buf, sizeof(buf));
    h.update(std::as_bytes(
        std::span<const char>(buf, static_cast<size_t>(f.gcount()))));
  }
  return h.hex();
}

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FetchError("cannot open: " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(f)),
                        std::istreambuf_iterator<char>());
  auto b = std::as_bytes(std::span<const char>(raw));
  return {b.begin(), b.end()};
}

void write_file_bytes(const std::filesystem::path& path,
                      std::span<const std::byte> data) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FetchError("cannot open for writing: " + path.string());
  f.write(reinterpret_cast<const char*>(data.data()),
          static_cast<std::streamsize>(data.size()));
  if (!f) throw FetchError("write failed: " + path.string());
}

std::vector<std::byte> Fetcher::fetch_bytes(const std::string& url) {
  std::vector<std::byte> out;
  fetch(url, [&](std::span<const std::byte> chunk) {
    out.insert(out.end(), chunk.begin(), chunk.end());
  });
  return out;
}

void DefaultFetcher::fetch(const std::string& url, const Sink& sink) {
  // Strings without a scheme are treated as local paths.
  if (url.rfind("file://", 0) == 0 || url.find("://") == std::string::npos) {
    const std::filesystem::path path =
        url.rfind("file://", 0) == 0 ? url.substr(7) : url;
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FetchError("file not found: " + url);
    char buf[1 << 16];
    while (f) {
      f.read(buf, sizeof(buf));
      if (f.gcount() > 0)
        sink(std::as_bytes(
            std::span<const char>(buf, static_cast<size_t>(f.gcount()))));
    }
    return;
  }
  if (url.rfind("https://", 0) == 0) {
    const auto host_end = url.find('/', 8);
    const std::string host = url.substr(0, host_end);
    const std::string path =
        host_end == std::string::npos ? "/" : url.substr(host_end);
    httplib::Client client(host);
    auto res = client.Get(path, [&](const char* data, size_t len) {
      sink(std::as_bytes(std::span<const char>(data, len)));
      return true;
    });
    if (!res || res->status != 200)
      throw FetchError("https fetch failed: " + url);
    return;
  }
  throw FetchError("unsupported URL scheme: " + url);
}

FileLock::FileLock(const std::filesystem::path& path) {
  fd_ = ::open(path.c_str(), O_CREAT | O_RDWR, 0644);
  if (fd_ < 0) throw FetchError("cannot open lock file: " + path.string());
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw AlreadyInstalling("lock held: " + path.string());
  }
}

FileLock::~FileLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

}  // namespace zoorun
