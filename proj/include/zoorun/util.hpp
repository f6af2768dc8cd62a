#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace zoorun {

std::string sha256_hex(std::span<const std::byte> data);
std::string sha256_hex_file(const std::filesystem::path& path);

// Incremental hasher for streamed downloads.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;
  void update(std::span<const std::byte> data);
  std::string hex();  // finalizes

 private:
  void* ctx_;
};

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path,
                      std::span<const std::byte> data);

// Retrieval seam for registries, engine artifacts, and model archives.
// Supports file:// and https:// URLs; tests use file:// fixtures.
class Fetcher {
 public:
  using Sink = std::function<void(std::span<const std::byte>)>;
  virtual ~Fetcher() = default;
  // Streams the content of url into sink; throws FetchError.
  virtual void fetch(const std::string& url, const Sink& sink) = 0;
  std::vector<std::byte> fetch_bytes(const std::string& url);
};

class DefaultFetcher : public Fetcher {
 public:
  void fetch(const std::string& url, const Sink& sink) override;
};

// Held for the lifetime of an install; throws AlreadyInstalling when the
// lock is already taken by another process.
class FileLock {
 public:
  explicit FileLock(const std::filesystem::path& path);
  ~FileLock();
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_ = -1;
};

}  // namespace zoorun
