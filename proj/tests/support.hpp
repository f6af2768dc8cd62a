#pragma once

// Shared helpers for the test binaries. Paths to the built tools and the
// generated fixture tree come in through compile definitions.

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "zoorun/engine_manager.hpp"
#include "zoorun/tensor.hpp"
#include "zoorun/util.hpp"

namespace testsup {

namespace fs = std::filesystem;

inline fs::path fixtures_dir() { return ZOORUN_FIXTURES_DIR; }
inline fs::path worker_bin() { return ZOORUN_WORKER_BIN; }
inline fs::path cli_bin() { return ZOORUN_CLI_BIN; }

// Self-deleting temp directory.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "zoorun-test-XXXXXX");
    path_ = ::mkdtemp(tmpl.data());
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

inline zoorun::engines::EngineRegistry fixture_registry() {
  return zoorun::engines::EngineRegistry::load(fixtures_dir() /
                                               "registry.json");
}

// Installs a fixture engine into `engines_dir` and returns it.
inline zoorun::engines::InstalledEngine install_fixture_engine(
    const fs::path& engines_dir, const std::string& framework,
    const std::string& version) {
  zoorun::DefaultFetcher fetcher;
  auto spec = zoorun::engines::resolve_engine(
      fixture_registry(), framework, version, zoorun::engines::Platform{});
  return zoorun::engines::install_engine(spec, engines_dir, fetcher);
}

inline std::vector<float> pattern_f32(size_t n) {
  std::vector<float> v(n);
  for (size_t i = 0; i < n; ++i)
    v[i] = static_cast<float>(((i * 37) % 101) / 10.0 - 5.0);
  return v;
}

inline std::vector<double> random_f64(std::mt19937& rng, size_t n, double lo,
                                      double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

// A fetcher that delegates to file:// reads but throws after `limit` bytes
// have been streamed; used to simulate interrupted downloads.
class FaultyFetcher : public zoorun::Fetcher {
 public:
  explicit FaultyFetcher(size_t limit) : limit_(limit) {}
  void fetch(const std::string& url, const Sink& sink) override {
    zoorun::DefaultFetcher inner;
    inner.fetch(url, [&](std::span<const std::byte> chunk) {
      if (sent_ + chunk.size() > limit_) {
        const size_t keep = limit_ > sent_ ? limit_ - sent_ : 0;
        if (keep > 0) sink(chunk.subspan(0, keep));
        sent_ = limit_;
        throw zoorun::FetchError("injected fault after " +
                                 std::to_string(limit_) + " bytes");
      }
      sent_ += chunk.size();
      sink(chunk);
    });
  }

 private:
  size_t limit_;
  size_t sent_ = 0;
};

}  // namespace testsup
