#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "zoorun/model_spec.hpp"
#include "zoorun/util.hpp"

namespace zoorun::engines {

struct Version {
  int major = 0, minor = 0, patch = 0;
  static Version parse(const std::string& s);  // throws ParseError
  std::string str() const;
  auto operator<=>(const Version&) const = default;
};

// A version request: full "1.4.0", or prefix "1.4" / "1".
struct VersionRequest {
  std::optional<int> major, minor, patch;
  static VersionRequest parse(const std::string& s);
};

struct Platform {
  std::string os = "linux";
  std::string arch = "x86_64";
  bool gpu = false;
};

Platform current_platform();

struct EngineSpec {
  struct Artifact {
    std::string url;
    std::string sha256;
    std::string filename;
  };
  std::string framework;  // tensorflow | pytorch | onnx | reference
  Version version;
  std::string os = "linux";
  std::string arch = "x86_64";
  bool cpu = true;
  bool gpu = false;
  std::vector<Artifact> artifacts;

  // <framework>-<version>-<os>-<arch>-<cpu|gpu>
  std::string dir_name() const;
};

struct EngineRegistry {
  std::vector<EngineSpec> entries;
  // Parses a registry document; rejects duplicate engine tuples.
  static EngineRegistry parse(const std::string& text);
  static EngineRegistry load(const std::filesystem::path& path);
};

struct InstalledEngine {
  EngineSpec spec;
  std::filesystem::path root_dir;
  std::string manifest_sha256;
};

struct CorruptEngine {
  std::filesystem::path dir;
  std::string reason;
};

struct InstalledScan {
  std::vector<InstalledEngine> engines;
  std::vector<CorruptEngine> corrupt;
};

// Resolution order: exact version on platform, then highest patch within
// the same major.minor, then highest minor.patch within the same major.
// Prefix requests start at the corresponding rule. Throws
// NoCompatibleEngine listing nearest-miss candidates.
EngineSpec resolve_engine(const EngineRegistry& registry,
                          const std::string& framework,
                          const std::string& requested,
                          const Platform& platform);

// Atomic staged install: artifacts fetched into a staging directory, each
// sha256 verified, manifest written, staging renamed into place.
// Re-installing an intact engine is a no-op.
InstalledEngine install_engine(const EngineSpec& spec,
                               const std::filesystem::path& engines_dir,
                               Fetcher& fetcher);

InstalledScan list_installed(const std::filesystem::path& engines_dir);

// Maps weights-format tags onto engine frameworks.
std::string framework_for_weights(const std::string& tag);

struct EngineChoice {
  std::string weights_tag;
  EngineSpec spec;
  bool install_needed = false;
};

// Prefers a weights format whose engine is already installed (first such in
// descriptor order); otherwise the first descriptor-order format resolvable
// from the registry.
EngineChoice engine_for_model(const spec::ModelDescriptor& descriptor,
                              const std::vector<InstalledEngine>& installed,
                              const EngineRegistry& registry,
                              const Platform& platform);

}  // namespace zoorun::engines
