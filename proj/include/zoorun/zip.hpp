#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace zoorun::zip {

struct Entry {
  std::string name;
  std::vector<std::byte> data;
};

// Builds a zip archive with stored (uncompressed) entries.
std::vector<std::byte> create(const std::vector<Entry>& entries);

// Extracts all entries; supports stored and deflate members and verifies
// CRCs. Throws UnpackError on malformed archives.
std::vector<Entry> extract(std::span<const std::byte> archive);

void extract_to_dir(std::span<const std::byte> archive,
                    const std::filesystem::path& dir);

}  // namespace zoorun::zip
