#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "zoorun/util.hpp"

namespace zoorun::zoo {

struct CollectionRecord {
  std::string id;
  std::string name;
  std::vector<std::string> tags;
  std::string download_url;
  std::string sha256;
  std::string description;
};

struct CollectionIndex {
  std::vector<CollectionRecord> records;

  const CollectionRecord* find(const std::string& id) const;
};

// Fetches and validates a collection index document. Model ids must be
// unique.
CollectionIndex load_index(const std::string& source, Fetcher& fetcher);

// Case-insensitive substring match over name and tags, ordered by id.
// An empty query matches everything.
std::vector<CollectionRecord> search(const CollectionIndex& index,
                                     const std::string& query);

struct DownloadResult {
  std::filesystem::path model_dir;
  bool cached = false;
};

// Fetches the model archive, verifies its sha256, unpacks it atomically
// into dest_dir/<id>/ (staging + rename), and validates the bundled
// rdf.yaml. Re-downloading an intact model is a no-op.
DownloadResult download_model(const CollectionRecord& record,
                              const std::filesystem::path& dest_dir,
                              Fetcher& fetcher);

}  // namespace zoorun::zoo
