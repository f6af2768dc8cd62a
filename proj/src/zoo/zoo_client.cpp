#include "zoorun/zoo_client.hpp"

#include <algorithm>
#include <set>

#include "zoorun/errors.hpp"
#include "zoorun/model_spec.hpp"
#include "zoorun/structured.hpp"
#include "zoorun/zip.hpp"

namespace zoorun::zoo {

namespace fs = std::filesystem;

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

const CollectionRecord* CollectionIndex::find(const std::string& id) const {
  for (const CollectionRecord& r : records)
    if (r.id == id) return &r;
  return nullptr;
}

CollectionIndex load_index(const std::string& source, Fetcher& fetcher) {
  auto bytes = fetcher.fetch_bytes(source);
  nlohmann::ordered_json doc;
  try {
    doc = load_document(
        std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  } catch (const Error&) {
    throw ParseError("index: malformed document at " + source);
  }
  if (!doc.is_object() || !doc.contains("models") || !doc["models"].is_array())
    throw ParseError("index: expected a map with a models list");

  CollectionIndex index;
  std::set<std::string> ids;
  for (size_t i = 0; i < doc["models"].size(); ++i) {
    const auto& m = doc["models"][i];
    const std::string path = "models[" + std::to_string(i) + "]";
    try {
      CollectionRecord r;
      r.id = m.at("id").get<std::string>();
      r.name = m.at("name").get<std::string>();
      if (m.contains("tags"))
        r.tags = m["tags"].get<std::vector<std::string>>();
      r.download_url = m.at("download_url").get<std::string>();
      r.sha256 = m.at("sha256").get<std::string>();
      if (m.contains("description"))
        r.description = m["description"].get<std::string>();
      if (!spec::is_sha256_hex(r.sha256))
        throw ParseError("index: " + path +
                         ".sha256: expected 64 lowercase hex characters");
      if (!ids.insert(r.id).second)
        throw ParseError("index: duplicate model id '" + r.id + "'");
      index.records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("index: " + path + ": " + e.what());
    }
  }
  return index;
}

std::vector<CollectionRecord> search(const CollectionIndex& index,
                                     const std::string& query) {
  const std::string q = lower(query);
  std::vector<CollectionRecord> hits;
  for (const CollectionRecord& r : index.records) {
    bool match = q.empty() || lower(r.name).find(q) != std::string::npos;
    for (const std::string& tag : r.tags)
      match = match || lower(tag).find(q) != std::string::npos;
    if (match) hits.push_back(r);
  }
  std::sort(hits.begin(), hits.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  return hits;
}

DownloadResult download_model(const CollectionRecord& record,
                              const fs::path& dest_dir, Fetcher& fetcher) {
  fs::create_directories(dest_dir);
  const fs::path final_dir = dest_dir / record.id;

  FileLock lock(dest_dir / (record.id + ".lock"));

  if (fs::exists(final_dir / "rdf.yaml")) return {final_dir, true};

  std::vector<std::byte> archive;
  Sha256 hash;
  fetcher.fetch(record.download_url, [&](std::span<const std::byte> chunk) {
    hash.update(chunk);
    archive.insert(archive.end(), chunk.begin(), chunk.end());
  });
  const std::string got = hash.hex();
  if (got != record.sha256)
    throw ChecksumMismatch("model archive " + record.id + ": expected " +
                           record.sha256 + ", got " + got);

  const fs::path staging = dest_dir / ("." + record.id + ".staging");
  fs::remove_all(staging);
  fs::create_directories(staging);
  try {
    zip::extract_to_dir(archive, staging);
    if (!fs::exists(staging / "rdf.yaml"))
      throw UnpackError("model archive " + record.id + " lacks rdf.yaml");
    // Reject archives whose descriptor does not validate.
    spec::parse_model_descriptor_file(staging / "rdf.yaml");
    fs::remove_all(final_dir);
    fs::rename(staging, final_dir);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(staging, ec);
    throw;
  }
  return {final_dir, false};
}

}  // namespace zoorun::zoo
