#include "zoorun/engine_manager.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "zoorun/errors.hpp"
#include "zoorun/structured.hpp"

namespace zoorun::engines {

namespace fs = std::filesystem;

namespace {

std::vector<int> split_numeric(const std::string& s, const char* what,
                               size_t max_parts) {
  std::vector<int> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, '.')) {
    if (item.empty() ||
        !std::all_of(item.begin(), item.end(),
                     [](char c) { return c >= '0' && c <= '9'; }))
      throw ParseError(std::string(what) + ": invalid version '" + s + "'");
    parts.push_back(std::stoi(item));
  }
  if (parts.empty() || parts.size() > max_parts)
    throw ParseError(std::string(what) + ": invalid version '" + s + "'");
  return parts;
}

bool platform_matches(const EngineSpec& e, const Platform& p) {
  if (e.os != p.os || e.arch != p.arch) return false;
  return p.gpu ? e.gpu : e.cpu;
}

const EngineSpec* highest(const std::vector<const EngineSpec*>& specs) {
  const EngineSpec* best = nullptr;
  for (const EngineSpec* s : specs)
    if (!best || s->version > best->version) best = s;
  return best;
}

std::string manifest_name() { return "manifest.json"; }

nlohmann::json spec_to_json(const EngineSpec& s) {
  nlohmann::json arts = nlohmann::json::array();
  for (const auto& a : s.artifacts)
    arts.push_back(
        {{"url", a.url}, {"sha256", a.sha256}, {"filename", a.filename}});
  return {{"framework", s.framework}, {"version", s.version.str()},
          {"os", s.os},               {"arch", s.arch},
          {"cpu", s.cpu},             {"gpu", s.gpu},
          {"artifacts", arts}};
}

EngineSpec spec_from_json(const nlohmann::ordered_json& j,
                          const std::string& path) {
  EngineSpec s;
  try {
    s.framework = j.at("framework").get<std::string>();
    s.version = Version::parse(j.at("version").get<std::string>());
    s.os = j.at("os").get<std::string>();
    s.arch = j.at("arch").get<std::string>();
    s.cpu = j.at("cpu").get<bool>();
    s.gpu = j.at("gpu").get<bool>();
    if (!s.cpu && !s.gpu)
      throw SchemaError(path + ": at least one of cpu/gpu must be true");
    for (const auto& aj : j.at("artifacts")) {
      EngineSpec::Artifact a;
      a.url = aj.at("url").get<std::string>();
      a.sha256 = aj.at("sha256").get<std::string>();
      a.filename = aj.at("filename").get<std::string>();
      if (!spec::is_sha256_hex(a.sha256))
        throw SchemaError(path + ": artifact sha256 must be 64 lowercase hex");
      if (a.filename.find('/') != std::string::npos)
        throw SchemaError(path + ": artifact filename must be a plain name");
      s.artifacts.push_back(std::move(a));
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path + ": " + e.what());
  }
  return s;
}

// Verifies a final engine directory against its manifest.
InstalledEngine verify_installed(const fs::path& dir) {
  const fs::path mpath = dir / manifest_name();
  if (!fs::exists(mpath))
    throw ChecksumMismatch("missing manifest: " + mpath.string());
  nlohmann::ordered_json manifest;
  try {
    std::ifstream f(mpath);
    manifest = nlohmann::ordered_json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw ChecksumMismatch("unreadable manifest: " + mpath.string() + ": " +
                           e.what());
  }
  InstalledEngine ie;
  ie.spec = spec_from_json(manifest, mpath.string());
  ie.root_dir = dir;
  for (const auto& a : ie.spec.artifacts) {
    const fs::path f = dir / a.filename;
    if (!fs::exists(f))
      throw ChecksumMismatch("missing artifact: " + f.string());
    const std::string h = sha256_hex_file(f);
    if (h != a.sha256)
      throw ChecksumMismatch("sha256 mismatch for " + f.string() +
                             ": expected " + a.sha256 + ", got " + h);
  }
  ie.manifest_sha256 = sha256_hex_file(mpath);
  return ie;
}

}  // namespace

Version Version::parse(const std::string& s) {
  auto parts = split_numeric(s, "version", 3);
  if (parts.size() != 3)
    throw ParseError("version: expected major.minor.patch, got '" + s + "'");
  return {parts[0], parts[1], parts[2]};
}

std::string Version::str() const {
  return std::to_string(major) + "." + std::to_string(minor) + "." +
         std::to_string(patch);
}

VersionRequest VersionRequest::parse(const std::string& s) {
  VersionRequest r;
  if (s.empty()) return r;
  auto parts = split_numeric(s, "version request", 3);
  r.major = parts[0];
  if (parts.size() > 1) r.minor = parts[1];
  if (parts.size() > 2) r.patch = parts[2];
  return r;
}

Platform current_platform() { return {}; }

std::string EngineSpec::dir_name() const {
  return framework + "-" + version.str() + "-" + os + "-" + arch + "-" +
         (gpu ? "gpu" : "cpu");
}

EngineRegistry EngineRegistry::parse(const std::string& text) {
  nlohmann::ordered_json doc = load_document(text);
  if (!doc.is_object() || !doc.contains("engines") ||
      !doc["engines"].is_array())
    throw SchemaError("registry: expected a map with an engines list");
  EngineRegistry reg;
  std::set<std::string> seen;
  for (size_t i = 0; i < doc["engines"].size(); ++i) {
    EngineSpec s = spec_from_json(doc["engines"][i],
                                  "engines[" + std::to_string(i) + "]");
    const std::string key = s.dir_name();
    if (!seen.insert(key).second)
      throw SchemaError("registry: duplicate engine entry " + key);
    reg.entries.push_back(std::move(s));
  }
  return reg;
}

EngineRegistry EngineRegistry::load(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("registry: cannot open: " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

EngineSpec resolve_engine(const EngineRegistry& registry,
                          const std::string& framework,
                          const std::string& requested,
                          const Platform& platform) {
  const VersionRequest req = VersionRequest::parse(requested);
  std::vector<const EngineSpec*> candidates;
  std::vector<const EngineSpec*> same_framework;
  for (const EngineSpec& e : registry.entries) {
    if (e.framework != framework) continue;
    same_framework.push_back(&e);
    if (platform_matches(e, platform)) candidates.push_back(&e);
  }
  auto no_match = [&]() -> NoCompatibleEngine {
    std::string msg = "no compatible engine for " + framework + " " +
                      (requested.empty() ? "(any)" : requested) + " on " +
                      platform.os + "/" + platform.arch +
                      (platform.gpu ? "/gpu" : "/cpu");
    if (!same_framework.empty()) {
      msg += "; nearest candidates:";
      for (const EngineSpec* e : same_framework)
        msg += " " + e->dir_name();
    }
    return NoCompatibleEngine(msg);
  };

  if (!req.major) {  // no constraint: highest available
    const EngineSpec* best = highest(candidates);
    if (!best) throw no_match();
    return *best;
  }

  // Rule 1: exact version.
  if (req.patch) {
    for (const EngineSpec* e : candidates)
      if (e->version == Version{*req.major, *req.minor, *req.patch}) return *e;
  }
  // Rule 2: same major.minor, highest patch.
  if (req.minor) {
    std::vector<const EngineSpec*> mm;
    for (const EngineSpec* e : candidates)
      if (e->version.major == *req.major && e->version.minor == *req.minor)
        mm.push_back(e);
    if (const EngineSpec* best = highest(mm)) return *best;
  }
  // Rule 3: same major, highest minor.patch.
  std::vector<const EngineSpec*> m;
  for (const EngineSpec* e : candidates)
    if (e->version.major == *req.major) m.push_back(e);
  if (const EngineSpec* best = highest(m)) return *best;
  throw no_match();
}

InstalledEngine install_engine(const EngineSpec& spec,
                               const fs::path& engines_dir, Fetcher& fetcher) {
  fs::create_directories(engines_dir);
  const std::string name = spec.dir_name();
  const fs::path final_dir = engines_dir / name;

  FileLock lock(engines_dir / (name + ".lock"));

  if (fs::exists(final_dir)) {
    try {
      return verify_installed(final_dir);  // intact: no-op reinstall
    } catch (const ChecksumMismatch&) {
      fs::remove_all(final_dir);  // corrupt leftovers: rebuild
    }
  }

  const fs::path staging = engines_dir / ("." + name + ".staging");
  fs::remove_all(staging);
  fs::create_directories(staging);
  try {
    for (const auto& a : spec.artifacts) {
      const fs::path dest = staging / a.filename;
      std::ofstream out(dest, std::ios::binary);
      if (!out) throw FetchError("cannot write " + dest.string());
      Sha256 hash;
      fetcher.fetch(a.url, [&](std::span<const std::byte> chunk) {
        hash.update(chunk);
        out.write(reinterpret_cast<const char*>(chunk.data()),
                  static_cast<std::streamsize>(chunk.size()));
      });
      out.close();
      const std::string got = hash.hex();
      if (got != a.sha256)
        throw ChecksumMismatch("artifact " + a.filename + " from " + a.url +
                               ": expected " + a.sha256 + ", got " + got);
    }
    // The engine's worker binary must be runnable after install.
    for (const auto& a : spec.artifacts)
      if (a.filename == "worker")
        fs::permissions(staging / a.filename,
                        fs::perms::owner_all | fs::perms::group_read |
                            fs::perms::group_exec | fs::perms::others_read |
                            fs::perms::others_exec);
    const std::string manifest = spec_to_json(spec).dump(2) + "\n";
    write_file_bytes(staging / manifest_name(),
                     std::as_bytes(std::span<const char>(manifest)));
    fs::rename(staging, final_dir);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(staging, ec);
    throw;
  }
  return verify_installed(final_dir);
}

InstalledScan list_installed(const fs::path& engines_dir) {
  InstalledScan scan;
  if (!fs::exists(engines_dir)) return scan;
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(engines_dir)) {
    if (!entry.is_directory()) continue;
    if (entry.path().filename().string().rfind('.', 0) == 0) continue;
    dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  for (const fs::path& dir : dirs) {
    try {
      scan.engines.push_back(verify_installed(dir));
    } catch (const Error& e) {
      scan.corrupt.push_back({dir, e.what()});
    }
  }
  return scan;
}

std::string framework_for_weights(const std::string& tag) {
  if (tag == "tensorflow_saved_model_bundle") return "tensorflow";
  if (tag == "torchscript") return "pytorch";
  if (tag == "onnx") return "onnx";
  if (tag == "reference_graph") return "reference";
  // tensorflow_js has no native engine; keep it distinct so resolution
  // fails cleanly.
  return tag;
}

EngineChoice engine_for_model(const spec::ModelDescriptor& descriptor,
                              const std::vector<InstalledEngine>& installed,
                              const EngineRegistry& registry,
                              const Platform& platform) {
  const auto formats = spec::weights_formats(descriptor);

  // Pass 1: first descriptor-order format with a compatible installed engine.
  for (const auto& wf : formats) {
    EngineRegistry local;
    for (const InstalledEngine& ie : installed)
      if (ie.spec.framework == framework_for_weights(wf.tag))
        local.entries.push_back(ie.spec);
    if (local.entries.empty()) continue;
    try {
      EngineSpec s = resolve_engine(local, framework_for_weights(wf.tag),
                                    wf.engine_version_hint, platform);
      return {wf.tag, s, false};
    } catch (const NoCompatibleEngine&) {
    }
  }
  // Pass 2: first descriptor-order format resolvable from the registry.
  std::string first_error;
  for (const auto& wf : formats) {
    try {
      EngineSpec s = resolve_engine(registry, framework_for_weights(wf.tag),
                                    wf.engine_version_hint, platform);
      return {wf.tag, s, true};
    } catch (const NoCompatibleEngine& e) {
      if (first_error.empty()) first_error = e.what();
    }
  }
  throw NoCompatibleEngine("model '" + descriptor.name +
                           "': no weights format is runnable (" + first_error +
                           ")");
}

}  // namespace zoorun::engines
