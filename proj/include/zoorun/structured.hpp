#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

namespace zoorun {

// Loads a structured-text document in YAML or JSON surface syntax into a
// JSON tree. Map key order follows the document. Throws ParseError on
// malformed input.
nlohmann::ordered_json load_document(const std::string& text);
nlohmann::ordered_json load_document_file(const std::filesystem::path& path);

}  // namespace zoorun
