#include "zoorun/structured.hpp"

#include <fstream>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "zoorun/errors.hpp"

namespace zoorun {

namespace {

nlohmann::ordered_json yaml_to_json(const YAML::Node& node) {
  switch (node.Type()) {
    case YAML::NodeType::Null:
      return nullptr;
    case YAML::NodeType::Scalar: {
      // Quoted scalars keep their string identity; plain scalars are
      // resolved as int, float, bool, then string.
      if (node.Tag() == "!") return node.Scalar();
      const std::string& s = node.Scalar();
      try {
        if (s.find_first_of(".eE") == std::string::npos) {
          size_t pos = 0;
          int64_t v = std::stoll(s, &pos);
          if (pos == s.size()) return v;
        }
      } catch (...) {
      }
      try {
        size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos == s.size()) return v;
      } catch (...) {
      }
      if (s == "true" || s == "True") return true;
      if (s == "false" || s == "False") return false;
      if (s == "null" || s == "~" || s.empty()) return nullptr;
      return s;
    }
    case YAML::NodeType::Sequence: {
      nlohmann::ordered_json arr = nlohmann::ordered_json::array();
      for (const auto& item : node) arr.push_back(yaml_to_json(item));
      return arr;
    }
    case YAML::NodeType::Map: {
      nlohmann::ordered_json obj = nlohmann::ordered_json::object();
      for (const auto& kv : node)
        obj[kv.first.as<std::string>()] = yaml_to_json(kv.second);
      return obj;
    }
    default:
      throw ParseError("document: undefined node");
  }
}

}  // namespace

nlohmann::ordered_json load_document(const std::string& text) {
  // JSON first: strict, and a JSON document is not always valid YAML for
  // yaml-cpp's parser.
  try {
    return nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::exception&) {
  }
  try {
    YAML::Node root = YAML::Load(text);
    return yaml_to_json(root);
  } catch (const YAML::Exception& e) {
    throw ParseError(std::string("document: not valid YAML or JSON: ") +
                     e.what());
  }
}

nlohmann::ordered_json load_document_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("document: cannot open: " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return load_document(ss.str());
}

}  // namespace zoorun
