// zoorun command line: engine management, model collection access, and
// model execution.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "zoorun/engine_manager.hpp"
#include "zoorun/errors.hpp"
#include "zoorun/model_spec.hpp"
#include "zoorun/runner.hpp"
#include "zoorun/util.hpp"
#include "zoorun/zoo_client.hpp"
#include "zoorun/zrt1.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace zoorun;

namespace {

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

struct Cli {
  std::string registry;
  std::string engines_dir;
  std::string models_dir;
  std::string index;
  bool json_out = false;

  runner::Environment environment() const {
    runner::Environment env;
    env.engines_dir = engines_dir;
    env.registry_path = registry;
    env.platform = engines::current_platform();
    return env;
  }
};

// `run`/`test-model`/`models info` accept either a model directory or a
// collection id resolved under the models dir.
fs::path resolve_model_dir(const Cli& cli, const std::string& ref) {
  if (fs::exists(fs::path(ref) / "rdf.yaml")) return ref;
  const fs::path by_id = fs::path(cli.models_dir) / ref;
  if (fs::exists(by_id / "rdf.yaml")) return by_id;
  throw Error(ErrorClass::Usage,
              "'" + ref + "' is neither a model directory nor a downloaded "
              "collection id (searched " + by_id.string() + ")");
}

// --tile accepts "y=256,x=256" pairs or one bare number for every spatial
// axis.
std::map<char, int64_t> parse_tile_arg(const std::string& arg) {
  std::map<char, int64_t> extents;
  size_t pos = 0;
  while (pos <= arg.size()) {
    size_t comma = arg.find(',', pos);
    std::string item =
        arg.substr(pos, comma == std::string::npos ? comma : comma - pos);
    if (item.empty())
      throw Error(ErrorClass::Usage, "--tile: empty item in '" + arg + "'");
    size_t eq = item.find('=');
    try {
      if (eq == std::string::npos) {
        const int64_t n = std::stoll(item);
        for (char l : {'z', 'y', 'x'}) extents[l] = n;
      } else {
        if (eq != 1 || !Axes::spatial(item[0]))
          throw Error(ErrorClass::Usage,
                      "--tile: expected z=, y= or x= in '" + item + "'");
        extents[item[0]] = std::stoll(item.substr(eq + 1));
      }
    } catch (const std::invalid_argument&) {
      throw Error(ErrorClass::Usage, "--tile: bad number in '" + item + "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  for (const auto& [l, n] : extents)
    if (n <= 0)
      throw Error(ErrorClass::Usage, "--tile: extent for '" +
                                         std::string(1, l) +
                                         "' must be positive");
  return extents;
}

engines::EngineRegistry load_registry(const Cli& cli) {
  if (cli.registry.empty())
    throw Error(ErrorClass::Usage,
                "no engine registry: pass --registry or set ZOORUN_REGISTRY");
  return engines::EngineRegistry::load(cli.registry);
}

zoo::CollectionIndex load_collection(const Cli& cli, Fetcher& fetcher) {
  if (cli.index.empty())
    throw Error(ErrorClass::Usage,
                "no collection index: pass --index or set ZOORUN_INDEX");
  return zoo::load_index(cli.index, fetcher);
}

int cmd_engines_list(const Cli& cli) {
  auto scan = engines::list_installed(cli.engines_dir);
  if (cli.json_out) {
    json out{{"engines", json::array()}, {"corrupt", json::array()}};
    for (const auto& e : scan.engines)
      out["engines"].push_back({{"framework", e.spec.framework},
                                {"version", e.spec.version.str()},
                                {"dir", e.spec.dir_name()}});
    for (const auto& c : scan.corrupt)
      out["corrupt"].push_back(
          {{"dir", c.dir.filename().string()}, {"reason", c.reason}});
    std::cout << out.dump(2) << "\n";
    return 0;
  }
  for (const auto& e : scan.engines) std::cout << e.spec.dir_name() << "\n";
  for (const auto& c : scan.corrupt)
    std::cerr << "corrupt: " << c.dir.filename().string() << " (" << c.reason
              << ")\n";
  return 0;
}

int cmd_engines_resolve(const Cli& cli, const std::string& framework,
                        const std::string& version) {
  auto spec = engines::resolve_engine(load_registry(cli), framework, version,
                                      engines::current_platform());
  if (cli.json_out)
    std::cout << json{{"framework", spec.framework},
                      {"version", spec.version.str()},
                      {"dir", spec.dir_name()}}
                     .dump(2)
              << "\n";
  else
    std::cout << spec.framework << " " << spec.version.str() << "\n";
  return 0;
}

int cmd_engines_install(const Cli& cli, const std::string& framework,
                        const std::string& version) {
  DefaultFetcher fetcher;
  auto spec = engines::resolve_engine(load_registry(cli), framework, version,
                                      engines::current_platform());
  auto installed = engines::install_engine(spec, cli.engines_dir, fetcher);
  if (cli.json_out)
    std::cout << json{{"dir", installed.spec.dir_name()},
                      {"root", installed.root_dir.string()}}
                     .dump(2)
              << "\n";
  else
    std::cout << "installed " << installed.spec.dir_name() << " at "
              << installed.root_dir.string() << "\n";
  return 0;
}

int cmd_models_search(const Cli& cli, const std::string& query) {
  DefaultFetcher fetcher;
  auto hits = zoo::search(load_collection(cli, fetcher), query);
  if (cli.json_out) {
    json out = json::array();
    for (const auto& r : hits)
      out.push_back(
          {{"id", r.id}, {"name", r.name}, {"tags", r.tags}});
    std::cout << out.dump(2) << "\n";
    return 0;
  }
  for (const auto& r : hits) std::cout << r.id << "\t" << r.name << "\n";
  return 0;
}

int cmd_models_download(const Cli& cli, const std::string& id) {
  DefaultFetcher fetcher;
  auto index = load_collection(cli, fetcher);
  const zoo::CollectionRecord* rec = index.find(id);
  if (!rec)
    throw Error(ErrorClass::Usage, "no model '" + id + "' in the index");
  auto result = zoo::download_model(*rec, cli.models_dir, fetcher);
  if (cli.json_out)
    std::cout << json{{"model_dir", result.model_dir.string()},
                      {"cached", result.cached}}
                     .dump(2)
              << "\n";
  else
    std::cout << result.model_dir.string() << (result.cached ? " (cached)" : "")
              << "\n";
  return 0;
}

int cmd_models_info(const Cli& cli, const std::string& ref) {
  const fs::path dir = resolve_model_dir(cli, ref);
  auto d = spec::parse_model_descriptor_file(dir / "rdf.yaml");
  if (cli.json_out) {
    std::cout << d.emit() << "\n";
    return 0;
  }
  std::cout << d.name << " (format " << d.format_version << ")\n";
  for (const auto& in : d.inputs)
    std::cout << "input  " << in.name << " axes=" << in.axes.str()
              << " dtype=" << dtype_name(in.data_type) << "\n";
  for (const auto& out : d.outputs)
    std::cout << "output " << out.name << " axes=" << out.axes.str()
              << " dtype=" << dtype_name(out.data_type) << "\n";
  std::cout << "weights:";
  for (const auto& f : spec::weights_formats(d)) std::cout << " " << f.tag;
  std::cout << "\n";
  for (const auto& w : d.warnings) std::cerr << "warning: " << w << "\n";
  return 0;
}

int cmd_run(const Cli& cli, const std::string& ref,
            const std::vector<std::string>& input_files,
            const std::string& output_dir, const std::string& tile_arg,
            bool no_tiling, bool no_install) {
  const fs::path dir = resolve_model_dir(cli, ref);
  std::vector<Tensor> inputs;
  for (const std::string& f : input_files) inputs.push_back(zrt1::read_file(f));

  runner::RunOptions opts;
  if (!tile_arg.empty()) opts.tile = parse_tile_arg(tile_arg);
  opts.no_tiling = no_tiling;
  opts.no_install = no_install;

  auto result = runner::run_model(dir, inputs, opts, cli.environment());

  fs::create_directories(output_dir);
  json written = json::array();
  for (const Tensor& t : result.outputs) {
    const fs::path out = fs::path(output_dir) / (t.name() + ".zrt");
    zrt1::write_file(out, t);
    written.push_back(out.string());
  }
  if (cli.json_out) {
    std::cout << json{{"engine", result.engine.spec.dir_name()},
                      {"tiled", result.tiled},
                      {"outputs", written},
                      {"notes", result.notes}}
                     .dump(2)
              << "\n";
  } else {
    for (const auto& n : result.notes) std::cerr << n << "\n";
    std::cout << "engine: " << result.engine.spec.dir_name()
              << (result.tiled ? " (tiled)" : "") << "\n";
    for (const auto& w : written) std::cout << w.get<std::string>() << "\n";
  }
  return 0;
}

int cmd_test_model(const Cli& cli, const std::string& ref, bool no_install) {
  const fs::path dir = resolve_model_dir(cli, ref);
  runner::RunOptions opts;
  opts.no_install = no_install;
  auto report = runner::test_model(dir, opts, cli.environment());
  if (cli.json_out) {
    json out{{"pass", report.pass},
             {"notes", report.notes},
             {"outputs", json::array()}};
    for (const auto& v : report.verdicts)
      out["outputs"].push_back({{"name", v.output_name},
                                {"pass", v.pass},
                                {"max_abs_diff", v.max_abs_diff},
                                {"note", v.note}});
    std::cout << out.dump(2) << "\n";
  } else {
    for (const auto& n : report.notes) std::cerr << n << "\n";
    for (const auto& v : report.verdicts)
      std::cout << (v.pass ? "PASS " : "FAIL ") << v.output_name
                << (v.note.empty() ? "" : " (" + v.note + ")") << "\n";
    std::cout << (report.pass ? "model test passed" : "model test FAILED")
              << "\n";
  }
  return report.pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"framework-agnostic model runner"};
  app.require_subcommand(1);

  Cli cli;
  cli.registry = env_or("ZOORUN_REGISTRY", "");
  cli.engines_dir = env_or("ZOORUN_ENGINES", "engines");
  cli.models_dir = env_or("ZOORUN_MODELS", "models");
  cli.index = env_or("ZOORUN_INDEX", "");
  app.add_option("--registry", cli.registry, "engine registry file");
  app.add_option("--engines-dir", cli.engines_dir,
                 "directory for installed engines");
  app.add_option("--models-dir", cli.models_dir,
                 "directory for downloaded models");
  app.add_option("--index", cli.index, "model collection index (file or URL)");
  app.add_flag("--json", cli.json_out, "machine-readable output");

  auto* engines_cmd = app.add_subcommand("engines", "manage engines");
  engines_cmd->require_subcommand(1);
  engines_cmd->add_subcommand("list", "list installed engines");
  std::string fw, ver;
  auto* resolve_cmd =
      engines_cmd->add_subcommand("resolve", "resolve a version request");
  resolve_cmd->add_option("framework", fw)->required();
  resolve_cmd->add_option("version", ver)->default_val("");
  auto* install_cmd =
      engines_cmd->add_subcommand("install", "install an engine");
  install_cmd->add_option("framework", fw)->required();
  install_cmd->add_option("version", ver)->default_val("");

  auto* models_cmd = app.add_subcommand("models", "browse the collection");
  models_cmd->require_subcommand(1);
  std::string query, model_ref;
  auto* search_cmd = models_cmd->add_subcommand("search", "search the index");
  search_cmd->add_option("query", query)->default_val("");
  auto* download_cmd =
      models_cmd->add_subcommand("download", "download a model");
  download_cmd->add_option("id", model_ref)->required();
  auto* info_cmd = models_cmd->add_subcommand("info", "describe a model");
  info_cmd->add_option("model", model_ref)->required();

  std::vector<std::string> input_files;
  std::string output_dir = "out", tile_arg;
  bool no_tiling = false, no_install = false;
  auto* run_cmd = app.add_subcommand("run", "run a model on tensors");
  run_cmd->add_option("model", model_ref)->required();
  run_cmd->add_option("--input", input_files, "input tensor file (.zrt)")
      ->required();
  run_cmd->add_option("--output", output_dir, "output directory");
  run_cmd->add_option("--tile", tile_arg, "tile extents, e.g. y=256,x=256");
  run_cmd->add_flag("--no-tiling", no_tiling, "never tile");
  run_cmd->add_flag("--no-install", no_install, "fail instead of installing");

  auto* test_cmd =
      app.add_subcommand("test-model", "run a model against its bundled data");
  test_cmd->add_option("model", model_ref)->required();
  test_cmd->add_flag("--no-install", no_install, "fail instead of installing");

  // Let global options (--json, --registry, ...) appear after subcommands.
  for (CLI::App* sub :
       {engines_cmd, models_cmd, resolve_cmd, install_cmd, search_cmd,
        download_cmd, info_cmd, run_cmd, test_cmd,
        engines_cmd->get_subcommand("list")})
    sub->fallthrough();

  try {
    app.parse(argc, argv);
    if (engines_cmd->got_subcommand("list")) return cmd_engines_list(cli);
    if (engines_cmd->got_subcommand("resolve"))
      return cmd_engines_resolve(cli, fw, ver);
    if (engines_cmd->got_subcommand("install"))
      return cmd_engines_install(cli, fw, ver);
    if (models_cmd->got_subcommand("search"))
      return cmd_models_search(cli, query);
    if (models_cmd->got_subcommand("download"))
      return cmd_models_download(cli, model_ref);
    if (models_cmd->got_subcommand("info"))
      return cmd_models_info(cli, model_ref);
    if (app.got_subcommand("run"))
      return cmd_run(cli, model_ref, input_files, output_dir, tile_arg,
                     no_tiling, no_install);
    if (app.got_subcommand("test-model"))
      return cmd_test_model(cli, model_ref, no_install);
    return 1;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
