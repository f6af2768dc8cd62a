// Generates the on-disk fixture tree used by the test suites: an engine
// registry backed by file:// artifacts (the real worker binary plus
// placeholder payloads), a handful of runnable models with bundled test
// tensors, zipped model archives, and a collection index. Checksums are
// computed from the actual bytes, so the tree is valid wherever it is
// generated.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "zoorun/model_spec.hpp"
#include "zoorun/processing.hpp"
#include "zoorun/ref_graph.hpp"
#include "zoorun/tensor.hpp"
#include "zoorun/util.hpp"
#include "zoorun/zip.hpp"
#include "zoorun/zrt1.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace zoorun;

namespace {

std::string file_url(const fs::path& p) {
  return "file://" + fs::absolute(p).string();
}

void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  f << text;
}

// Deterministic pseudo-data in roughly [-5, 5.1); avoids RNG so the same
// tree (and the same checksums for a given worker binary) appears on every
// run.
std::vector<float> pattern(size_t n) {
  std::vector<float> v(n);
  for (size_t i = 0; i < n; ++i)
    v[i] = static_cast<float>(((i * 37) % 101) / 10.0 - 5.0);
  return v;
}

json engine_entry(const std::string& framework, const std::string& version,
                  const std::vector<std::pair<std::string, fs::path>>& files) {
  json arts = json::array();
  for (const auto& [filename, path] : files)
    arts.push_back({{"url", file_url(path)},
                    {"sha256", sha256_hex_file(path)},
                    {"filename", filename}});
  return {{"framework", framework}, {"version", version},
          {"os", "linux"},          {"arch", "x86_64"},
          {"cpu", true},            {"gpu", false},
          {"artifacts", arts}};
}

// Mirrors the runner pipeline without an engine process: preprocess each
// input, run the interpreted graph, rename and postprocess each output.
std::vector<Tensor> expected_outputs(const spec::ModelDescriptor& d,
                                     const refengine::RefGraph& graph,
                                     const std::vector<Tensor>& raw_inputs) {
  proc::ProcContext ctx;
  std::vector<Tensor> pre;
  for (size_t i = 0; i < d.inputs.size(); ++i)
    pre.push_back(proc::apply_chain(d.inputs[i].processing,
                                    raw_inputs[i].with_name(d.inputs[i].name),
                                    ctx, d.inputs[i].data_type)
                      .with_name(d.inputs[i].name));
  std::vector<Tensor> raw = refengine::run_graph(graph, pre);
  std::vector<Tensor> outs;
  for (size_t o = 0; o < d.outputs.size(); ++o) {
    Tensor t = raw[o].with_name(d.outputs[o].name);
    outs.push_back(proc::apply_chain(d.outputs[o].processing, t, ctx,
                                     d.outputs[o].data_type)
                       .with_name(d.outputs[o].name));
  }
  return outs;
}

struct ModelFixture {
  std::string id;
  std::string name;
  std::vector<std::string> tags;
  fs::path dir;
};

// Completes a model directory that already holds weights.refgraph: runs the
// pipeline on `input`, writes the ZRT1 test tensors, and writes rdf.yaml
// from `descriptor_template` after substituting @SHA_W@ / @SHA_IN@ /
// @SHA_OUT@.
void finish_model(const fs::path& dir, const std::string& descriptor_template,
                  const Tensor& input) {
  const std::string wsha = sha256_hex_file(dir / "weights.refgraph");

  auto subst = [](std::string& s, const std::string& key,
                  const std::string& value) {
    for (size_t p; (p = s.find(key)) != std::string::npos;)
      s.replace(p, key.size(), value);
  };
  // Parse once with placeholder hashes to get a descriptor we can execute.
  std::string probe = descriptor_template;
  subst(probe, "@SHA_W@", wsha);
  subst(probe, "@SHA_IN@", std::string(64, '0'));
  subst(probe, "@SHA_OUT@", std::string(64, '0'));
  spec::ModelDescriptor d = spec::parse_model_descriptor(probe);

  auto graph = refengine::parse_graph_file(dir / "weights.refgraph");
  std::vector<Tensor> outs = expected_outputs(d, graph, {input});

  zrt1::write_file(dir / "test_input_0.zrt", input.with_name(d.inputs[0].name));
  zrt1::write_file(dir / "test_output_0.zrt", outs[0]);

  std::string final_text = descriptor_template;
  subst(final_text, "@SHA_W@", wsha);
  subst(final_text, "@SHA_IN@", sha256_hex_file(dir / "test_input_0.zrt"));
  subst(final_text, "@SHA_OUT@", sha256_hex_file(dir / "test_output_0.zrt"));
  write_text(dir / "rdf.yaml", final_text);
  spec::parse_model_descriptor_file(dir / "rdf.yaml");  // self-check
}

// JSON-surface descriptor template shared by the non-YAML fixtures.
std::string json_descriptor(const std::string& name, const json& input,
                            const json& output) {
  json d = {{"name", name},
            {"format_version", "0.4.0"},
            {"weights",
             {{"reference_graph",
               {{"source", "weights.refgraph"}, {"sha256", "@SHA_W@"}}}}},
            {"inputs", json::array({input})},
            {"outputs", json::array({output})},
            {"test_inputs", json::array({{{"source", "test_input_0.zrt"},
                                          {"sha256", "@SHA_IN@"}}})},
            {"test_outputs", json::array({{{"source", "test_output_0.zrt"},
                                           {"sha256", "@SHA_OUT@"}}})}};
  return d.dump(2) + "\n";
}

json param_input(const std::string& name, const json& extra = json::object()) {
  json in = {{"name", name},
             {"axes", "byxc"},
             {"data_type", "float32"},
             {"shape", {{"min", {1, 4, 4, 1}}, {"step", {0, 1, 1, 1}}}}};
  for (const auto& [k, v] : extra.items()) in[k] = v;
  return in;
}

json implicit_output(const std::string& name, const std::string& ref,
                     const json& extra = json::object()) {
  json out = {{"name", name},
              {"axes", "byxc"},
              {"data_type", "float32"},
              {"shape",
               {{"reference_input", ref},
                {"scale", {1, 1, 1, 1}},
                {"offset", {0, 0, 0, 0}}}}};
  for (const auto& [k, v] : extra.items()) out[k] = v;
  return out;
}

void zip_dir(const fs::path& dir, const fs::path& archive) {
  std::vector<zip::Entry> entries;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    entries.push_back({fs::relative(e.path(), dir).generic_string(),
                       read_file_bytes(e.path())});
  }
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.name < b.name; });
  auto bytes = zip::create(entries);
  fs::create_directories(archive.parent_path());
  write_file_bytes(archive, bytes);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"generate the test fixture tree"};
  std::string worker_path, out_dir;
  app.add_option("--worker", worker_path, "path to the built worker binary")
      ->required();
  app.add_option("--out", out_dir, "output directory")->required();
  CLI11_PARSE(app, argc, argv);

  try {
    const fs::path out(out_dir);
    const fs::path files = out / "files";
    fs::create_directories(files);

    // ---- engine registry ------------------------------------------------
    fs::copy_file(worker_path, files / "worker",
                  fs::copy_options::overwrite_existing);
    fs::permissions(files / "worker",
                    fs::perms::owner_all | fs::perms::group_read |
                        fs::perms::group_exec | fs::perms::others_read |
                        fs::perms::others_exec);

    json engines = json::array();
    auto placeholder = [&](const std::string& fw, const std::string& ver) {
      const fs::path p = files / (fw + "-" + ver + "-info.json");
      write_text(p, json{{"framework", fw}, {"version", ver}}.dump() + "\n");
      engines.push_back(engine_entry(fw, ver, {{"engine-info.json", p}}));
    };
    for (const std::string& ver : {"1.0.0", "2.0.0"}) {
      const fs::path info = files / ("reference-" + ver + "-info.json");
      write_text(info,
                 json{{"framework", "reference"}, {"version", ver}}.dump() +
                     "\n");
      engines.push_back(engine_entry(
          "reference", ver,
          {{"worker", files / "worker"}, {"engine-info.json", info}}));
    }
    placeholder("pytorch", "1.4.0");
    placeholder("pytorch", "1.7.1");
    placeholder("pytorch", "1.13.1");
    placeholder("onnx", "1.3.0");
    placeholder("onnx", "1.9.0");
    placeholder("tensorflow", "1.15.5");
    placeholder("tensorflow", "2.7.0");
    write_text(out / "registry.json",
               json{{"engines", engines}}.dump(2) + "\n");

    // ---- models ---------------------------------------------------------
    std::vector<ModelFixture> models;
    const fs::path msrc = out / "models-src";

    {  // identity pass-through; descriptor written in YAML surface syntax
      const fs::path dir = msrc / "ref-identity";
      write_text(dir / "weights.refgraph",
                 json{{"inputs", {"input"}},
                      {"outputs", {"input"}},
                      {"ops", json::array()}}
                     .dump(2) +
                     "\n");
      const std::string yaml = R"(name: identity pass-through
format_version: 0.4.0
weights:
  reference_graph:
    source: weights.refgraph
    sha256: "@SHA_W@"
inputs:
  - name: input
    axes: byxc
    data_type: float32
    shape:
      min: [1, 4, 4, 1]
      step: [0, 1, 1, 1]
outputs:
  - name: output
    axes: byxc
    data_type: float32
    shape:
      reference_input: input
      scale: [1, 1, 1, 1]
      offset: [0, 0, 0, 0]
test_inputs:
  - source: test_input_0.zrt
    sha256: "@SHA_IN@"
test_outputs:
  - source: test_output_0.zrt
    sha256: "@SHA_OUT@"
)";
      finish_model(dir, yaml,
                   Tensor::from_values<float>("input", "byxc", {1, 8, 8, 1},
                                              pattern(64)));
      models.push_back({"ref-identity",
                        "identity pass-through",
                        {"identity", "segmentation"},
                        dir});
    }

    {  // 3x3 box blur with a declared one-pixel halo
      const fs::path dir = msrc / "ref-blur";
      write_text(dir / "weights.refgraph",
                 json{{"inputs", {"image"}},
                      {"outputs", {"blurred"}},
                      {"ops",
                       json::array({{{"kind", "blur3"},
                                     {"input", "image"},
                                     {"output", "blurred"}}})}}
                     .dump(2) +
                     "\n");
      finish_model(
          dir,
          json_descriptor("box blur",
                          param_input("image"),
                          implicit_output("blurred", "image",
                                          {{"halo", {0, 1, 1, 0}}})),
          Tensor::from_values<float>("image", "byxc", {1, 16, 16, 1},
                                     pattern(256)));
      models.push_back({"ref-blur", "box blur", {"blur", "denoising"}, dir});
    }

    {  // affine+relu with normalization before and sigmoid after
      const fs::path dir = msrc / "ref-affine";
      write_text(dir / "weights.refgraph",
                 json{{"inputs", {"raw"}},
                      {"outputs", {"act"}},
                      {"ops",
                       json::array({{{"kind", "affine"},
                                     {"input", "raw"},
                                     {"output", "t1"},
                                     {"a", 2.0},
                                     {"b", 1.0}},
                                    {{"kind", "relu"},
                                     {"input", "t1"},
                                     {"output", "act"}}})}}
                     .dump(2) +
                     "\n");
      json in = param_input(
          "raw",
          {{"preprocessing",
            json::array({{{"name", "zero_mean_unit_variance"},
                          {"kwargs", {{"mode", "per_sample"}}}}})}});
      json outj = implicit_output(
          "act", "raw",
          {{"postprocessing",
            json::array({{{"name", "sigmoid"}, {"kwargs", json::object()}}})}});
      finish_model(dir, json_descriptor("affine relu", in, outj),
                   Tensor::from_values<float>("raw", "byxc", {1, 8, 8, 1},
                                              pattern(64)));
      models.push_back(
          {"ref-affine", "affine relu", {"affine", "nuclei"}, dir});
    }

    {  // 2x2 average pool, output half the input size
      const fs::path dir = msrc / "ref-pool";
      write_text(dir / "weights.refgraph",
                 json{{"inputs", {"image"}},
                      {"outputs", {"pooled"}},
                      {"ops",
                       json::array({{{"kind", "avgpool2"},
                                     {"input", "image"},
                                     {"output", "pooled"}}})}}
                     .dump(2) +
                     "\n");
      json in = param_input("image");
      in["shape"] = {{"min", {1, 4, 4, 1}}, {"step", {0, 2, 2, 0}}};
      json outj = implicit_output("pooled", "image");
      outj["shape"]["scale"] = {1, 0.5, 0.5, 1};
      finish_model(dir, json_descriptor("average pool", in, outj),
                   Tensor::from_values<float>("image", "byxc", {1, 8, 8, 1},
                                              pattern(64)));
      models.push_back(
          {"ref-pool", "average pool", {"pool", "downsample"}, dir});
    }

    // ---- archives and collection index ----------------------------------
    json index_models = json::array();
    for (const ModelFixture& m : models) {
      const fs::path archive = out / "archives" / (m.id + ".zip");
      zip_dir(m.dir, archive);
      index_models.push_back({{"id", m.id},
                              {"name", m.name},
                              {"tags", m.tags},
                              {"download_url", file_url(archive)},
                              {"sha256", sha256_hex_file(archive)}});
    }
    write_text(out / "index.json",
               json{{"models", index_models}}.dump(2) + "\n");

    std::cout << fs::absolute(out).string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "gen_fixtures: " << e.what() << "\n";
    return 1;
  }
}
