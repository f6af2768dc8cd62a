#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "zoorun/engine_manager.hpp"
#include "zoorun/model_spec.hpp"
#include "zoorun/tensor.hpp"

namespace zoorun::runner {

struct RunOptions {
  std::optional<std::map<char, int64_t>> tile;  // user-chosen extents
  bool no_tiling = false;
  bool no_install = false;
  // When --tile is absent, spatial axes larger than this are tiled at
  // this extent (snapped to an admissible size).
  int64_t auto_tile_threshold = 512;
};

struct Environment {
  std::filesystem::path engines_dir;
  std::filesystem::path registry_path;
  engines::Platform platform;
  Fetcher* fetcher = nullptr;  // DefaultFetcher when null
};

struct RunResult {
  std::vector<Tensor> outputs;  // descriptor order, descriptor names/dtypes
  std::vector<std::string> notes;
  engines::EngineChoice engine;
  bool tiled = false;
};

// Full pipeline: parse descriptor, validate and preprocess inputs, resolve
// (and if permitted install) the engine, run inference tiled or whole,
// postprocess, and return outputs.
RunResult run_model(const std::filesystem::path& model_dir,
                    const std::vector<Tensor>& raw_inputs,
                    const RunOptions& opts, const Environment& env);

struct TestVerdict {
  std::string output_name;
  bool pass = false;
  double max_abs_diff = 0.0;
  std::string note;
};

struct TestReport {
  bool pass = false;
  std::vector<TestVerdict> verdicts;
  std::vector<std::string> notes;
};

// Runs the pipeline on the model's bundled test inputs and compares with
// the bundled expected outputs: bit-exact for integer dtypes, max abs
// diff <= tolerance for float dtypes. Throws Error(Usage) when the model
// bundles no test tensors.
TestReport test_model(const std::filesystem::path& model_dir,
                      const RunOptions& opts, const Environment& env,
                      double float_tolerance = 1e-4);

}  // namespace zoorun::runner
