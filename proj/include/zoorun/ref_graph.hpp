#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "zoorun/tensor.hpp"

namespace zoorun::refengine {

// Deterministic interpreted op graph, the engine behind the
// `reference_graph` weights tag. All arithmetic runs in f64 with a fixed
// evaluation order, so identical inputs give byte-identical outputs.
struct RefOp {
  enum class Kind { Affine, Relu, Sigmoid, AvgPool2, Upsample2, Blur3 };
  Kind kind = Kind::Affine;
  std::string input;
  std::string output;
  std::vector<double> a;  // affine gain, scalar or per-channel
  std::vector<double> b;  // affine bias, scalar or per-channel
};

struct RefGraph {
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::vector<RefOp> ops;
};

// Parses and validates a graph document (YAML or JSON surface). Each op's
// input must be a graph input or an earlier op's output; declared outputs
// must exist once all ops ran.
RefGraph parse_graph(const std::string& text);
RefGraph parse_graph_file(const std::filesystem::path& path);

// Runs the graph. Inputs are matched to graph input names positionally by
// declaration; op results are f64 (pass-through tensors keep their dtype).
std::vector<Tensor> run_graph(const RefGraph& graph,
                              const std::vector<Tensor>& inputs);

}  // namespace zoorun::refengine
