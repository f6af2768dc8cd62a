#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "zoorun/axes.hpp"
#include "zoorun/dtype.hpp"

namespace zoorun::spec {

inline const std::vector<std::string> kWeightsTags = {
    "tensorflow_saved_model_bundle", "tensorflow_js", "torchscript", "onnx",
    "reference_graph"};

inline const std::vector<std::string> kProcStepNames = {
    "binarize", "clip",    "scale_linear",
    "sigmoid",  "zero_mean_unit_variance", "scale_range"};

struct WeightsEntry {
  std::string format;  // one of kWeightsTags, document order preserved
  std::string source;
  std::string sha256;
  std::string engine_version_hint;  // may be empty
};

struct ShapeRule {
  enum class Kind { Explicit, Parameterized, Implicit };
  Kind kind = Kind::Explicit;
  std::vector<int64_t> sizes;            // Explicit
  std::vector<int64_t> min, step;        // Parameterized (inputs only)
  std::string reference_input;           // Implicit (outputs only)
  std::vector<double> scale;             // Implicit
  std::vector<int64_t> offset;           // Implicit
  size_t rank() const;
};

struct ProcStep {
  std::string name;
  std::string mode;  // "fixed" or "per_sample"
  nlohmann::json kwargs = nlohmann::json::object();
};

struct TensorSpecEntry {
  std::string name;
  Axes axes;
  ShapeRule shape;
  DType data_type = DType::f32;
  std::optional<std::pair<double, double>> data_range;
  std::vector<int64_t> halo;  // outputs only; empty means zero halo
  std::vector<ProcStep> processing;
  bool is_output = false;

  int64_t halo_on(size_t axis) const {
    return halo.empty() ? 0 : halo[axis];
  }
};

struct TestTensorRef {
  std::string source;
  std::string sha256;
};

struct ModelDescriptor {
  std::string name;
  std::string format_version;
  std::vector<WeightsEntry> weights;
  std::vector<TensorSpecEntry> inputs;
  std::vector<TensorSpecEntry> outputs;
  std::vector<TestTensorRef> test_inputs;
  std::vector<TestTensorRef> test_outputs;
  std::vector<std::string> warnings;  // unknown envelope fields, seam risks

  const TensorSpecEntry* find_input(const std::string& name) const;
  // Canonical sorted-key JSON emission; warnings are not part of it.
  std::string emit() const;
};

// Parses and fully validates a descriptor document (YAML or JSON surface).
// SchemaError messages carry the offending field path.
ModelDescriptor parse_model_descriptor(const std::string& text);
ModelDescriptor parse_model_descriptor_file(const std::filesystem::path& path);

struct ShapeCheck {
  bool accepted = false;
  std::vector<int64_t> k;   // per-axis factors when accepted
  int offending_axis = -1;  // first rejecting axis otherwise
  std::string message;
};

// Explicit: accept iff equal. Parameterized: accept iff
// shape[i] == min[i] + k_i * step[i] with integer k_i >= 0.
ShapeCheck validate_input_shape(const TensorSpecEntry& entry,
                                std::span<const int64_t> shape);

// Implicit size law: size[i] = scale[i] * input_shape[i] + 2 * offset[i].
// Throws NonIntegralScale when scale*size is not integral.
std::vector<int64_t> output_shape_for(const TensorSpecEntry& entry,
                                      std::span<const int64_t> input_shape);

struct WeightsFormat {
  std::string tag;
  std::string engine_version_hint;
};

// Formats in descriptor order, each with its version hint.
std::vector<WeightsFormat> weights_formats(const ModelDescriptor& d);

bool is_sha256_hex(const std::string& s);

}  // namespace zoorun::spec
