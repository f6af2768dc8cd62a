#pragma once

#include <map>
#include <vector>

#include "zoorun/model_spec.hpp"
#include "zoorun/tensor.hpp"

namespace zoorun::proc {

// Per-execution statistics cache; entries are write-once, keyed by
// (tensor name, step index).
struct ProcContext {
  std::map<std::pair<std::string, int>, std::vector<double>> sample_stats;
};

// Applies one step to an f64 tensor, returning f64. All statistics and
// arithmetic are in f64: population std (divide by N), percentiles by
// linear interpolation at rank q/100*(N-1), binarize with strict '>'.
Tensor apply_step(const spec::ProcStep& step, const Tensor& t,
                  ProcContext& ctx, int step_index = -1);

// Applies the chain in order: input converted to f64 once, every step in
// f64, final result cast to `declared` via Tensor::cast.
Tensor apply_chain(const std::vector<spec::ProcStep>& steps, const Tensor& t,
                   ProcContext& ctx, DType declared);

// Convenience: declared dtype taken from the tensor itself.
Tensor apply_chain(const std::vector<spec::ProcStep>& steps, const Tensor& t,
                   ProcContext& ctx);

}  // namespace zoorun::proc
