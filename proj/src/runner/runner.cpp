#include "zoorun/runner.hpp"

#include <algorithm>
#include <cmath>

#include "zoorun/errors.hpp"
#include "zoorun/processing.hpp"
#include "zoorun/session.hpp"
#include "zoorun/tiling.hpp"
#include "zoorun/zrt1.hpp"

namespace zoorun::runner {

namespace fs = std::filesystem;
using spec::ModelDescriptor;
using spec::ShapeRule;
using spec::TensorSpecEntry;

namespace {

// Align a raw input to its descriptor entry: reorder axes when permuted,
// check dtype and shape rule, and adopt the declared name.
Tensor conform_input(const TensorSpecEntry& entry, const Tensor& raw) {
  Tensor t = raw;
  if (!(t.axes() == entry.axes)) {
    if (!t.axes().is_permutation_of(entry.axes))
      throw ShapeMismatch("input '" + entry.name + "': tensor axes \"" +
                          t.axes().str() + "\" do not match spec axes \"" +
                          entry.axes.str() + "\"");
    t = t.reorder_axes(entry.axes);
  }
  if (t.dtype() != entry.data_type)
    throw DTypeMismatch("input '" + entry.name + "': dtype " +
                        dtype_name(t.dtype()) + " does not match spec " +
                        dtype_name(entry.data_type));
  auto check = spec::validate_input_shape(entry, t.shape());
  if (!check.accepted)
    throw ShapeMismatch("input '" + entry.name + "': " + check.message);
  return t.with_name(entry.name);
}

struct TileDecision {
  bool tiled = false;
  tiling::TilePlan plan;
  std::vector<std::string> notes;
};

int64_t snap_extent(const TensorSpecEntry& entry, size_t axis,
                    int64_t desired) {
  if (entry.shape.kind != ShapeRule::Kind::Parameterized) return desired;
  const int64_t min = entry.shape.min[axis], step = entry.shape.step[axis];
  if (desired <= min || step == 0) return min;
  return min + (desired - min) / step * step;
}

// Shared spatial-axis metadata: per tiled label the halo (output px, max
// over outputs) and the output scale (must agree across outputs).
struct SpatialInfo {
  std::map<char, int64_t> halo;
  std::map<char, double> scale;
  bool uniform = true;  // scales agree across outputs
  bool any_halo_declared = false;
};

SpatialInfo spatial_info(const ModelDescriptor& d) {
  SpatialInfo info;
  for (const TensorSpecEntry& o : d.outputs) {
    if (o.shape.kind != ShapeRule::Kind::Implicit) continue;
    for (size_t i = 0; i < o.axes.rank(); ++i) {
      const char l = o.axes[i];
      if (!Axes::spatial(l)) continue;
      info.halo[l] = std::max(info.halo[l], o.halo_on(i));
      if (!o.halo.empty()) info.any_halo_declared = true;
      auto it = info.scale.find(l);
      if (it == info.scale.end())
        info.scale[l] = o.shape.scale[i];
      else if (it->second != o.shape.scale[i])
        info.uniform = false;
    }
  }
  return info;
}

TileDecision decide_tiling(const ModelDescriptor& d,
                           const std::vector<Tensor>& inputs,
                           const RunOptions& opts) {
  TileDecision td;
  if (opts.no_tiling) return td;

  const bool forced = opts.tile.has_value();
  auto bail = [&](const std::string& why) -> TileDecision {
    if (forced) throw BadTile(why);
    td.tiled = false;
    td.notes.push_back("tiling disabled: " + why);
    return td;
  };

  bool any_implicit = std::any_of(d.outputs.begin(), d.outputs.end(),
                                  [](const TensorSpecEntry& o) {
                                    return o.shape.kind ==
                                           ShapeRule::Kind::Implicit;
                                  });
  if (!any_implicit || d.outputs.size() !=
                           static_cast<size_t>(std::count_if(
                               d.outputs.begin(), d.outputs.end(),
                               [](const TensorSpecEntry& o) {
                                 return o.shape.kind ==
                                        ShapeRule::Kind::Implicit;
                               })))
    return bail("outputs are not all implicit-shaped");

  SpatialInfo info = spatial_info(d);
  if (!info.uniform) return bail("outputs disagree on spatial scale");

  // Spatial geometry comes from the first input with spatial axes.
  const TensorSpecEntry* ref_entry = nullptr;
  const Tensor* ref_tensor = nullptr;
  for (size_t i = 0; i < d.inputs.size(); ++i) {
    for (size_t a = 0; a < d.inputs[i].axes.rank(); ++a)
      if (Axes::spatial(d.inputs[i].axes[a])) {
        ref_entry = &d.inputs[i];
        ref_tensor = &inputs[i];
        break;
      }
    if (ref_entry) break;
  }
  if (!ref_entry) return bail("model has no spatial axes");

  std::map<char, int64_t> extents;
  if (forced) {
    extents = *opts.tile;
  } else {
    for (size_t a = 0; a < ref_entry->axes.rank(); ++a) {
      const char l = ref_entry->axes[a];
      if (!Axes::spatial(l)) continue;
      if (ref_tensor->shape()[a] > opts.auto_tile_threshold)
        extents[l] =
            snap_extent(*ref_entry, a, opts.auto_tile_threshold);
    }
    if (extents.empty()) return td;  // fits in one piece
    if (ref_entry->shape.kind == ShapeRule::Kind::Explicit)
      return bail("explicit input shape cannot be re-tiled");
  }

  // The model must accept the tile-sized input on every input that shares
  // the tiled axes.
  for (size_t i = 0; i < d.inputs.size(); ++i) {
    std::vector<int64_t> tile_shape = inputs[i].shape();
    for (size_t a = 0; a < d.inputs[i].axes.rank(); ++a) {
      auto it = extents.find(d.inputs[i].axes[a]);
      if (it != extents.end()) tile_shape[a] = it->second;
    }
    auto check = spec::validate_input_shape(d.inputs[i], tile_shape);
    if (!check.accepted)
      return bail("input '" + d.inputs[i].name +
                  "' rejects the tile shape: " + check.message);
  }

  if (!info.any_halo_declared)
    td.notes.push_back(
        "warning: descriptor declares no halo; tiled output may show seams");

  td.plan = tiling::plan_tiles(ref_tensor->shape(), ref_tensor->axes(),
                               extents, info.halo, info.scale);
  td.tiled = true;
  return td;
}

Tensor conform_output(const TensorSpecEntry& ospec, Tensor t) {
  if (!(t.axes() == ospec.axes)) {
    if (!t.axes().is_permutation_of(ospec.axes))
      throw InferenceError("output '" + ospec.name +
                           "': worker returned axes \"" + t.axes().str() +
                           "\" incompatible with spec \"" + ospec.axes.str() +
                           "\"");
    t = t.reorder_axes(ospec.axes);
  }
  return t.with_name(ospec.name);
}

}  // namespace

RunResult run_model(const fs::path& model_dir,
                    const std::vector<Tensor>& raw_inputs,
                    const RunOptions& opts, const Environment& env) {
  RunResult result;
  ModelDescriptor d = spec::parse_model_descriptor_file(model_dir / "rdf.yaml");
  for (const std::string& w : d.warnings) result.notes.push_back(w);

  if (raw_inputs.size() != d.inputs.size())
    throw ShapeMismatch("model '" + d.name + "' expects " +
                        std::to_string(d.inputs.size()) + " inputs, got " +
                        std::to_string(raw_inputs.size()));

  std::vector<Tensor> inputs;
  proc::ProcContext ctx;
  for (size_t i = 0; i < d.inputs.size(); ++i) {
    Tensor t = conform_input(d.inputs[i], raw_inputs[i]);
    t = proc::apply_chain(d.inputs[i].processing, t, ctx,
                          d.inputs[i].data_type)
            .with_name(d.inputs[i].name);
    inputs.push_back(std::move(t));
  }

  // Engine selection and (when permitted) installation.
  DefaultFetcher default_fetcher;
  Fetcher& fetcher = env.fetcher ? *env.fetcher : default_fetcher;
  engines::EngineRegistry registry;
  if (!env.registry_path.empty() && fs::exists(env.registry_path))
    registry = engines::EngineRegistry::load(env.registry_path);
  auto scan = engines::list_installed(env.engines_dir);
  result.engine =
      engines::engine_for_model(d, scan.engines, registry, env.platform);

  engines::InstalledEngine engine;
  if (result.engine.install_needed) {
    if (opts.no_install)
      throw NoCompatibleEngine("engine " + result.engine.spec.dir_name() +
                               " is not installed and --no-install is set");
    engine = engines::install_engine(result.engine.spec, env.engines_dir,
                                     fetcher);
    result.notes.push_back("installed engine " + result.engine.spec.dir_name());
  } else {
    for (const auto& ie : scan.engines)
      if (ie.spec.dir_name() == result.engine.spec.dir_name()) engine = ie;
  }

  auto session = worker::ModelSession::open(engine, model_dir,
                                            result.engine.weights_tag);

  TileDecision td = decide_tiling(d, inputs, opts);
  for (const std::string& n : td.notes) result.notes.push_back(n);
  result.tiled = td.tiled;

  std::vector<Tensor> raw_outputs;
  if (td.tiled) {
    raw_outputs = tiling::run_tiled(
        [&](const std::vector<Tensor>& tile_inputs) {
          auto outs = session->run(tile_inputs);
          for (size_t o = 0; o < outs.size() && o < d.outputs.size(); ++o)
            outs[o] = conform_output(d.outputs[o], std::move(outs[o]));
          return outs;
        },
        inputs, td.plan, d.outputs);
  } else {
    raw_outputs = session->run(inputs);
  }
  session->close();

  if (raw_outputs.size() != d.outputs.size())
    throw InferenceError("model '" + d.name + "' produced " +
                         std::to_string(raw_outputs.size()) +
                         " outputs, descriptor declares " +
                         std::to_string(d.outputs.size()));

  for (size_t o = 0; o < d.outputs.size(); ++o) {
    Tensor t = conform_output(d.outputs[o], std::move(raw_outputs[o]));
    t = proc::apply_chain(d.outputs[o].processing, t, ctx,
                          d.outputs[o].data_type)
            .with_name(d.outputs[o].name);
    result.outputs.push_back(std::move(t));
  }
  return result;
}

TestReport test_model(const fs::path& model_dir, const RunOptions& opts,
                      const Environment& env, double float_tolerance) {
  ModelDescriptor d = spec::parse_model_descriptor_file(model_dir / "rdf.yaml");
  if (d.test_inputs.empty() || d.test_outputs.empty())
    throw Error(ErrorClass::Usage,
                "model '" + d.name + "' bundles no test tensors");
  if (d.test_inputs.size() != d.inputs.size() ||
      d.test_outputs.size() != d.outputs.size())
    throw SchemaError("model '" + d.name +
                      "': test tensor count does not match descriptor");

  auto load_refs = [&](const std::vector<spec::TestTensorRef>& refs) {
    std::vector<Tensor> tensors;
    for (const auto& r : refs) {
      const fs::path p = model_dir / r.source;
      const std::string got = sha256_hex_file(p);
      if (got != r.sha256)
        throw ChecksumMismatch("test tensor " + r.source + ": expected " +
                               r.sha256 + ", got " + got);
      tensors.push_back(zrt1::read_file(p));
    }
    return tensors;
  };

  std::vector<Tensor> test_inputs = load_refs(d.test_inputs);
  std::vector<Tensor> expected = load_refs(d.test_outputs);

  RunResult run = run_model(model_dir, test_inputs, opts, env);

  TestReport report;
  report.notes = run.notes;
  report.pass = true;
  for (size_t o = 0; o < expected.size(); ++o) {
    TestVerdict v;
    v.output_name = d.outputs[o].name;
    const Tensor& got = run.outputs[o];
    const Tensor& want = expected[o];
    if (got.dtype() != want.dtype() || got.shape() != want.shape()) {
      v.pass = false;
      v.note = "geometry mismatch";
    } else if (!is_float(got.dtype())) {
      v.pass = std::equal(got.bytes().begin(), got.bytes().end(),
                          want.bytes().begin());
      if (!v.pass) v.note = "integer output differs";
    } else {
      const Tensor a = got.cast(DType::f64);
      const Tensor b = want.cast(DType::f64);
      auto xs = a.values<double>();
      auto ys = b.values<double>();
      double max_diff = 0.0;
      for (size_t i = 0; i < xs.size(); ++i)
        max_diff = std::max(max_diff, std::abs(xs[i] - ys[i]));
      v.max_abs_diff = max_diff;
      v.pass = max_diff <= float_tolerance;
      if (!v.pass)
        v.note = "max abs diff " + std::to_string(max_diff) + " > " +
                 std::to_string(float_tolerance);
    }
    report.pass = report.pass && v.pass;
    report.verdicts.push_back(std::move(v));
  }
  return report;
}

}  // namespace zoorun::runner
