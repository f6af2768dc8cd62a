#include "zoorun/tiling.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "zoorun/errors.hpp"

namespace zoorun::tiling {

namespace {

int64_t exact_int(double v, const std::string& what) {
  const double r = std::nearbyint(v);
  if (std::abs(v - r) > 1e-9)
    throw NonIntegralScale(what + " = " + std::to_string(v) +
                           " is not integral");
  return static_cast<int64_t>(r);
}

// Aligns the reference tensor's sizes to the output entry's axes order;
// axes absent from the reference count as size 1.
std::vector<int64_t> aligned_ref_shape(const spec::TensorSpecEntry& ospec,
                                       const Tensor& ref) {
  std::vector<int64_t> shape(ospec.axes.rank(), 1);
  for (size_t i = 0; i < ospec.axes.rank(); ++i) {
    int j = ref.axes().index_of(ospec.axes[i]);
    if (j >= 0) shape[i] = ref.shape()[static_cast<size_t>(j)];
  }
  return shape;
}

const Tensor& reference_input(const spec::TensorSpecEntry& ospec,
                              const std::vector<Tensor>& inputs) {
  if (ospec.shape.kind == spec::ShapeRule::Kind::Implicit)
    for (const Tensor& t : inputs)
      if (t.name() == ospec.shape.reference_input) return t;
  return inputs.front();
}

}  // namespace

size_t TilePlan::tile_count() const {
  size_t n = 1;
  for (const Axis& a : axes) n *= a.tiles.size();
  return n;
}

TilePlan plan_tiles(std::span<const int64_t> input_shape, const Axes& axes,
                    const std::map<char, int64_t>& tile_extent,
                    const std::map<char, int64_t>& halo_out,
                    const std::map<char, double>& scale) {
  TilePlan plan;
  for (const auto& [label, T] : tile_extent) {
    if (!Axes::spatial(label))
      throw BadTile(std::string("only spatial axes can be tiled, not '") +
                    label + "'");
    const int idx = axes.index_of(label);
    if (idx < 0)
      throw BadTile(std::string("tiled axis '") + label +
                    "' not present in input axes \"" + axes.str() + "\"");
    TilePlan::Axis ax;
    ax.label = label;
    ax.input_size = input_shape[static_cast<size_t>(idx)];
    ax.extent = T;
    auto sit = scale.find(label);
    ax.scale = sit == scale.end() ? 1.0 : sit->second;
    if (ax.scale <= 0)
      throw BadTile(std::string("axis '") + label +
                    "': tiling requires scale > 0");
    auto hit = halo_out.find(label);
    const int64_t h = hit == halo_out.end() ? 0 : hit->second;
    ax.halo_in = exact_int(static_cast<double>(h) / ax.scale,
                           std::string("axis '") + label + "': halo/scale");
    if (T <= 2 * ax.halo_in)
      throw BadTile(std::string("axis '") + label + "': tile extent " +
                    std::to_string(T) + " must exceed twice the input halo " +
                    std::to_string(ax.halo_in));
    ax.core = T - 2 * ax.halo_in;
    exact_int(ax.scale * static_cast<double>(ax.core),
              std::string("axis '") + label + "': scale*core");
    exact_int(ax.scale * static_cast<double>(T),
              std::string("axis '") + label + "': scale*extent");

    const int64_t N = ax.input_size;
    if (N < 1)
      throw BadTile(std::string("axis '") + label + "': empty input");
    const int64_t count = (N + ax.core - 1) / ax.core;
    for (int64_t j = 0; j < count; ++j) {
      TilePlan::Tile tile;
      tile.core_begin = j * ax.core;
      tile.core_end = std::min((j + 1) * ax.core, N);
      const bool last = j == count - 1;
      // The last tile is shifted left so the model always sees extent T.
      tile.in_begin = (last && count > 1 ? N - ax.core : j * ax.core) -
                      ax.halo_in;
      ax.tiles.push_back(tile);
    }
    plan.axes.push_back(std::move(ax));
  }
  return plan;
}

Tensor pad_slice_replicate(const Tensor& t, std::span<const Range> ranges) {
  if (ranges.size() != t.rank())
    throw ShapeMismatch("pad_slice_replicate: rank mismatch");
  std::vector<int64_t> out_shape(t.rank());
  bool inside = true;
  for (size_t i = 0; i < t.rank(); ++i) {
    if (ranges[i].length() <= 0)
      throw OutOfBounds("pad_slice_replicate: empty range");
    out_shape[i] = ranges[i].length();
    if (ranges[i].begin < 0 || ranges[i].end > t.shape()[i]) inside = false;
  }
  if (inside) return t.slice(ranges);

  Tensor out = Tensor::zeros(t.name(), t.axes(), out_shape, t.dtype());
  const size_t width = byte_width(t.dtype());
  const auto src_strides = row_major_strides(t.shape());
  const std::byte* src = t.bytes().data();
  std::byte* dst = out.mutable_bytes().data();
  const int64_t n = out.element_count();
  std::vector<int64_t> idx(t.rank(), 0);
  for (int64_t flat = 0; flat < n; ++flat) {
    int64_t src_flat = 0;
    for (size_t i = 0; i < t.rank(); ++i) {
      const int64_t clamped =
          std::clamp<int64_t>(ranges[i].begin + idx[i], 0, t.shape()[i] - 1);
      src_flat += clamped * src_strides[i];
    }
    std::memcpy(dst + flat * static_cast<int64_t>(width),
                src + src_flat * static_cast<int64_t>(width), width);
    for (size_t i = t.rank(); i-- > 0;) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }
  return out;
}

std::vector<Tensor> run_tiled(
    const InferFn& infer, const std::vector<Tensor>& inputs,
    const TilePlan& plan,
    const std::vector<spec::TensorSpecEntry>& output_specs) {
  if (inputs.empty()) throw ShapeMismatch("run_tiled: no inputs");

  for (const auto& ospec : output_specs) {
    if (ospec.shape.kind != spec::ShapeRule::Kind::Implicit)
      throw BadTile("output '" + ospec.name +
                    "': only implicit-shaped outputs can be stitched");
    for (size_t i = 0; i < ospec.axes.rank(); ++i)
      for (const auto& ax : plan.axes)
        if (ospec.axes[i] == ax.label && ospec.shape.offset[i] != 0)
          throw BadTile("output '" + ospec.name +
                        "': nonzero offset on tiled axis '" +
                        std::string(1, ax.label) + "'");
  }

  std::vector<Tensor> outputs(output_specs.size());
  bool allocated = false;

  // Cartesian product of per-axis tiles, last planned axis fastest.
  std::vector<size_t> tile_idx(plan.axes.size(), 0);
  const size_t total = plan.tile_count();
  for (size_t tile_no = 0; tile_no < total; ++tile_no) {
    try {
      // Slice + pad every input on the axes it shares with the plan.
      std::vector<Tensor> tile_inputs;
      for (const Tensor& in : inputs) {
        std::vector<Range> ranges(in.rank());
        for (size_t i = 0; i < in.rank(); ++i)
          ranges[i] = {0, in.shape()[i]};
        for (size_t a = 0; a < plan.axes.size(); ++a) {
          const auto& ax = plan.axes[a];
          const int i = in.axes().index_of(ax.label);
          if (i < 0) continue;
          const auto& tile = ax.tiles[tile_idx[a]];
          ranges[static_cast<size_t>(i)] = {tile.in_begin,
                                            tile.in_begin + ax.extent};
        }
        tile_inputs.push_back(pad_slice_replicate(in, ranges));
      }

      std::vector<Tensor> tile_outputs = infer(tile_inputs);
      if (tile_outputs.size() != output_specs.size())
        throw ShapeMismatch("run_tiled: got " +
                            std::to_string(tile_outputs.size()) +
                            " outputs for " +
                            std::to_string(output_specs.size()) + " specs");

      for (size_t o = 0; o < output_specs.size(); ++o) {
        const auto& ospec = output_specs[o];
        const Tensor& ref = reference_input(ospec, inputs);
        const Tensor& tile_ref = reference_input(ospec, tile_inputs);

        const auto expected =
            spec::output_shape_for(ospec, aligned_ref_shape(ospec, tile_ref));
        if (tile_outputs[o].shape() != expected ||
            !(tile_outputs[o].axes() == ospec.axes))
          throw ShapeMismatch("run_tiled: output '" + ospec.name +
                              "' violates the shape law for its tile");

        if (!allocated) {
          const auto full =
              spec::output_shape_for(ospec, aligned_ref_shape(ospec, ref));
          outputs[o] = Tensor::zeros(ospec.name, ospec.axes, full,
                                     tile_outputs[o].dtype());
        }

        std::vector<Range> crop(ospec.axes.rank());
        std::vector<int64_t> offsets(ospec.axes.rank(), 0);
        for (size_t i = 0; i < ospec.axes.rank(); ++i)
          crop[i] = {0, tile_outputs[o].shape()[i]};
        for (size_t a = 0; a < plan.axes.size(); ++a) {
          const auto& ax = plan.axes[a];
          const int i = ospec.axes.index_of(ax.label);
          if (i < 0) continue;
          const auto& tile = ax.tiles[tile_idx[a]];
          const auto ui = static_cast<size_t>(i);
          crop[ui] = {exact_int(ax.scale * static_cast<double>(
                                               tile.core_begin - tile.in_begin),
                                "crop begin"),
                      exact_int(ax.scale * static_cast<double>(tile.core_end -
                                                               tile.in_begin),
                                "crop end")};
          offsets[ui] = exact_int(
              ax.scale * static_cast<double>(tile.core_begin), "core offset");
        }
        Tensor core = tile_outputs[o].slice(crop);
        outputs[o].write_block(core, offsets);
      }
      allocated = true;
    } catch (const Error& e) {
      if (dynamic_cast<const ShapeMismatch*>(&e)) throw;
      throw InferenceError("tile " + std::to_string(tile_no) + ": " +
                           e.what());
    }

    for (size_t a = plan.axes.size(); a-- > 0;) {
      if (++tile_idx[a] < plan.axes[a].tiles.size()) break;
      tile_idx[a] = 0;
    }
  }
  return outputs;
}

}  // namespace zoorun::tiling
