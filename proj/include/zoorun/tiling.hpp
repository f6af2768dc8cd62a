#pragma once

#include <functional>
#include <map>
#include <vector>

#include "zoorun/model_spec.hpp"
#include "zoorun/tensor.hpp"

namespace zoorun::tiling {

// Per-axis decomposition into overlapping tiles. Halo is declared in
// output pixels; the input-space overlap is halo/scale and must be
// integral. Stitched cores partition [0, N) exactly; every tile window has
// the same extent T, with the last tile shifted left so its core ends at
// the boundary. Out-of-range window samples are edge-replicated.
struct TilePlan {
  struct Tile {
    int64_t in_begin = 0;  // window [in_begin, in_begin + T), may leave [0,N)
    int64_t core_begin = 0;  // stitched core in input space
    int64_t core_end = 0;
  };
  struct Axis {
    char label = 'x';
    int64_t input_size = 0;  // N
    int64_t extent = 0;      // T
    int64_t halo_in = 0;     // input-space overlap
    int64_t core = 0;        // C = T - 2*halo_in
    double scale = 1.0;      // output/input scale on this axis
    std::vector<Tile> tiles;
  };
  std::vector<Axis> axes;  // tiled spatial axes only

  size_t tile_count() const;
};

// Plans tiles for the spatial axes named in tile_extent. halo_out and
// scale are keyed by axis label; missing keys default to halo 0 and
// scale 1. Throws BadTile when an extent cannot fit its halo, and
// NonIntegralScale when halo/scale or scale*core is not integral.
TilePlan plan_tiles(std::span<const int64_t> input_shape, const Axes& axes,
                    const std::map<char, int64_t>& tile_extent,
                    const std::map<char, int64_t>& halo_out,
                    const std::map<char, double>& scale);

// Copies the window described by ranges, clamping out-of-range indices to
// the border (edge replication).
Tensor pad_slice_replicate(const Tensor& t, std::span<const Range> ranges);

using InferFn =
    std::function<std::vector<Tensor>(const std::vector<Tensor>&)>;

// Runs per-tile inference sequentially in plan order and stitches output
// cores into preallocated full outputs. Output specs must be Implicit with
// zero offset on tiled axes; each tile's output shape is checked against
// the size law.
std::vector<Tensor> run_tiled(const InferFn& infer,
                              const std::vector<Tensor>& inputs,
                              const TilePlan& plan,
                              const std::vector<spec::TensorSpecEntry>& output_specs);

}  // namespace zoorun::tiling
