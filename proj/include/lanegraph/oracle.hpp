#pragma once

#include "lanegraph/augment.hpp"
#include "lanegraph/core.hpp"
#include "lanegraph/graphgen.hpp"
#include "lanegraph/scene.hpp"

namespace lanegraph::oracle {

// ---------------------------------------------------------------------------
// Analytic stand-ins for the dense neural outputs, computed from ground-truth
// layouts, plus self-supervised training labels and controlled noise.
// ---------------------------------------------------------------------------

struct AffordanceBundle {
  GridMap lane;    // 1x128x128 in [0,1]
  GridMap entry;   // 1x128x128, soft blobs
  GridMap exit;    // 1x128x128
  graphgen::DirectionalField direction;
  std::vector<std::string> warnings;
};

struct TrainingSample {
  GridMap input;  // 2x256x256
  GridMap label;  // 4x128x128: mask, nx, ny, entry/exit point blobs
};

// Lane map 1 on route-corridor cells; entry/exit soft radial blobs (radius 3
// cells, 1 at the center falling to 0 at the radius) at each port cell;
// direction field with one component per distinct route direction through the
// cell (deduplicated within 15 degrees, capped at the 3 largest-support
// directions), uniform weights, kappa = 8.
AffordanceBundle synth_affordances(const scene::RoadLayout& layout,
                                   const GridSpec& spec);

// One training sample: the scene input paired with a single-route partial
// label, both generated from the augmented layout geometry.
TrainingSample make_sample(const scene::RoadLayout& layout, std::size_t route_index,
                           const GridSpec& input_spec,
                           const augment::AugmentParams& params);

struct EvalLabel {
  AffordanceBundle bundle;
  graphgen::LaneGraph graph;
  GridMap input;  // 2x256x256 of the same augmented layout
  GridMap label;  // training-format label with all routes superimposed
};

// All valid trajectories superimposed, plus the reference graph of the
// augmented layout.
EvalLabel make_eval_label(const scene::RoadLayout& layout,
                          const GridSpec& input_spec,
                          const augment::AugmentParams& params);

// Lane cells flip 0<->1 with flip_prob (coupled per cell: a cell flipped at a
// lower probability stays flipped at any higher one under the same seed);
// direction means get wrapped Gaussian jitter; entry/exit blobs shift by up
// to 2 cells. Deterministic given seed.
AffordanceBundle inject_noise(const AffordanceBundle& bundle, double flip_prob,
                              double dir_jitter_sigma, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Dataset directory layout (per sample): input.lgt, label.lgt, meta.json and
// for eval samples affordance.lgt (3x128x128), direction.lgt (9x128x128:
// weights, means, kappas) and graph.json.
// ---------------------------------------------------------------------------

GridMap stack_affordance(const AffordanceBundle& b);   // 3x128x128
AffordanceBundle unstack_affordance(const GridMap& aff, const GridMap& dir);
GridMap pack_direction(const graphgen::DirectionalField& f);  // 9x128x128
graphgen::DirectionalField unpack_direction(const GridMap& m);

}  // namespace lanegraph::oracle
