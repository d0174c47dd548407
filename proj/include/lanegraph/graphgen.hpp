#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lanegraph/core.hpp"
#include "lanegraph/learning.hpp"

namespace lanegraph::graphgen {

// ---------------------------------------------------------------------------
// Lane network graph. Directed, acyclic, every maximal entry->exit path has
// 1, 2 or 3 edges. Point intersections (a lone fork or a lone merge) make
// entry->merge and fork->exit edges legal alongside the full three-edge
// decomposition.
// ---------------------------------------------------------------------------

enum class VertexKind { entry, fork, merge, exit };
enum class EdgeKind { entry, intersection, exit, lane };

const char* to_string(VertexKind k);
const char* to_string(EdgeKind k);

struct Vertex {
  int id = 0;
  VertexKind kind = VertexKind::entry;
  Cell cell;
};

struct Edge {
  int src = 0;
  int dst = 0;
  EdgeKind kind = EdgeKind::lane;
  std::vector<Cell> geometry;
};

struct LaneGraph {
  std::vector<Vertex> vertices;
  std::vector<Edge> edges;
  std::vector<std::string> warnings;

  const Vertex* find(int id) const;
  std::string to_json() const;
  static LaneGraph from_json(const std::string& text);
};

// Checks the formal model: (a) acyclicity, (b) every entry->exit path has
// 1..3 edges, (c) fork outdegree >= 2 and merge indegree >= 2, (d) edge-kind
// sequencing, (e) intersection disjointness. Never throws; empty list means
// valid.
std::vector<std::string> validate_graph(const LaneGraph& g);

// ---------------------------------------------------------------------------
// Dense directional field: up to 3 von Mises components per cell. Inactive
// components carry weight 0; off-lane cells may be all-zero.
// ---------------------------------------------------------------------------

struct DirectionalField {
  int height = 0;
  int width = 0;
  static constexpr int kMaxComponents = 3;
  std::vector<double> weight;  // component-major like GridMap channels
  std::vector<double> mean;
  std::vector<double> kappa;

  static DirectionalField zeros(int height, int width);
  std::size_t index(int k, int i, int j) const {
    return (static_cast<std::size_t>(k) * height + i) * width + j;
  }
  int active_components(int i, int j) const;
  learning::VonMisesMixture mixture_at(int i, int j) const;
  // Mean of the heaviest active component, if any.
  std::optional<double> dominant_mean(int i, int j) const;
};

// ---------------------------------------------------------------------------
// Affordance preprocessing and the implicit weighted adjacency of Eq-style
// edge weights. The adjacency is a weight function over 8-neighbor moves,
// never a materialized matrix.
// ---------------------------------------------------------------------------

// Threshold at 0.5 to {0,1}, box-average with an 8x8 kernel anchored at
// offsets [-4,+3] in each axis (zero padding), then sharpen elementwise with
// f(y) = y^8.
GridMap preprocess_lane_map(const GridMap& lane);

struct AdjacencyField {
  GridMap lane_tilde;         // preprocessed lane map, 1 channel
  DirectionalField direction;
  double gate_angle = 0.7853981633974483;  // 45 degrees

  // Weight of the move A->B for an 8-neighbor B: |AB| - ln(y_B) when some
  // active component at A lies within the gate of dir(A->B) and y_B > 0;
  // nullopt otherwise.
  std::optional<double> edge_weight(const Cell& a, const Cell& b) const;
};

// 8-connected components of cells strictly above threshold; per component the
// value-weighted centroid rounded to the nearest in-component cell. Results
// sorted by (i, j).
std::vector<Cell> extract_points(const GridMap& map, double threshold);

// A* with Euclidean heuristic (admissible: every edge weight >= |AB|), ties
// broken by smaller (i, then j) of the frontier cell.
std::optional<std::vector<Cell>> astar(const Cell& start, const Cell& goal,
                                       const AdjacencyField& field);

// Dijkstra-computed cost of the same instance; test oracle for A* optimality.
std::optional<double> dijkstra_cost(const Cell& start, const Cell& goal,
                                    const AdjacencyField& field);

double path_cost(const std::vector<Cell>& path, const AdjacencyField& field);

// ---------------------------------------------------------------------------
// Path unification (Algorithm 1 subroutines)
// ---------------------------------------------------------------------------

// Direction from path[t] to path[min(t+dt, last)]; t at or past the last
// index falls back to the final step.
double lookahead_direction(const std::vector<Cell>& path, int t, int dt = 6);

// Total angle spanned by the directions arranged counterclockwise, excluding
// the single largest gap. A single direction spans 0.
double divergence_angle(std::vector<double> directions);

struct UnifyConfig {
  double theta_div = 0.35;  // divergence threshold on the spanned angle
  int lookahead = 6;
  // Optional lane support for rounding averaged cells; cells where this map
  // is 0 are avoided when snapping.
  const GridMap* support = nullptr;
};

struct UnifyResult {
  std::vector<Cell> common;
  // One suffix per input path, in input order, re-rooted at common.back().
  // Empty when the tree never diverges (single-path trees included).
  std::vector<std::vector<Cell>> suffixes;
};

UnifyResult unify(const std::vector<std::vector<Cell>>& tree,
                  const UnifyConfig& cfg);

// Reverses every path, unifies, and reverses the results back: the common
// path ends at the shared endpoint and the suffixes become prefixes ending at
// the merge point.
UnifyResult reverse_unify(const std::vector<std::vector<Cell>>& tree,
                          const UnifyConfig& cfg);

// ---------------------------------------------------------------------------
// Algorithm 1: road lane network graph generation
// ---------------------------------------------------------------------------

struct GraphGenConfig {
  double delta_theta = 0.7853981633974483;  // gate angle, 45 degrees
  double theta_div = 0.35;
  int lookahead = 6;
  double point_threshold = 0.5;
  // Entry/exit pairs closer than this with opposing headings belong to the
  // same port arm and are skipped (U-turn suppression).
  double uturn_radius = 26.0;
  double uturn_heading = 2.356194490192345;  // 3*pi/4
};

struct AffordanceInput {
  const GridMap* lane = nullptr;    // 1x128x128 in [0,1]
  const GridMap* entry = nullptr;   // 1x128x128
  const GridMap* exit = nullptr;    // 1x128x128
  const DirectionalField* direction = nullptr;
};

LaneGraph generate_graph(const AffordanceInput& bundle,
                         const GraphGenConfig& cfg);

}  // namespace lanegraph::graphgen
