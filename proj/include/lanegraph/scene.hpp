#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lanegraph/core.hpp"
#include "lanegraph/graphgen.hpp"

namespace lanegraph::scene {

// ---------------------------------------------------------------------------
// Parametric road layouts. Lanes travel first point -> last point; a lane may
// carry an entry port at its first point or an exit port at its last point.
// ---------------------------------------------------------------------------

enum class PortKind { entry, exit };
enum class Family { train, test };

const char* to_string(Family f);
Family family_from(const std::string& s);

struct LaneSpec {
  std::vector<Vec2> centerline;
  double width = 3.5;
  std::optional<std::string> entry_port;
  std::optional<std::string> exit_port;
};

struct Port {
  std::string id;
  PortKind kind = PortKind::entry;
  Vec2 position;
  double heading = 0.0;  // direction of travel through the port
};

struct RouteSpec {
  std::string entry;
  std::string exit;
  std::vector<int> lane_sequence;  // indices into RoadLayout::lanes
};

// A marking stroke to rasterize into the road-marking channel. Dashed
// separators are pre-cut into individual strokes at build time so that
// augmentation transforms them like any other geometry.
struct MarkingStroke {
  std::vector<Vec2> points;
};

struct RoadLayout {
  std::string id;
  Family family = Family::train;
  std::vector<LaneSpec> lanes;
  std::vector<Port> ports;
  std::vector<RouteSpec> connectivity;
  std::vector<MarkingStroke> markings;

  const Port* find_port(const std::string& id) const;
};

// ---------------------------------------------------------------------------
// Layout generators. Config mirrors the JSON layout files:
//   {"id": ..., "family": "train"|"test", "generator": ..., "params": {...}}
// Generators: "straight", "nway", "fork", "merge".
// ---------------------------------------------------------------------------

struct ArmConfig {
  double angle_deg = 0.0;
  int lanes_in = 1;   // lanes traveling toward the intersection
  int lanes_out = 1;  // lanes traveling away
};

struct LayoutConfig {
  std::string id;
  Family family = Family::train;
  std::string generator;
  // nway
  std::vector<ArmConfig> arms;
  // straight
  double angle_deg = 0.0;
  int lanes_forward = 1;
  int lanes_backward = 1;
  // fork / merge
  std::vector<double> branch_angles_deg;  // travel directions of branch arms
  double trunk_angle_deg = 0.0;           // travel direction of the trunk
  double lane_width = 3.5;
};

LayoutConfig layout_config_from_json(const std::string& text);

RoadLayout build_layout(const LayoutConfig& config);

// ---------------------------------------------------------------------------
// Rasterization into the two-layer input representation: channel 0 drivable
// region, channel 1 road markings. Cells inside an occlusion rect become 0.5
// in both channels (unknown observation).
// ---------------------------------------------------------------------------

struct OcclusionRect {
  Vec2 min;
  Vec2 max;
};

GridMap rasterize_scene(const RoadLayout& layout, const GridSpec& spec,
                        const std::vector<OcclusionRect>& occlusion = {});

// ---------------------------------------------------------------------------
// Routes: one polyline per connectivity pair, resampled at <= one input cell
// spacing, with per-point travel direction.
// ---------------------------------------------------------------------------

struct RoutePoint {
  Vec2 pos;
  double heading = 0.0;
};

struct Route {
  std::string entry;
  std::string exit;
  std::vector<RoutePoint> points;
  // Construction-identical raw concatenation, used for exact shared
  // prefix/suffix detection in the ground-truth graph.
  std::vector<Vec2> raw_points;
};

std::vector<Route> enumerate_routes(const RoadLayout& layout);

// Reference lane graph built analytically from the routes: fork = last point
// shared by all routes out of an entry, merge = first point shared by all
// routes into an exit, projected to label-resolution cells.
graphgen::LaneGraph ground_truth_graph(const RoadLayout& layout,
                                       const GridSpec& spec);

// Corridor membership used by the rasterizer and tests: strictly closer to
// the centerline than half the lane width.
bool point_in_corridor(Vec2 p, const std::vector<Vec2>& polyline, double width);

double distance_to_polyline(Vec2 p, const std::vector<Vec2>& polyline);

}  // namespace lanegraph::scene
