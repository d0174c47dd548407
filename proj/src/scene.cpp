#include "lanegraph/scene.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "json.hpp"

namespace lanegraph::scene {

namespace {

constexpr double kSampleStep = 0.25;   // polyline sampling spacing (m)
constexpr double kArmRadius = 25.0;    // port distance from grid center (m)
constexpr double kBaseInnerRadius = 7.0;
constexpr Vec2 kCenter{32.0, 32.0};
constexpr double kPointTol = 1e-6;

Vec2 dir_vec(double angle) { return {std::cos(angle), std::sin(angle)}; }

// Right-of-travel unit vector for direction d.
Vec2 right_of(double d) { return {std::sin(d), -std::cos(d)}; }

double deg2rad(double d) { return d * (kTwoPi / 360.0); }

void append_point(std::vector<Vec2>& out, Vec2 p) {
  if (!out.empty() && dist(out.back(), p) < 1e-12) return;
  out.push_back(p);
}

// Samples [a, b] at <= step spacing with both endpoints exact.
void sample_segment(std::vector<Vec2>& out, Vec2 a, Vec2 b, double step) {
  append_point(out, a);
  double len = dist(a, b);
  int n = int(std::ceil(len / step));
  for (int k = 1; k < n; ++k) {
    double t = double(k) / n;
    append_point(out, {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
  }
  append_point(out, b);
}

// Cubic Hermite blend with road-direction tangents; used where a circular
// fillet is undefined (parallel offset lines).
void sample_hermite(std::vector<Vec2>& out, Vec2 p0, double d0, Vec2 p1,
                    double d1, double step) {
  double len = dist(p0, p1);
  Vec2 m0 = len * dir_vec(d0);
  Vec2 m1 = len * dir_vec(d1);
  int n = std::max(2, int(std::ceil(1.5 * len / step)));
  for (int k = 0; k <= n; ++k) {
    double t = double(k) / n;
    double h00 = (1 + 2 * t) * (1 - t) * (1 - t);
    double h10 = t * (1 - t) * (1 - t);
    double h01 = t * t * (3 - 2 * t);
    double h11 = t * t * (t - 1);
    append_point(out, {h00 * p0.x + h10 * m0.x + h01 * p1.x + h11 * m1.x,
                       h00 * p0.y + h10 * m0.y + h01 * p1.y + h11 * m1.y});
  }
}

double signed_angle(double from, double to) {
  double d = wrap_angle(to) - wrap_angle(from);
  if (d > kTwoPi / 2) d -= kTwoPi;
  if (d < -kTwoPi / 2) d += kTwoPi;
  return d;
}

// Connector between a point P1 with travel direction d1 and a point P2 with
// travel direction d2: a circular fillet between the two lines, preceded and
// followed by straight runs, falling back to a Hermite blend for
// near-parallel lines.
std::vector<Vec2> build_connector(Vec2 p1, double d1, Vec2 p2, double d2) {
  std::vector<Vec2> out;
  double delta = signed_angle(d1, d2);
  if (std::fabs(delta) < deg2rad(10.0)) {
    Vec2 u = dir_vec(d1);
    Vec2 v = p2 - p1;
    double lateral = std::fabs(v.x * -u.y + v.y * u.x);
    if (lateral < 0.01 && std::fabs(angle_diff(d1, d2)) < 1e-9) {
      sample_segment(out, p1, p2, kSampleStep);
    } else {
      sample_hermite(out, p1, d1, p2, d2, kSampleStep);
    }
    return out;
  }

  // Line intersection: p1 + t1*u1 = p2 - t2*u2 with both t positive.
  Vec2 u1 = dir_vec(d1), u2 = dir_vec(d2);
  double a11 = u1.x, a12 = -u2.x, a21 = u1.y, a22 = -u2.y;
  double den = a11 * a22 - a12 * a21;
  if (std::fabs(den) < 1e-12) {
    sample_hermite(out, p1, d1, p2, d2, kSampleStep);
    return out;
  }
  double bx = p2.x - p1.x, by = p2.y - p1.y;
  double t1 = (bx * a22 - a12 * by) / den;   // distance from p1 to X along u1
  double t2n = (a11 * by - a21 * bx) / den;  // distance from X to p2 along u2
  if (t1 <= 0.0 || t2n <= 0.0) {
    sample_hermite(out, p1, d1, p2, d2, kSampleStep);
    return out;
  }
  Vec2 x{p1.x + t1 * u1.x, p1.y + t1 * u1.y};
  double tangent_len = std::min(t1, t2n);
  double radius = tangent_len / std::tan(std::fabs(delta) / 2.0);
  Vec2 tp1 = x - tangent_len * u1;
  Vec2 tp2 = x + tangent_len * u2;
  Vec2 n1 = delta > 0 ? Vec2{-u1.y, u1.x} : Vec2{u1.y, -u1.x};
  Vec2 center = tp1 + radius * n1;
  double a_start = std::atan2(tp1.y - center.y, tp1.x - center.x);

  sample_segment(out, p1, tp1, kSampleStep);
  double arc_len = radius * std::fabs(delta);
  int n = std::max(2, int(std::ceil(arc_len / kSampleStep)));
  for (int k = 1; k < n; ++k) {
    double a = a_start + delta * double(k) / n;
    append_point(out, {center.x + radius * std::cos(a),
                       center.y + radius * std::sin(a)});
  }
  sample_segment(out, tp2, p2, kSampleStep);
  return out;
}

struct ArmGeom {
  double angle = 0.0;  // outward position angle from the grid center
  int lanes_in = 0;
  int lanes_out = 0;
};

}  // namespace

const char* to_string(Family f) { return f == Family::train ? "train" : "test"; }

Family family_from(const std::string& s) {
  if (s == "train") return Family::train;
  if (s == "test") return Family::test;
  throw std::invalid_argument("unknown family: " + s);
}

const Port* RoadLayout::find_port(const std::string& pid) const {
  for (const auto& p : ports) {
    if (p.id == pid) return &p;
  }
  return nullptr;
}

LayoutConfig layout_config_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  LayoutConfig c;
  c.id = j.at("id").get<std::string>();
  c.family = family_from(j.at("family").get<std::string>());
  c.generator = j.at("generator").get<std::string>();
  const auto& p = j.at("params");
  if (c.generator == "nway") {
    for (const auto& ja : p.at("arms")) {
      ArmConfig a;
      a.angle_deg = ja.at("angle_deg").get<double>();
      a.lanes_in = ja.value("lanes_in", 1);
      a.lanes_out = ja.value("lanes_out", 1);
      c.arms.push_back(a);
    }
  } else if (c.generator == "straight") {
    c.angle_deg = p.value("angle_deg", 0.0);
    c.lanes_forward = p.value("lanes_forward", 1);
    c.lanes_backward = p.value("lanes_backward", 1);
  } else if (c.generator == "fork" || c.generator == "merge") {
    c.trunk_angle_deg = p.value("trunk_angle_deg", 0.0);
    for (const auto& a : p.at("branch_angles_deg")) {
      c.branch_angles_deg.push_back(a.get<double>());
    }
  } else {
    throw std::invalid_argument("unknown generator: " + c.generator);
  }
  c.lane_width = p.value("lane_width", 3.5);
  return c;
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

namespace {

void add_dashed_stroke(std::vector<MarkingStroke>& out, Vec2 a, Vec2 b) {
  // 2 m stroke / 2 m gap, phase at the inner end.
  double len = dist(a, b);
  Vec2 u = (1.0 / len) * (b - a);
  double s = 0.0;
  while (s < len) {
    double e = std::min(s + 2.0, len);
    MarkingStroke stroke;
    sample_segment(stroke.points, a + s * u, a + e * u, 1.0);
    out.push_back(std::move(stroke));
    s += 4.0;
  }
}

void add_solid_stroke(std::vector<MarkingStroke>& out, Vec2 a, Vec2 b) {
  MarkingStroke stroke;
  sample_segment(stroke.points, a, b, 1.0);
  out.push_back(std::move(stroke));
}

// Markings for one arm cross-section. Offsets are lateral positions along
// `lateral` (right of the incoming travel direction): incoming lanes occupy
// [0, lanes_in*w], outgoing [-lanes_out*w, 0].
void arm_markings(std::vector<MarkingStroke>& out, Vec2 inner, Vec2 outer,
                  Vec2 lateral, int lanes_in, int lanes_out, double w) {
  for (int k = -lanes_out; k <= lanes_in; ++k) {
    Vec2 a = inner + (k * w) * lateral;
    Vec2 b = outer + (k * w) * lateral;
    bool outer_edge = (k == -lanes_out) || (k == lanes_in);
    bool center = (k == 0);
    if (outer_edge || center) {
      add_solid_stroke(out, a, b);
    } else {
      add_dashed_stroke(out, a, b);
    }
  }
}

RoadLayout build_nway(const LayoutConfig& config) {
  if (config.arms.size() < 2) {
    throw std::invalid_argument("nway needs at least 2 arms");
  }
  const double w = config.lane_width;
  std::vector<ArmGeom> arms;
  for (const auto& a : config.arms) {
    if (a.lanes_in < 0 || a.lanes_out < 0 || a.lanes_in + a.lanes_out == 0) {
      throw std::invalid_argument("arm with 0 lanes");
    }
    if (a.lanes_in > 2 || a.lanes_out > 2) {
      throw std::invalid_argument("at most 2 lanes per direction supported");
    }
    arms.push_back({wrap_angle(deg2rad(a.angle_deg)), a.lanes_in, a.lanes_out});
  }
  // Angle collision check and inner radius sizing over adjacent arm pairs.
  std::vector<std::size_t> order(arms.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return arms[a].angle < arms[b].angle;
  });
  double r_int = kBaseInnerRadius;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const ArmGeom& a = arms[order[k]];
    const ArmGeom& b = arms[order[(k + 1) % order.size()]];
    double gap = b.angle - a.angle;
    if (k + 1 == order.size()) gap += kTwoPi;
    if (gap < deg2rad(30.0)) {
      throw std::invalid_argument("arm angle collision");
    }
    double wa = (a.lanes_in + a.lanes_out) * w;
    double wb = (b.lanes_in + b.lanes_out) * w;
    double needed = ((wa + wb) / 2.0 + 1.0) / (2.0 * std::sin(std::min(gap, kTwoPi / 2) / 2.0));
    r_int = std::max(r_int, needed);
  }

  RoadLayout layout;
  layout.id = config.id;
  layout.family = config.family;

  struct ArmLanes {
    std::vector<int> in_lane;    // lane index per in-lane
    std::vector<int> out_lane;
    std::vector<Vec2> in_inner;  // inner endpoint per in-lane
    std::vector<Vec2> out_inner;
    double d_in = 0.0, d_out = 0.0;
  };
  std::vector<ArmLanes> built(arms.size());

  for (std::size_t ai = 0; ai < arms.size(); ++ai) {
    const ArmGeom& arm = arms[ai];
    Vec2 u = dir_vec(arm.angle);
    double d_in = wrap_angle(arm.angle + kTwoPi / 2);
    double d_out = arm.angle;
    built[ai].d_in = d_in;
    built[ai].d_out = d_out;
    Vec2 r_in = right_of(d_in);
    Vec2 r_out = right_of(d_out);
    for (int k = 0; k < arm.lanes_in; ++k) {
      Vec2 off = ((k + 0.5) * w) * r_in;
      Vec2 outer = kCenter + kArmRadius * u + off;
      Vec2 inner = kCenter + r_int * u + off;
      LaneSpec lane;
      sample_segment(lane.centerline, outer, inner, kSampleStep);
      lane.width = w;
      std::string pid = "a" + std::to_string(ai) + "in" + std::to_string(k);
      lane.entry_port = pid;
      layout.ports.push_back({pid, PortKind::entry, outer, d_in});
      built[ai].in_lane.push_back(int(layout.lanes.size()));
      built[ai].in_inner.push_back(inner);
      layout.lanes.push_back(std::move(lane));
    }
    for (int k = 0; k < arm.lanes_out; ++k) {
      Vec2 off = ((k + 0.5) * w) * r_out;
      Vec2 inner = kCenter + r_int * u + off;
      Vec2 outer = kCenter + kArmRadius * u + off;
      LaneSpec lane;
      sample_segment(lane.centerline, inner, outer, kSampleStep);
      lane.width = w;
      std::string pid = "a" + std::to_string(ai) + "out" + std::to_string(k);
      lane.exit_port = pid;
      layout.ports.push_back({pid, PortKind::exit, outer, d_out});
      built[ai].out_lane.push_back(int(layout.lanes.size()));
      built[ai].out_inner.push_back(inner);
      layout.lanes.push_back(std::move(lane));
    }
    arm_markings(layout.markings, kCenter + r_int * u, kCenter + kArmRadius * u,
                 r_in, arm.lanes_in, arm.lanes_out, w);
  }

  // Connectors: every cross-arm (in-lane, out-lane) pair.
  for (std::size_t ai = 0; ai < arms.size(); ++ai) {
    for (int k = 0; k < arms[ai].lanes_in; ++k) {
      for (std::size_t bi = 0; bi < arms.size(); ++bi) {
        if (bi == ai) continue;
        for (int m = 0; m < arms[bi].lanes_out; ++m) {
          LaneSpec lane;
          lane.centerline = build_connector(built[ai].in_inner[std::size_t(k)],
                                            built[ai].d_in,
                                            built[bi].out_inner[std::size_t(m)],
                                            built[bi].d_out);
          lane.width = w;
          int conn_idx = int(layout.lanes.size());
          layout.lanes.push_back(std::move(lane));
          RouteSpec r;
          r.entry = "a" + std::to_string(ai) + "in" + std::to_string(k);
          r.exit = "a" + std::to_string(bi) + "out" + std::to_string(m);
          r.lane_sequence = {built[ai].in_lane[std::size_t(k)], conn_idx,
                             built[bi].out_lane[std::size_t(m)]};
          layout.connectivity.push_back(std::move(r));
        }
      }
    }
  }
  return layout;
}

RoadLayout build_straight(const LayoutConfig& config) {
  if (config.lanes_forward < 0 || config.lanes_backward < 0 ||
      config.lanes_forward + config.lanes_backward == 0) {
    throw std::invalid_argument("straight road with 0 lanes");
  }
  if (config.lanes_forward > 2 || config.lanes_backward > 2) {
    throw std::invalid_argument("at most 2 lanes per direction supported");
  }
  const double w = config.lane_width;
  RoadLayout layout;
  layout.id = config.id;
  layout.family = config.family;

  double d_fwd = wrap_angle(deg2rad(config.angle_deg));
  double d_bwd = wrap_angle(d_fwd + kTwoPi / 2);
  Vec2 u = dir_vec(d_fwd);

  struct Dir {
    double d;
    int lanes;
    const char* tag;
  };
  Dir dirs[2] = {{d_fwd, config.lanes_forward, "f"},
                 {d_bwd, config.lanes_backward, "b"}};

  std::map<std::string, int> lane_index;
  for (const Dir& dd : dirs) {
    Vec2 r = right_of(dd.d);
    Vec2 ud = dir_vec(dd.d);
    for (int k = 0; k < dd.lanes; ++k) {
      Vec2 off = ((k + 0.5) * w) * r;
      Vec2 start = kCenter - kArmRadius * ud + off;
      Vec2 end = kCenter + kArmRadius * ud + off;
      LaneSpec lane;
      sample_segment(lane.centerline, start, end, kSampleStep);
      lane.width = w;
      std::string ein = std::string(dd.tag) + std::to_string(k) + "in";
      std::string eout = std::string(dd.tag) + std::to_string(k) + "out";
      lane.entry_port = ein;
      lane.exit_port = eout;
      layout.ports.push_back({ein, PortKind::entry, start, dd.d});
      layout.ports.push_back({eout, PortKind::exit, end, dd.d});
      lane_index[std::string(dd.tag) + std::to_string(k)] =
          int(layout.lanes.size());
      layout.lanes.push_back(std::move(lane));
    }
  }

  // Identity routes plus same-direction lane changes blended over an 8 m
  // window around the road midpoint.
  for (const Dir& dd : dirs) {
    for (int k = 0; k < dd.lanes; ++k) {
      for (int m = 0; m < dd.lanes; ++m) {
        std::string from = std::string(dd.tag) + std::to_string(k);
        std::string to = std::string(dd.tag) + std::to_string(m);
        RouteSpec r;
        r.entry = from + "in";
        r.exit = to + "out";
        if (k == m) {
          r.lane_sequence = {lane_index[from]};
        } else {
          const auto& src = layout.lanes[std::size_t(lane_index[from])].centerline;
          const auto& dst = layout.lanes[std::size_t(lane_index[to])].centerline;
          int mid = int(src.size()) / 2;
          int half_window = int(std::ceil(4.0 / kSampleStep));
          int s1 = std::max(1, mid - half_window);
          int s2 = std::min(int(dst.size()) - 2, mid + half_window);
          LaneSpec change;
          change.width = w;
          change.entry_port = r.entry;
          change.exit_port = r.exit;
          for (int t = 0; t <= s1; ++t) append_point(change.centerline, src[std::size_t(t)]);
          std::vector<Vec2> blend;
          sample_hermite(blend, src[std::size_t(s1)], dd.d, dst[std::size_t(s2)], dd.d,
                         kSampleStep);
          for (const Vec2& p : blend) append_point(change.centerline, p);
          for (int t = s2; t < int(dst.size()); ++t) {
            // Exact tail samples from the destination lane so that shared
            // suffixes compare bitwise.
            if (dist(change.centerline.back(), dst[std::size_t(t)]) < 1e-12) continue;
            change.centerline.push_back(dst[std::size_t(t)]);
          }
          r.lane_sequence = {int(layout.lanes.size())};
          layout.lanes.push_back(std::move(change));
        }
        layout.connectivity.push_back(std::move(r));
      }
    }
  }

  // Markings over the whole extent; lateral axis taken right of forward.
  arm_markings(layout.markings, kCenter - kArmRadius * u, kCenter + kArmRadius * u,
               right_of(d_bwd), config.lanes_backward, config.lanes_forward, w);
  return layout;
}

RoadLayout build_fork_or_merge(const LayoutConfig& config, bool fork) {
  if (config.branch_angles_deg.size() < 2) {
    throw std::invalid_argument("fork/merge needs at least 2 branches");
  }
  const double w = config.lane_width;
  double trunk_travel = wrap_angle(deg2rad(config.trunk_angle_deg));
  std::vector<double> branch_travel;
  for (double bdeg : config.branch_angles_deg) {
    branch_travel.push_back(wrap_angle(deg2rad(bdeg)));
  }
  for (std::size_t a = 0; a < branch_travel.size(); ++a) {
    for (std::size_t b = a + 1; b < branch_travel.size(); ++b) {
      if (angle_diff(branch_travel[a], branch_travel[b]) < deg2rad(30.0)) {
        throw std::invalid_argument("arm angle collision");
      }
    }
  }

  RoadLayout layout;
  layout.id = config.id;
  layout.family = config.family;
  const double r_int = kBaseInnerRadius;

  if (fork) {
    // Trunk carries traffic in; arm extends opposite the travel direction.
    Vec2 u_arm = dir_vec(wrap_angle(trunk_travel + kTwoPi / 2));
    Vec2 outer = kCenter + kArmRadius * u_arm;
    Vec2 inner = kCenter + r_int * u_arm;
    LaneSpec trunk;
    sample_segment(trunk.centerline, outer, inner, kSampleStep);
    trunk.width = w;
    trunk.entry_port = "trunk_in";
    layout.ports.push_back({"trunk_in", PortKind::entry, outer, trunk_travel});
    int trunk_idx = int(layout.lanes.size());
    layout.lanes.push_back(std::move(trunk));
    add_solid_stroke(layout.markings, outer + (w / 2) * right_of(trunk_travel),
                     inner + (w / 2) * right_of(trunk_travel));
    add_solid_stroke(layout.markings, outer - (w / 2) * right_of(trunk_travel),
                     inner - (w / 2) * right_of(trunk_travel));

    for (std::size_t b = 0; b < branch_travel.size(); ++b) {
      Vec2 u_b = dir_vec(branch_travel[b]);
      Vec2 binner = kCenter + r_int * u_b;
      Vec2 bouter = kCenter + kArmRadius * u_b;
      LaneSpec branch;
      sample_segment(branch.centerline, binner, bouter, kSampleStep);
      branch.width = w;
      std::string pid = "branch" + std::to_string(b) + "_out";
      branch.exit_port = pid;
      layout.ports.push_back({pid, PortKind::exit, bouter, branch_travel[b]});
      int branch_idx = int(layout.lanes.size());
      layout.lanes.push_back(std::move(branch));
      add_solid_stroke(layout.markings, binner + (w / 2) * right_of(branch_travel[b]),
                       bouter + (w / 2) * right_of(branch_travel[b]));
      add_solid_stroke(layout.markings, binner - (w / 2) * right_of(branch_travel[b]),
                       bouter - (w / 2) * right_of(branch_travel[b]));

      LaneSpec conn;
      conn.centerline = build_connector(inner, trunk_travel, binner, branch_travel[b]);
      conn.width = w;
      int conn_idx = int(layout.lanes.size());
      layout.lanes.push_back(std::move(conn));
      RouteSpec r;
      r.entry = "trunk_in";
      r.exit = pid;
      r.lane_sequence = {trunk_idx, conn_idx, branch_idx};
      layout.connectivity.push_back(std::move(r));
    }
  } else {
    // Merge: branches carry traffic in, trunk carries it out.
    Vec2 u_arm = dir_vec(trunk_travel);
    Vec2 inner = kCenter + r_int * u_arm;
    Vec2 outer = kCenter + kArmRadius * u_arm;
    LaneSpec trunk;
    sample_segment(trunk.centerline, inner, outer, kSampleStep);
    trunk.width = w;
    trunk.exit_port = "trunk_out";
    layout.ports.push_back({"trunk_out", PortKind::exit, outer, trunk_travel});
    int trunk_idx = int(layout.lanes.size());
    layout.lanes.push_back(std::move(trunk));
    add_solid_stroke(layout.markings, inner + (w / 2) * right_of(trunk_travel),
                     outer + (w / 2) * right_of(trunk_travel));
    add_solid_stroke(layout.markings, inner - (w / 2) * right_of(trunk_travel),
                     outer - (w / 2) * right_of(trunk_travel));

    for (std::size_t b = 0; b < branch_travel.size(); ++b) {
      Vec2 u_b = dir_vec(wrap_angle(branch_travel[b] + kTwoPi / 2));
      Vec2 bouter = kCenter + kArmRadius * u_b;
      Vec2 binner = kCenter + r_int * u_b;
      LaneSpec branch;
      sample_segment(branch.centerline, bouter, binner, kSampleStep);
      branch.width = w;
      std::string pid = "branch" + std::to_string(b) + "_in";
      branch.entry_port = pid;
      layout.ports.push_back({pid, PortKind::entry, bouter, branch_travel[b]});
      int branch_idx = int(layout.lanes.size());
      layout.lanes.push_back(std::move(branch));
      add_solid_stroke(layout.markings, bouter + (w / 2) * right_of(branch_travel[b]),
                       binner + (w / 2) * right_of(branch_travel[b]));
      add_solid_stroke(layout.markings, bouter - (w / 2) * right_of(branch_travel[b]),
                       binner - (w / 2) * right_of(branch_travel[b]));

      LaneSpec conn;
      conn.centerline = build_connector(binner, branch_travel[b], inner, trunk_travel);
      conn.width = w;
      int conn_idx = int(layout.lanes.size());
      layout.lanes.push_back(std::move(conn));
      RouteSpec r;
      r.entry = pid;
      r.exit = "trunk_out";
      r.lane_sequence = {branch_idx, conn_idx, trunk_idx};
      layout.connectivity.push_back(std::move(r));
    }
  }
  return layout;
}

}  // namespace

RoadLayout build_layout(const LayoutConfig& config) {
  if (config.generator == "nway") return build_nway(config);
  if (config.generator == "straight") return build_straight(config);
  if (config.generator == "fork") return build_fork_or_merge(config, true);
  if (config.generator == "merge") return build_fork_or_merge(config, false);
  throw std::invalid_argument("unknown generator: " + config.generator);
}

// ---------------------------------------------------------------------------
// Rasterization
// ---------------------------------------------------------------------------

double distance_to_polyline(Vec2 p, const std::vector<Vec2>& polyline) {
  double best = 1e300;
  for (std::size_t k = 0; k + 1 < polyline.size(); ++k) {
    Vec2 a = polyline[k], b = polyline[k + 1];
    Vec2 ab = b - a;
    double len2 = dot(ab, ab);
    double t = len2 > 0 ? std::clamp(dot(p - a, ab) / len2, 0.0, 1.0) : 0.0;
    Vec2 q = a + t * ab;
    best = std::min(best, dist(p, q));
  }
  if (polyline.size() == 1) best = dist(p, polyline[0]);
  return best;
}

bool point_in_corridor(Vec2 p, const std::vector<Vec2>& polyline, double width) {
  return distance_to_polyline(p, polyline) < width / 2.0;
}

namespace {

// Stamps value 1 into channel `ch` for every cell whose center lies strictly
// within `radius` of the polyline. Exact segment distances, so the result
// matches a per-cell distance test.
void stamp_polyline(GridMap& map, int ch, const GridSpec& spec,
                    const std::vector<Vec2>& polyline, double radius) {
  for (std::size_t k = 0; k + 1 < polyline.size(); ++k) {
    Vec2 a = polyline[k], b = polyline[k + 1];
    double minx = std::min(a.x, b.x) - radius, maxx = std::max(a.x, b.x) + radius;
    double miny = std::min(a.y, b.y) - radius, maxy = std::max(a.y, b.y) + radius;
    Cell lo = spec.cell_of({minx, miny});
    Cell hi = spec.cell_of({maxx, maxy});
    Vec2 ab = b - a;
    double len2 = dot(ab, ab);
    for (int i = std::max(0, lo.i); i <= std::min(spec.cells_per_side - 1, hi.i); ++i) {
      for (int j = std::max(0, lo.j); j <= std::min(spec.cells_per_side - 1, hi.j); ++j) {
        Vec2 c = spec.cell_center(i, j);
        double t = len2 > 0 ? std::clamp(dot(c - a, ab) / len2, 0.0, 1.0) : 0.0;
        Vec2 q = a + t * ab;
        if (dist(c, q) < radius) map.at(ch, i, j) = 1.0;
      }
    }
  }
}

}  // namespace

GridMap rasterize_scene(const RoadLayout& layout, const GridSpec& spec,
                        const std::vector<OcclusionRect>& occlusion) {
  GridMap map = GridMap::zeros(2, spec.cells_per_side, spec.cells_per_side);
  for (const auto& lane : layout.lanes) {
    stamp_polyline(map, 0, spec, lane.centerline, lane.width / 2.0);
  }
  for (const auto& stroke : layout.markings) {
    stamp_polyline(map, 1, spec, stroke.points, 0.15);
  }
  for (const auto& rect : occlusion) {
    for (int i = 0; i < spec.cells_per_side; ++i) {
      for (int j = 0; j < spec.cells_per_side; ++j) {
        Vec2 c = spec.cell_center(i, j);
        if (c.x >= rect.min.x && c.x <= rect.max.x && c.y >= rect.min.y &&
            c.y <= rect.max.y) {
          map.at(0, i, j) = 0.5;
          map.at(1, i, j) = 0.5;
        }
      }
    }
  }
  return map;
}

// ---------------------------------------------------------------------------
// Routes
// ---------------------------------------------------------------------------

std::vector<Route> enumerate_routes(const RoadLayout& layout) {
  std::vector<Route> routes;
  for (const auto& rs : layout.connectivity) {
    Route r;
    r.entry = rs.entry;
    r.exit = rs.exit;
    for (std::size_t s = 0; s < rs.lane_sequence.size(); ++s) {
      const auto& lane = layout.lanes.at(std::size_t(rs.lane_sequence[s]));
      if (!r.raw_points.empty()) {
        double gap = dist(r.raw_points.back(), lane.centerline.front());
        if (gap >= 0.5) {
          throw std::runtime_error("route discontinuous for pair " + rs.entry +
                                   " -> " + rs.exit);
        }
      }
      for (const Vec2& p : lane.centerline) {
        if (!r.raw_points.empty() && dist(r.raw_points.back(), p) < 1e-12) continue;
        r.raw_points.push_back(p);
      }
    }
    // Uniform arc-length resampling with per-point forward-difference heading.
    double total = 0.0;
    std::vector<double> cum{0.0};
    for (std::size_t k = 1; k < r.raw_points.size(); ++k) {
      total += dist(r.raw_points[k - 1], r.raw_points[k]);
      cum.push_back(total);
    }
    int n = std::max(1, int(std::ceil(total / kSampleStep)));
    std::size_t seg = 0;
    for (int k = 0; k <= n; ++k) {
      double s = total * double(k) / n;
      while (seg + 1 < cum.size() && cum[seg + 1] < s) ++seg;
      double t = cum[seg + 1] > cum[seg] ? (s - cum[seg]) / (cum[seg + 1] - cum[seg]) : 0.0;
      Vec2 p = r.raw_points[seg] + t * (r.raw_points[seg + 1] - r.raw_points[seg]);
      r.points.push_back({p, 0.0});
    }
    for (std::size_t k = 0; k < r.points.size(); ++k) {
      Vec2 a = r.points[k].pos;
      Vec2 b = k + 1 < r.points.size() ? r.points[k + 1].pos : a;
      if (k + 1 == r.points.size()) {
        r.points[k].heading = r.points[k - 1].heading;
      } else {
        r.points[k].heading = wrap_angle(std::atan2(b.y - a.y, b.x - a.x));
      }
    }
    routes.push_back(std::move(r));
  }
  return routes;
}

// ---------------------------------------------------------------------------
// Ground-truth graph
// ---------------------------------------------------------------------------

namespace {

bool points_equal(Vec2 a, Vec2 b) { return dist(a, b) < kPointTol; }

// Length of the longest prefix shared by all polylines.
std::size_t shared_prefix(const std::vector<const std::vector<Vec2>*>& ps) {
  std::size_t limit = ps.front()->size();
  for (const auto* p : ps) limit = std::min(limit, p->size());
  std::size_t k = 0;
  for (; k < limit; ++k) {
    for (std::size_t r = 1; r < ps.size(); ++r) {
      if (!points_equal((*ps[0])[k], (*ps[r])[k])) return k;
    }
  }
  return k;
}

std::size_t shared_suffix(const std::vector<const std::vector<Vec2>*>& ps) {
  std::size_t limit = ps.front()->size();
  for (const auto* p : ps) limit = std::min(limit, p->size());
  std::size_t k = 0;
  for (; k < limit; ++k) {
    for (std::size_t r = 1; r < ps.size(); ++r) {
      const auto& a = *ps[0];
      const auto& b = *ps[r];
      if (!points_equal(a[a.size() - 1 - k], b[b.size() - 1 - k])) return k;
    }
  }
  return k;
}

std::vector<Cell> to_cells(const std::vector<Vec2>& pts, std::size_t from,
                           std::size_t to, const GridSpec& spec) {
  std::vector<Cell> cells;
  for (std::size_t k = from; k < std::min(to, pts.size()); ++k) {
    Cell c = spec.cell_of(pts[k]);
    if (cells.empty() || !(cells.back() == c)) cells.push_back(c);
  }
  return cells;
}

}  // namespace

graphgen::LaneGraph ground_truth_graph(const RoadLayout& layout,
                                       const GridSpec& spec) {
  using graphgen::EdgeKind;
  using graphgen::LaneGraph;
  using graphgen::VertexKind;

  std::vector<Route> routes = enumerate_routes(layout);
  LaneGraph g;

  // Group routes per entry and per exit port, in port declaration order.
  std::map<std::string, std::vector<std::size_t>> by_entry, by_exit;
  for (std::size_t r = 0; r < routes.size(); ++r) {
    by_entry[routes[r].entry].push_back(r);
    by_exit[routes[r].exit].push_back(r);
  }

  struct EntryData {
    int vertex = -1;
    int fork = -1;
    std::size_t fork_index = 0;  // raw index of the fork point on each route
  };
  struct ExitData {
    int vertex = -1;
    int merge = -1;
    std::size_t suffix_len = 0;
  };
  std::map<std::string, EntryData> entry_data;
  std::map<std::string, ExitData> exit_data;

  int next_id = 0;
  for (const auto& port : layout.ports) {
    if (port.kind == PortKind::entry && by_entry.count(port.id)) {
      EntryData d;
      d.vertex = next_id;
      g.vertices.push_back({next_id++, VertexKind::entry, spec.cell_of(port.position)});
      const auto& group = by_entry[port.id];
      if (group.size() >= 2) {
        std::vector<const std::vector<Vec2>*> ps;
        for (std::size_t r : group) ps.push_back(&routes[r].raw_points);
        std::size_t pref = shared_prefix(ps);
        d.fork_index = pref > 0 ? pref - 1 : 0;
        d.fork = next_id;
        Cell fc = spec.cell_of(routes[group[0]].raw_points[d.fork_index]);
        g.vertices.push_back({next_id++, VertexKind::fork, fc});
      }
      entry_data[port.id] = d;
    }
  }
  for (const auto& port : layout.ports) {
    if (port.kind == PortKind::exit && by_exit.count(port.id)) {
      ExitData d;
      const auto& group = by_exit[port.id];
      if (group.size() >= 2) {
        std::vector<const std::vector<Vec2>*> ps;
        for (std::size_t r : group) ps.push_back(&routes[r].raw_points);
        std::size_t suf = shared_suffix(ps);
        d.suffix_len = suf > 0 ? suf : 1;
        d.merge = next_id;
        const auto& pts = routes[group[0]].raw_points;
        Cell mc = spec.cell_of(pts[pts.size() - d.suffix_len]);
        g.vertices.push_back({next_id++, VertexKind::merge, mc});
      }
      d.vertex = next_id;
      g.vertices.push_back({next_id++, VertexKind::exit, spec.cell_of(port.position)});
      exit_data[port.id] = d;
    }
  }

  // Edges. Shared entry/exit edges are emitted once.
  std::set<std::string> entry_edge_done, exit_edge_done;
  for (const auto& route : routes) {
    const EntryData& ed = entry_data[route.entry];
    const ExitData& xd = exit_data[route.exit];
    const auto& pts = route.raw_points;
    std::size_t merge_index = pts.size() - xd.suffix_len;

    if (ed.fork >= 0 && !entry_edge_done.count(route.entry)) {
      entry_edge_done.insert(route.entry);
      graphgen::Edge e;
      e.src = ed.vertex;
      e.dst = ed.fork;
      e.kind = EdgeKind::entry;
      e.geometry = to_cells(pts, 0, ed.fork_index + 1, spec);
      g.edges.push_back(std::move(e));
    }
    if (xd.merge >= 0 && !exit_edge_done.count(route.exit)) {
      exit_edge_done.insert(route.exit);
      graphgen::Edge e;
      e.src = xd.merge;
      e.dst = xd.vertex;
      e.kind = EdgeKind::exit;
      e.geometry = to_cells(pts, merge_index, pts.size(), spec);
      g.edges.push_back(std::move(e));
    }

    graphgen::Edge e;
    if (ed.fork >= 0 && xd.merge >= 0) {
      e.src = ed.fork;
      e.dst = xd.merge;
      e.kind = EdgeKind::intersection;
      e.geometry = to_cells(pts, ed.fork_index, merge_index + 1, spec);
    } else if (ed.fork >= 0) {
      e.src = ed.fork;
      e.dst = xd.vertex;
      e.kind = EdgeKind::exit;
      e.geometry = to_cells(pts, ed.fork_index, pts.size(), spec);
    } else if (xd.merge >= 0) {
      e.src = ed.vertex;
      e.dst = xd.merge;
      e.kind = EdgeKind::entry;
      e.geometry = to_cells(pts, 0, merge_index + 1, spec);
    } else {
      e.src = ed.vertex;
      e.dst = xd.vertex;
      e.kind = EdgeKind::lane;
      e.geometry = to_cells(pts, 0, pts.size(), spec);
    }
    g.edges.push_back(std::move(e));
  }
  return g;
}

}  // namespace lanegraph::scene
