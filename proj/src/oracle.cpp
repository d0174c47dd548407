#include "lanegraph/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace lanegraph::oracle {

namespace {

constexpr double kBlobRadius = 3.0;      // label cells
constexpr double kLabelKappa = 8.0;
constexpr double kDedupAngle = 0.2617993877991494;  // 15 degrees

// Per-cell direction clusters accumulated while stamping routes.
struct DirCluster {
  double sin_sum = 0.0;
  double cos_sum = 0.0;
  int support = 0;
  double mean() const { return wrap_angle(std::atan2(sin_sum, cos_sum)); }
};

struct DirAccum {
  std::vector<std::vector<DirCluster>> cells;
  explicit DirAccum(int n) : cells(std::size_t(n)) {}

  void add(int flat, double angle) {
    auto& list = cells[std::size_t(flat)];
    for (auto& cl : list) {
      if (angle_diff(cl.mean(), angle) <= kDedupAngle) {
        cl.sin_sum += std::sin(angle);
        cl.cos_sum += std::cos(angle);
        ++cl.support;
        return;
      }
    }
    list.push_back({std::sin(angle), std::cos(angle), 1});
  }
};

// Stamps one route into the lane map and records, per covered cell, the
// tangent of the nearest route segment.
void stamp_route(const scene::Route& route, double width, const GridSpec& spec,
                 GridMap* lane, DirAccum* dirs) {
  const int n = spec.cells_per_side;
  const double radius = width / 2.0;
  std::vector<double> best(std::size_t(n) * n, 1e300);
  std::vector<double> best_angle(std::size_t(n) * n, 0.0);
  const auto& pts = route.points;
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    Vec2 a = pts[k].pos, b = pts[k + 1].pos;
    double heading = pts[k].heading;
    double minx = std::min(a.x, b.x) - radius, maxx = std::max(a.x, b.x) + radius;
    double miny = std::min(a.y, b.y) - radius, maxy = std::max(a.y, b.y) + radius;
    Cell lo = spec.cell_of({minx, miny});
    Cell hi = spec.cell_of({maxx, maxy});
    Vec2 ab = b - a;
    double len2 = dot(ab, ab);
    for (int i = std::max(0, lo.i); i <= std::min(n - 1, hi.i); ++i) {
      for (int j = std::max(0, lo.j); j <= std::min(n - 1, hi.j); ++j) {
        Vec2 c = spec.cell_center(i, j);
        double t = len2 > 0 ? std::clamp(dot(c - a, ab) / len2, 0.0, 1.0) : 0.0;
        double d = dist(c, a + t * ab);
        if (d < radius) {
          if (lane) lane->at(0, i, j) = 1.0;
          std::size_t flat = std::size_t(i) * n + j;
          if (d < best[flat]) {
            best[flat] = d;
            best_angle[flat] = heading;
          }
        }
      }
    }
  }
  if (dirs) {
    for (int flat = 0; flat < n * n; ++flat) {
      if (best[std::size_t(flat)] < 1e300) dirs->add(flat, best_angle[std::size_t(flat)]);
    }
  }
}

void stamp_blob(GridMap* map, const GridSpec& spec, Vec2 position) {
  Cell center = spec.cell_of(position);
  int r = int(kBlobRadius) + 1;
  for (int di = -r; di <= r; ++di) {
    for (int dj = -r; dj <= r; ++dj) {
      int i = center.i + di, j = center.j + dj;
      if (!map->in_bounds(i, j)) continue;
      double d = std::hypot(double(di), double(dj));
      double v = 1.0 - d / kBlobRadius;
      if (v > 0.0) map->at(0, i, j) = std::max(map->at(0, i, j), v);
    }
  }
}

void stamp_binary_blob(GridMap* map, int ch, const GridSpec& spec, Vec2 position) {
  Cell center = spec.cell_of(position);
  int r = int(kBlobRadius) + 1;
  for (int di = -r; di <= r; ++di) {
    for (int dj = -r; dj <= r; ++dj) {
      int i = center.i + di, j = center.j + dj;
      if (!map->in_bounds(i, j)) continue;
      if (std::hypot(double(di), double(dj)) < kBlobRadius) map->at(ch, i, j) = 1.0;
    }
  }
}

AffordanceBundle build_bundle(const scene::RoadLayout& layout,
                              const GridSpec& spec,
                              const std::vector<scene::Route>& routes) {
  const int n = spec.cells_per_side;
  AffordanceBundle b;
  b.lane = GridMap::zeros(1, n, n);
  b.entry = GridMap::zeros(1, n, n);
  b.exit = GridMap::zeros(1, n, n);
  b.direction = graphgen::DirectionalField::zeros(n, n);

  DirAccum dirs(n * n);
  double width = layout.lanes.empty() ? 3.5 : layout.lanes.front().width;
  for (const auto& route : routes) {
    stamp_route(route, width, spec, &b.lane, &dirs);
  }
  bool warned = false;
  for (int flat = 0; flat < n * n; ++flat) {
    auto& list = dirs.cells[std::size_t(flat)];
    if (list.empty()) continue;
    std::stable_sort(list.begin(), list.end(),
                     [](const DirCluster& a, const DirCluster& c) {
                       return a.support > c.support;
                     });
    if (list.size() > 3 && !warned) {
      b.warnings.push_back("more than 3 well-separated directions at a cell; "
                           "keeping the 3 largest");
      warned = true;
    }
    int k = std::min<int>(3, int(list.size()));
    int i = flat / n, j = flat % n;
    for (int c = 0; c < k; ++c) {
      b.direction.weight[b.direction.index(c, i, j)] = 1.0 / k;
      b.direction.mean[b.direction.index(c, i, j)] = list[std::size_t(c)].mean();
      b.direction.kappa[b.direction.index(c, i, j)] = kLabelKappa;
    }
  }
  for (const auto& port : layout.ports) {
    if (port.kind == scene::PortKind::entry) {
      stamp_blob(&b.entry, spec, port.position);
    } else {
      stamp_blob(&b.exit, spec, port.position);
    }
  }
  return b;
}

}  // namespace

AffordanceBundle synth_affordances(const scene::RoadLayout& layout,
                                   const GridSpec& spec) {
  return build_bundle(layout, spec, scene::enumerate_routes(layout));
}

TrainingSample make_sample(const scene::RoadLayout& layout,
                           std::size_t route_index, const GridSpec& input_spec,
                           const augment::AugmentParams& params) {
  scene::RoadLayout aug = augment::transform_layout(layout, params);
  GridSpec label_spec = label_grid_spec();

  TrainingSample s;
  s.input = scene::rasterize_scene(aug, input_spec);
  s.label = GridMap::zeros(4, label_spec.cells_per_side, label_spec.cells_per_side);

  std::vector<scene::Route> routes = scene::enumerate_routes(aug);
  const scene::Route& route = routes.at(route_index);
  double width = aug.lanes.empty() ? 3.5 : aug.lanes.front().width;

  GridMap mask = GridMap::zeros(1, label_spec.cells_per_side, label_spec.cells_per_side);
  DirAccum dirs(label_spec.cells_per_side * label_spec.cells_per_side);
  stamp_route(route, width, label_spec, &mask, &dirs);
  const int n = label_spec.cells_per_side;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (mask.at(0, i, j) <= 0.0) continue;
      s.label.at(0, i, j) = 1.0;
      const auto& list = dirs.cells[std::size_t(i) * n + j];
      double a = list.front().mean();
      s.label.at(1, i, j) = std::cos(a);
      s.label.at(2, i, j) = std::sin(a);
    }
  }
  const scene::Port* pe = aug.find_port(route.entry);
  const scene::Port* px = aug.find_port(route.exit);
  stamp_binary_blob(&s.label, 3, label_spec, pe->position);
  stamp_binary_blob(&s.label, 3, label_spec, px->position);
  return s;
}

EvalLabel make_eval_label(const scene::RoadLayout& layout,
                          const GridSpec& input_spec,
                          const augment::AugmentParams& params) {
  scene::RoadLayout aug = augment::transform_layout(layout, params);
  GridSpec label_spec = label_grid_spec();
  EvalLabel out;
  std::vector<scene::Route> routes = scene::enumerate_routes(aug);
  out.bundle = build_bundle(aug, label_spec, routes);
  out.graph = scene::ground_truth_graph(aug, label_spec);
  out.input = scene::rasterize_scene(aug, input_spec);

  // Training-format label with every route superimposed; direction channels
  // carry the dominant mode.
  out.label = GridMap::zeros(4, label_spec.cells_per_side, label_spec.cells_per_side);
  const int n = label_spec.cells_per_side;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (out.bundle.lane.at(0, i, j) <= 0.0) continue;
      out.label.at(0, i, j) = 1.0;
      auto m = out.bundle.direction.dominant_mean(i, j);
      if (m) {
        out.label.at(1, i, j) = std::cos(*m);
        out.label.at(2, i, j) = std::sin(*m);
      }
    }
  }
  for (const auto& port : aug.ports) {
    stamp_binary_blob(&out.label, 3, label_spec, port.position);
  }
  return out;
}

AffordanceBundle inject_noise(const AffordanceBundle& bundle, double flip_prob,
                              double dir_jitter_sigma, std::uint64_t seed) {
  if (flip_prob < 0.0 || flip_prob > 0.5) {
    throw std::invalid_argument("inject_noise: flip_prob outside [0, 0.5]");
  }
  if (flip_prob == 0.0 && dir_jitter_sigma == 0.0) return bundle;
  AffordanceBundle out = bundle;
  const int n = bundle.lane.height;

  // Coupled flips: each cell gets one uniform draw; flipping at p implies
  // flipping at any p' >= p, so error curves are monotone in flip_prob.
  Rng flip_rng(mix_seed(seed, 1));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double u = flip_rng.real01();
      if (u < flip_prob) {
        out.lane.at(0, i, j) = bundle.lane.at(0, i, j) > 0.5 ? 0.0 : 1.0;
      }
    }
  }

  Rng jitter_rng(mix_seed(seed, 2));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < graphgen::DirectionalField::kMaxComponents; ++k) {
        std::size_t idx = out.direction.index(k, i, j);
        double z = jitter_rng.normal();  // one draw per slot, scaled by sigma
        if (out.direction.weight[idx] <= 0.0) continue;
        out.direction.mean[idx] =
            wrap_angle(out.direction.mean[idx] + dir_jitter_sigma * z);
      }
    }
  }

  // Blob centers shift by up to 2 cells: re-render each blob component at the
  // jittered centroid.
  Rng blob_rng(mix_seed(seed, 3));
  GridSpec spec = label_grid_spec();
  for (GridMap* map : {&out.entry, &out.exit}) {
    std::vector<Cell> centers = graphgen::extract_points(*map, 0.5);
    *map = GridMap::zeros(1, n, n);
    for (const Cell& c : centers) {
      double ang = blob_rng.real01() * kTwoPi;
      double rad = blob_rng.real01() * 2.0;
      int di = int(std::llround(rad * std::sin(ang)));
      int dj = int(std::llround(rad * std::cos(ang)));
      Vec2 pos = spec.cell_center(c.i + di, c.j + dj);
      stamp_blob(map, spec, pos);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Packing
// ---------------------------------------------------------------------------

GridMap stack_affordance(const AffordanceBundle& b) {
  GridMap out = GridMap::zeros(3, b.lane.height, b.lane.width);
  std::copy(b.lane.data.begin(), b.lane.data.end(), out.data.begin());
  std::copy(b.entry.data.begin(), b.entry.data.end(),
            out.data.begin() + out.index(1, 0, 0));
  std::copy(b.exit.data.begin(), b.exit.data.end(),
            out.data.begin() + out.index(2, 0, 0));
  return out;
}

GridMap pack_direction(const graphgen::DirectionalField& f) {
  GridMap out = GridMap::zeros(9, f.height, f.width);
  std::size_t plane = std::size_t(f.height) * f.width;
  for (int k = 0; k < 3; ++k) {
    std::copy(f.weight.begin() + k * plane, f.weight.begin() + (k + 1) * plane,
              out.data.begin() + k * plane);
    std::copy(f.mean.begin() + k * plane, f.mean.begin() + (k + 1) * plane,
              out.data.begin() + (3 + k) * plane);
    std::copy(f.kappa.begin() + k * plane, f.kappa.begin() + (k + 1) * plane,
              out.data.begin() + (6 + k) * plane);
  }
  return out;
}

graphgen::DirectionalField unpack_direction(const GridMap& m) {
  graphgen::DirectionalField f = graphgen::DirectionalField::zeros(m.height, m.width);
  std::size_t plane = std::size_t(m.height) * m.width;
  for (int k = 0; k < 3; ++k) {
    std::copy(m.data.begin() + k * plane, m.data.begin() + (k + 1) * plane,
              f.weight.begin() + k * plane);
    std::copy(m.data.begin() + (3 + k) * plane, m.data.begin() + (4 + k) * plane,
              f.mean.begin() + k * plane);
    std::copy(m.data.begin() + (6 + k) * plane, m.data.begin() + (7 + k) * plane,
              f.kappa.begin() + k * plane);
  }
  return f;
}

AffordanceBundle unstack_affordance(const GridMap& aff, const GridMap& dir) {
  AffordanceBundle b;
  int h = aff.height, w = aff.width;
  b.lane = GridMap::zeros(1, h, w);
  b.entry = GridMap::zeros(1, h, w);
  b.exit = GridMap::zeros(1, h, w);
  std::size_t plane = std::size_t(h) * w;
  std::copy(aff.data.begin(), aff.data.begin() + plane, b.lane.data.begin());
  std::copy(aff.data.begin() + plane, aff.data.begin() + 2 * plane,
            b.entry.data.begin());
  std::copy(aff.data.begin() + 2 * plane, aff.data.begin() + 3 * plane,
            b.exit.data.begin());
  b.direction = unpack_direction(dir);
  return b;
}

}  // namespace lanegraph::oracle
