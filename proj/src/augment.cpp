#include "lanegraph/augment.hpp"

#include <algorithm>
#include <cmath>

namespace lanegraph::augment {

namespace {

constexpr Vec2 kCenter{32.0, 32.0};
constexpr double kInputCell = 0.25;
constexpr int kWarpSmoothRadius = 16;
constexpr double kWarpMaxAmplitude = 4.0;  // input cells
constexpr int kTranslationRange = 16;

// Bilinear sample of a warp channel at continuous input-grid coordinates
// (cell-center aligned), clamped at the borders.
double sample_channel(const GridMap& m, int c, double ci, double cj) {
  double fi = std::clamp(ci, 0.0, double(m.height - 1));
  double fj = std::clamp(cj, 0.0, double(m.width - 1));
  int i0 = int(std::floor(fi));
  int j0 = int(std::floor(fj));
  int i1 = std::min(i0 + 1, m.height - 1);
  int j1 = std::min(j0 + 1, m.width - 1);
  double ti = fi - i0, tj = fj - j0;
  double v00 = m.at(c, i0, j0), v01 = m.at(c, i0, j1);
  double v10 = m.at(c, i1, j0), v11 = m.at(c, i1, j1);
  return (1 - ti) * ((1 - tj) * v00 + tj * v01) + ti * ((1 - tj) * v10 + tj * v11);
}

// Warp displacement in meters at a world position.
Vec2 warp_at(const GridMap& warp, Vec2 p) {
  double ci = p.y / kInputCell - 0.5;
  double cj = p.x / kInputCell - 0.5;
  return {sample_channel(warp, 0, ci, cj) * kInputCell,
          sample_channel(warp, 1, ci, cj) * kInputCell};
}

void box_smooth(std::vector<double>& v, int h, int w, int radius) {
  std::vector<double> tmp(v.size());
  // rows
  for (int i = 0; i < h; ++i) {
    double acc = 0.0;
    // prefix window
    for (int j = 0; j < w; ++j) {
      int lo = j - radius - 1, hi = j + radius;
      if (j == 0) {
        for (int k = 0; k <= std::min(radius, w - 1); ++k) acc += v[std::size_t(i) * w + k];
      } else {
        if (hi < w) acc += v[std::size_t(i) * w + hi];
        if (lo >= 0) acc -= v[std::size_t(i) * w + lo];
      }
      int n = std::min(j + radius, w - 1) - std::max(j - radius, 0) + 1;
      tmp[std::size_t(i) * w + j] = acc / n;
    }
  }
  // columns
  for (int j = 0; j < w; ++j) {
    double acc = 0.0;
    for (int i = 0; i < h; ++i) {
      int lo = i - radius - 1, hi = i + radius;
      if (i == 0) {
        for (int k = 0; k <= std::min(radius, h - 1); ++k) acc += tmp[std::size_t(k) * w + j];
      } else {
        if (hi < h) acc += tmp[std::size_t(hi) * w + j];
        if (lo >= 0) acc -= tmp[std::size_t(lo) * w + j];
      }
      int n = std::min(i + radius, h - 1) - std::max(i - radius, 0) + 1;
      v[std::size_t(i) * w + j] = acc / n;
    }
  }
}

}  // namespace

AugmentParams sample_params(std::uint64_t seed) {
  Rng rng(seed);
  AugmentParams p;
  p.seed = seed;
  p.rotation = rng.real01() * kTwoPi;
  p.translation_dx = int(rng.uniform_int(-kTranslationRange, kTranslationRange));
  p.translation_dy = int(rng.uniform_int(-kTranslationRange, kTranslationRange));
  p.warp = GridMap::zeros(2, 256, 256);
  for (double& v : p.warp.data) v = rng.normal();
  for (int c = 0; c < 2; ++c) {
    std::vector<double> ch(p.warp.data.begin() + c * 256 * 256,
                           p.warp.data.begin() + (c + 1) * 256 * 256);
    box_smooth(ch, 256, 256, kWarpSmoothRadius);
    std::copy(ch.begin(), ch.end(), p.warp.data.begin() + c * 256 * 256);
  }
  double max_mag = 0.0;
  for (int i = 0; i < 256; ++i) {
    for (int j = 0; j < 256; ++j) {
      max_mag = std::max(max_mag, std::hypot(p.warp.at(0, i, j), p.warp.at(1, i, j)));
    }
  }
  if (max_mag > 0.0) {
    double s = kWarpMaxAmplitude / max_mag;
    for (double& v : p.warp.data) v *= s;
  }
  return p;
}

Vec2 transform_point(Vec2 p, const AugmentParams& params) {
  double c = std::cos(params.rotation), s = std::sin(params.rotation);
  Vec2 d = p - kCenter;
  Vec2 q{kCenter.x + c * d.x - s * d.y + params.translation_dx * kInputCell,
         kCenter.y + s * d.x + c * d.y + params.translation_dy * kInputCell};
  if (params.has_warp()) {
    Vec2 w = warp_at(params.warp, q);
    q = q + w;
  }
  return q;
}

double transform_heading(Vec2 p, double heading, const AugmentParams& params) {
  const double step = 0.1;
  Vec2 q0 = transform_point(p, params);
  Vec2 q1 = transform_point(p + step * Vec2{std::cos(heading), std::sin(heading)},
                            params);
  return wrap_angle(std::atan2(q1.y - q0.y, q1.x - q0.x));
}

scene::RoadLayout transform_layout(const scene::RoadLayout& layout,
                                   const AugmentParams& params) {
  scene::RoadLayout out = layout;
  for (auto& lane : out.lanes) {
    for (auto& p : lane.centerline) p = transform_point(p, params);
  }
  for (auto& port : out.ports) {
    port.heading = transform_heading(port.position, port.heading, params);
    port.position = transform_point(port.position, params);
  }
  for (auto& stroke : out.markings) {
    for (auto& p : stroke.points) p = transform_point(p, params);
  }
  return out;
}

GridMap apply(const GridMap& map, const AugmentParams& params,
              double resolution_scale, Interpolation interpolation,
              double fill) {
  if (!map.square()) throw std::invalid_argument("apply: map must be square");
  const double mpc = kInputCell / resolution_scale;
  GridMap out = GridMap::zeros(map.channels, map.height, map.width);
  const double c = std::cos(params.rotation), s = std::sin(params.rotation);
  const Vec2 t{params.translation_dx * kInputCell, params.translation_dy * kInputCell};

  for (int i = 0; i < map.height; ++i) {
    for (int j = 0; j < map.width; ++j) {
      Vec2 w{(j + 0.5) * mpc, (i + 0.5) * mpc};
      // Backward map: unwarp (first order), untranslate, unrotate.
      Vec2 q = w;
      if (params.has_warp()) q = q - warp_at(params.warp, w);
      q = q - t - kCenter;
      Vec2 src{kCenter.x + c * q.x + s * q.y, kCenter.y - s * q.x + c * q.y};
      double ci = src.y / mpc - 0.5;
      double cj = src.x / mpc - 0.5;
      bool inside = ci > -0.5 && cj > -0.5 && ci < map.height - 0.5 &&
                    cj < map.width - 0.5;
      for (int ch = 0; ch < map.channels; ++ch) {
        double v;
        if (!inside) {
          v = fill;
        } else if (interpolation == Interpolation::nearest) {
          v = map.at(ch, int(std::llround(ci)), int(std::llround(cj)));
        } else {
          v = sample_channel(map, ch, ci, cj);
        }
        out.at(ch, i, j) = v;
      }
      if (interpolation == Interpolation::bilinear_threshold && inside) {
        for (int ch = 0; ch < map.channels; ++ch) {
          double v = out.at(ch, i, j);
          out.at(ch, i, j) = v < 0.25 ? 0.0 : (v < 0.75 ? 0.5 : 1.0);
        }
      }
    }
  }

  if (interpolation == Interpolation::vector) {
    for (int ch = 0; ch + 1 < map.channels; ch += 2) {
      for (int i = 0; i < map.height; ++i) {
        for (int j = 0; j < map.width; ++j) {
          double vx = out.at(ch, i, j), vy = out.at(ch + 1, i, j);
          out.at(ch, i, j) = c * vx - s * vy;
          out.at(ch + 1, i, j) = s * vx + c * vy;
        }
      }
    }
  }
  return out;
}

}  // namespace lanegraph::augment
