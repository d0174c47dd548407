#include "lanegraph/graphgen.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>

#include "json.hpp"

namespace lanegraph::graphgen {

const char* to_string(VertexKind k) {
  switch (k) {
    case VertexKind::entry: return "entry";
    case VertexKind::fork: return "fork";
    case VertexKind::merge: return "merge";
    case VertexKind::exit: return "exit";
  }
  return "?";
}

const char* to_string(EdgeKind k) {
  switch (k) {
    case EdgeKind::entry: return "entry";
    case EdgeKind::intersection: return "intersection";
    case EdgeKind::exit: return "exit";
    case EdgeKind::lane: return "lane";
  }
  return "?";
}

namespace {

VertexKind vertex_kind_from(const std::string& s) {
  if (s == "entry") return VertexKind::entry;
  if (s == "fork") return VertexKind::fork;
  if (s == "merge") return VertexKind::merge;
  if (s == "exit") return VertexKind::exit;
  throw std::runtime_error("unknown vertex kind: " + s);
}

EdgeKind edge_kind_from(const std::string& s) {
  if (s == "entry") return EdgeKind::entry;
  if (s == "intersection") return EdgeKind::intersection;
  if (s == "exit") return EdgeKind::exit;
  if (s == "lane") return EdgeKind::lane;
  throw std::runtime_error("unknown edge kind: " + s);
}

}  // namespace

const Vertex* LaneGraph::find(int id) const {
  for (const auto& v : vertices) {
    if (v.id == id) return &v;
  }
  return nullptr;
}

std::string LaneGraph::to_json() const {
  nlohmann::json j;
  j["vertices"] = nlohmann::json::array();
  for (const auto& v : vertices) {
    nlohmann::json jv;
    jv["id"] = v.id;
    jv["kind"] = to_string(v.kind);
    jv["cell"] = {v.cell.i, v.cell.j};
    j["vertices"].push_back(jv);
  }
  j["edges"] = nlohmann::json::array();
  for (const auto& e : edges) {
    nlohmann::json je;
    je["src"] = e.src;
    je["dst"] = e.dst;
    je["kind"] = to_string(e.kind);
    nlohmann::json geo = nlohmann::json::array();
    for (const auto& c : e.geometry) geo.push_back({c.i, c.j});
    je["geometry"] = geo;
    j["edges"].push_back(je);
  }
  j["warnings"] = warnings;
  return j.dump(2) + "\n";
}

LaneGraph LaneGraph::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  LaneGraph g;
  for (const auto& jv : j.at("vertices")) {
    Vertex v;
    v.id = jv.at("id").get<int>();
    v.kind = vertex_kind_from(jv.at("kind").get<std::string>());
    v.cell = {jv.at("cell")[0].get<int>(), jv.at("cell")[1].get<int>()};
    g.vertices.push_back(v);
  }
  for (const auto& je : j.at("edges")) {
    Edge e;
    e.src = je.at("src").get<int>();
    e.dst = je.at("dst").get<int>();
    e.kind = edge_kind_from(je.at("kind").get<std::string>());
    for (const auto& jc : je.at("geometry")) {
      e.geometry.push_back({jc[0].get<int>(), jc[1].get<int>()});
    }
    g.edges.push_back(e);
  }
  if (j.contains("warnings")) {
    for (const auto& w : j["warnings"]) g.warnings.push_back(w.get<std::string>());
  }
  return g;
}

// ---------------------------------------------------------------------------
// Validator
// ---------------------------------------------------------------------------

std::vector<std::string> validate_graph(const LaneGraph& g) {
  std::vector<std::string> violations;
  std::map<int, const Vertex*> byid;
  for (const auto& v : g.vertices) byid[v.id] = &v;

  std::map<int, std::vector<const Edge*>> out;
  std::map<int, int> indeg, outdeg;
  for (const auto& v : g.vertices) {
    indeg[v.id] = 0;
    outdeg[v.id] = 0;
  }
  bool refs_ok = true;
  for (const auto& e : g.edges) {
    if (!byid.count(e.src) || !byid.count(e.dst)) {
      violations.push_back("edge references unknown vertex");
      refs_ok = false;
      continue;
    }
    out[e.src].push_back(&e);
    ++indeg[e.dst];
    ++outdeg[e.src];
  }
  if (!refs_ok) return violations;

  // (a) acyclicity (Kahn)
  {
    std::map<int, int> deg = indeg;
    std::vector<int> stack;
    for (const auto& [id, d] : deg) {
      if (d == 0) stack.push_back(id);
    }
    std::size_t seen = 0;
    while (!stack.empty()) {
      int id = stack.back();
      stack.pop_back();
      ++seen;
      for (const Edge* e : out[id]) {
        if (--deg[e->dst] == 0) stack.push_back(e->dst);
      }
    }
    if (seen != g.vertices.size()) violations.push_back("(a) cycle exists");
  }

  // (b) every maximal path from an entry reaches an exit in 1..3 edges
  {
    for (const auto& v : g.vertices) {
      if (v.kind != VertexKind::entry) continue;
      if (out[v.id].empty()) {
        violations.push_back("(b) entry " + std::to_string(v.id) +
                             " has a 0-edge path");
        continue;
      }
      // DFS with depth cap; report any maximal path that overruns or dead-ends.
      struct Frame {
        int vertex;
        int depth;
      };
      std::vector<Frame> stack{{v.id, 0}};
      while (!stack.empty()) {
        Frame f = stack.back();
        stack.pop_back();
        const Vertex* cur = byid[f.vertex];
        if (cur->kind == VertexKind::exit) continue;
        if (f.depth >= 3) {
          violations.push_back("(b) path from entry " + std::to_string(v.id) +
                               " exceeds 3 edges");
          continue;
        }
        if (out[f.vertex].empty() && f.depth > 0) {
          violations.push_back("(b) path from entry " + std::to_string(v.id) +
                               " dead-ends at vertex " + std::to_string(f.vertex));
          continue;
        }
        for (const Edge* e : out[f.vertex]) {
          stack.push_back({e->dst, f.depth + 1});
        }
      }
    }
  }

  // (c) fork/merge degree rules
  for (const auto& v : g.vertices) {
    if (v.kind == VertexKind::fork && outdeg[v.id] < 2) {
      violations.push_back("(c) fork " + std::to_string(v.id) +
                           " has outdegree " + std::to_string(outdeg[v.id]));
    }
    if (v.kind == VertexKind::merge && indeg[v.id] < 2) {
      violations.push_back("(c) merge " + std::to_string(v.id) +
                           " has indegree " + std::to_string(indeg[v.id]));
    }
  }

  // (d) edge-kind sequencing; point intersections admit entry->merge and
  // fork->exit (Corollary 3).
  for (const auto& e : g.edges) {
    VertexKind s = byid[e.src]->kind;
    VertexKind d = byid[e.dst]->kind;
    bool ok = false;
    switch (e.kind) {
      case EdgeKind::entry:
        ok = s == VertexKind::entry &&
             (d == VertexKind::fork || d == VertexKind::merge);
        break;
      case EdgeKind::intersection:
        ok = s == VertexKind::fork && d == VertexKind::merge;
        break;
      case EdgeKind::exit:
        ok = (s == VertexKind::fork || s == VertexKind::merge) &&
             d == VertexKind::exit;
        break;
      case EdgeKind::lane:
        ok = s == VertexKind::entry && d == VertexKind::exit;
        break;
    }
    if (!ok) {
      violations.push_back(std::string("(d) ") + to_string(e.kind) +
                           " edge with vertex kinds " + to_string(s) + "->" +
                           to_string(d));
    }
  }

  // (e) intersections are disjoint subgraphs. A vertex acting as both fork
  // and merge fuses two intersections; in a component holding both kinds,
  // every fork must feed some merge and every merge must be fed by some fork.
  {
    for (const auto& v : g.vertices) {
      if ((v.kind == VertexKind::fork || v.kind == VertexKind::merge) &&
          indeg[v.id] >= 2 && outdeg[v.id] >= 2) {
        violations.push_back("(e) vertex " + std::to_string(v.id) +
                             " acts as fork and merge at once");
      }
    }
    // Components over fork/merge vertices linked by intersection edges.
    std::map<int, int> comp;
    int next_comp = 0;
    std::map<int, std::vector<int>> adj;
    for (const auto& e : g.edges) {
      if (e.kind != EdgeKind::intersection) continue;
      adj[e.src].push_back(e.dst);
      adj[e.dst].push_back(e.src);
    }
    for (const auto& v : g.vertices) {
      if (v.kind != VertexKind::fork && v.kind != VertexKind::merge) continue;
      if (comp.count(v.id)) continue;
      int c = next_comp++;
      std::vector<int> stack{v.id};
      comp[v.id] = c;
      while (!stack.empty()) {
        int id = stack.back();
        stack.pop_back();
        for (int n : adj[id]) {
          if (!comp.count(n)) {
            comp[n] = c;
            stack.push_back(n);
          }
        }
      }
    }
    std::map<int, std::pair<int, int>> kinds_in_comp;  // forks, merges
    std::map<int, std::pair<int, int>> linked_in_comp;
    for (const auto& v : g.vertices) {
      if (!comp.count(v.id)) continue;
      auto& k = kinds_in_comp[comp[v.id]];
      auto& l = linked_in_comp[comp[v.id]];
      bool linked = adj.count(v.id) && !adj[v.id].empty();
      if (v.kind == VertexKind::fork) {
        ++k.first;
        if (linked) ++l.first;
      } else {
        ++k.second;
        if (linked) ++l.second;
      }
    }
    for (const auto& [c, k] : kinds_in_comp) {
      if (k.first > 0 && k.second > 0) {
        const auto& l = linked_in_comp[c];
        if (l.first != k.first || l.second != k.second) {
          violations.push_back(
              "(e) intersection component " + std::to_string(c) +
              " has forks and merges without mutual intersection edges");
        }
      }
    }
  }

  return violations;
}

// ---------------------------------------------------------------------------
// Directional field
// ---------------------------------------------------------------------------

DirectionalField DirectionalField::zeros(int height, int width) {
  DirectionalField f;
  f.height = height;
  f.width = width;
  std::size_t n = std::size_t(kMaxComponents) * height * width;
  f.weight.assign(n, 0.0);
  f.mean.assign(n, 0.0);
  f.kappa.assign(n, 0.0);
  return f;
}

int DirectionalField::active_components(int i, int j) const {
  int n = 0;
  for (int k = 0; k < kMaxComponents; ++k) {
    if (weight[index(k, i, j)] > 0.0) ++n;
  }
  return n;
}

learning::VonMisesMixture DirectionalField::mixture_at(int i, int j) const {
  learning::VonMisesMixture m;
  for (int k = 0; k < kMaxComponents; ++k) {
    double w = weight[index(k, i, j)];
    if (w <= 0.0) continue;
    m.components.push_back({w, mean[index(k, i, j)], kappa[index(k, i, j)]});
  }
  return m;
}

std::optional<double> DirectionalField::dominant_mean(int i, int j) const {
  double best_w = 0.0;
  double best_mu = 0.0;
  for (int k = 0; k < kMaxComponents; ++k) {
    double w = weight[index(k, i, j)];
    if (w > best_w) {
      best_w = w;
      best_mu = mean[index(k, i, j)];
    }
  }
  if (best_w <= 0.0) return std::nullopt;
  return best_mu;
}

// ---------------------------------------------------------------------------
// Preprocessing and adjacency
// ---------------------------------------------------------------------------

GridMap preprocess_lane_map(const GridMap& lane) {
  const int h = lane.height, w = lane.width;
  GridMap bin = GridMap::zeros(1, h, w);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      bin.at(0, i, j) = lane.at(0, i, j) > 0.5 ? 1.0 : 0.0;
    }
  }
  // Box average over offsets [-4,+3] via a summed-area table, zero padded.
  std::vector<double> sat(std::size_t(h + 1) * (w + 1), 0.0);
  auto sat_at = [&](int i, int j) -> double& {
    return sat[std::size_t(i) * (w + 1) + j];
  };
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      sat_at(i + 1, j + 1) = bin.at(0, i, j) + sat_at(i, j + 1) +
                             sat_at(i + 1, j) - sat_at(i, j);
    }
  }
  GridMap out = GridMap::zeros(1, h, w);
  for (int i = 0; i < h; ++i) {
    int i0 = std::max(0, i - 4), i1 = std::min(h, i + 4);  // rows [i-4, i+3]
    for (int j = 0; j < w; ++j) {
      int j0 = std::max(0, j - 4), j1 = std::min(w, j + 4);
      double s = sat_at(i1, j1) - sat_at(i0, j1) - sat_at(i1, j0) + sat_at(i0, j0);
      double y = s / 64.0;
      double y2 = y * y;
      double y4 = y2 * y2;
      out.at(0, i, j) = y4 * y4;
    }
  }
  return out;
}

std::optional<double> AdjacencyField::edge_weight(const Cell& a,
                                                  const Cell& b) const {
  int di = b.i - a.i, dj = b.j - a.j;
  if (di < -1 || di > 1 || dj < -1 || dj > 1 || (di == 0 && dj == 0)) {
    return std::nullopt;
  }
  if (!lane_tilde.in_bounds(b.i, b.j) || !lane_tilde.in_bounds(a.i, a.j)) {
    return std::nullopt;
  }
  double yb = lane_tilde.at(0, b.i, b.j);
  if (!(yb > 0.0)) return std::nullopt;
  double move_dir = cell_direction(a, b);
  bool gated = false;
  for (int k = 0; k < DirectionalField::kMaxComponents; ++k) {
    if (direction.weight[direction.index(k, a.i, a.j)] <= 0.0) continue;
    if (angle_diff(move_dir, direction.mean[direction.index(k, a.i, a.j)]) <=
        gate_angle) {
      gated = true;
      break;
    }
  }
  if (!gated) return std::nullopt;
  double len = (di != 0 && dj != 0) ? std::sqrt(2.0) : 1.0;
  return len - std::log(yb);
}

// ---------------------------------------------------------------------------
// Point extraction
// ---------------------------------------------------------------------------

std::vector<Cell> extract_points(const GridMap& map, double threshold) {
  const int h = map.height, w = map.width;
  std::vector<int> comp(std::size_t(h) * w, -1);
  int ncomp = 0;
  std::vector<Cell> result;
  for (int si = 0; si < h; ++si) {
    for (int sj = 0; sj < w; ++sj) {
      if (map.at(0, si, sj) <= threshold || comp[std::size_t(si) * w + sj] >= 0)
        continue;
      int c = ncomp++;
      std::vector<Cell> cells;
      std::vector<Cell> stack{{si, sj}};
      comp[std::size_t(si) * w + sj] = c;
      while (!stack.empty()) {
        Cell cur = stack.back();
        stack.pop_back();
        cells.push_back(cur);
        for (int di = -1; di <= 1; ++di) {
          for (int dj = -1; dj <= 1; ++dj) {
            if (di == 0 && dj == 0) continue;
            int ni = cur.i + di, nj = cur.j + dj;
            if (ni < 0 || nj < 0 || ni >= h || nj >= w) continue;
            if (map.at(0, ni, nj) <= threshold) continue;
            if (comp[std::size_t(ni) * w + nj] >= 0) continue;
            comp[std::size_t(ni) * w + nj] = c;
            stack.push_back({ni, nj});
          }
        }
      }
      double wsum = 0.0, isum = 0.0, jsum = 0.0;
      for (const Cell& cc : cells) {
        double v = map.at(0, cc.i, cc.j);
        wsum += v;
        isum += v * cc.i;
        jsum += v * cc.j;
      }
      Cell centroid{int(std::llround(isum / wsum)), int(std::llround(jsum / wsum))};
      bool inside = false;
      for (const Cell& cc : cells) {
        if (cc == centroid) {
          inside = true;
          break;
        }
      }
      if (!inside) {
        double best = 1e300;
        Cell best_cell = cells.front();
        for (const Cell& cc : cells) {
          double d = std::hypot(double(cc.i - centroid.i), double(cc.j - centroid.j));
          if (d < best - 1e-12 ||
              (std::fabs(d - best) <= 1e-12 && cell_less(cc, best_cell))) {
            best = d;
            best_cell = cc;
          }
        }
        centroid = best_cell;
      }
      result.push_back(centroid);
    }
  }
  std::sort(result.begin(), result.end(), cell_less);
  return result;
}

// ---------------------------------------------------------------------------
// A* and the Dijkstra oracle
// ---------------------------------------------------------------------------

namespace {

struct PqEntry {
  double f;
  int i, j;
  // min-heap: smaller f first, then smaller i, then smaller j
  bool operator<(const PqEntry& o) const {
    if (f != o.f) return f > o.f;
    if (i != o.i) return i > o.i;
    return j > o.j;
  }
};

constexpr int kDi[8] = {-1, -1, -1, 0, 0, 1, 1, 1};
constexpr int kDj[8] = {-1, 0, 1, -1, 1, -1, 0, 1};

}  // namespace

std::optional<std::vector<Cell>> astar(const Cell& start, const Cell& goal,
                                       const AdjacencyField& field) {
  const int h = field.lane_tilde.height, w = field.lane_tilde.width;
  if (!field.lane_tilde.in_bounds(start.i, start.j) ||
      !field.lane_tilde.in_bounds(goal.i, goal.j)) {
    return std::nullopt;
  }
  if (start == goal) return std::vector<Cell>{start};

  auto heuristic = [&](int i, int j) {
    return std::hypot(double(goal.i - i), double(goal.j - j));
  };
  std::vector<double> g(std::size_t(h) * w, 1e300);
  std::vector<int> parent(std::size_t(h) * w, -1);
  std::vector<char> closed(std::size_t(h) * w, 0);
  std::priority_queue<PqEntry> open;
  g[std::size_t(start.i) * w + start.j] = 0.0;
  open.push({heuristic(start.i, start.j), start.i, start.j});
  while (!open.empty()) {
    PqEntry top = open.top();
    open.pop();
    std::size_t idx = std::size_t(top.i) * w + top.j;
    if (closed[idx]) continue;
    closed[idx] = 1;
    if (top.i == goal.i && top.j == goal.j) break;
    Cell a{top.i, top.j};
    for (int n = 0; n < 8; ++n) {
      int ni = top.i + kDi[n], nj = top.j + kDj[n];
      if (ni < 0 || nj < 0 || ni >= h || nj >= w) continue;
      Cell b{ni, nj};
      auto wgt = field.edge_weight(a, b);
      if (!wgt) continue;
      std::size_t nidx = std::size_t(ni) * w + nj;
      double cand = g[idx] + *wgt;
      if (cand < g[nidx]) {
        g[nidx] = cand;
        parent[nidx] = int(idx);
        open.push({cand + heuristic(ni, nj), ni, nj});
      }
    }
  }
  std::size_t goal_idx = std::size_t(goal.i) * w + goal.j;
  if (g[goal_idx] >= 1e300) return std::nullopt;
  std::vector<Cell> path;
  int cur = int(goal_idx);
  while (cur >= 0) {
    path.push_back({cur / w, cur % w});
    cur = parent[std::size_t(cur)];
  }
  std::reverse(path.begin(), path.end());
  return path;
}

std::optional<double> dijkstra_cost(const Cell& start, const Cell& goal,
                                    const AdjacencyField& field) {
  const int h = field.lane_tilde.height, w = field.lane_tilde.width;
  if (start == goal) return 0.0;
  std::vector<double> g(std::size_t(h) * w, 1e300);
  std::vector<char> closed(std::size_t(h) * w, 0);
  std::priority_queue<PqEntry> open;
  g[std::size_t(start.i) * w + start.j] = 0.0;
  open.push({0.0, start.i, start.j});
  while (!open.empty()) {
    PqEntry top = open.top();
    open.pop();
    std::size_t idx = std::size_t(top.i) * w + top.j;
    if (closed[idx]) continue;
    closed[idx] = 1;
    Cell a{top.i, top.j};
    for (int n = 0; n < 8; ++n) {
      int ni = top.i + kDi[n], nj = top.j + kDj[n];
      if (ni < 0 || nj < 0 || ni >= h || nj >= w) continue;
      auto wgt = field.edge_weight(a, {ni, nj});
      if (!wgt) continue;
      std::size_t nidx = std::size_t(ni) * w + nj;
      double cand = g[idx] + *wgt;
      if (cand < g[nidx]) {
        g[nidx] = cand;
        open.push({cand, ni, nj});
      }
    }
  }
  double c = g[std::size_t(goal.i) * w + goal.j];
  if (c >= 1e300) return std::nullopt;
  return c;
}

double path_cost(const std::vector<Cell>& path, const AdjacencyField& field) {
  double c = 0.0;
  for (std::size_t k = 1; k < path.size(); ++k) {
    auto wgt = field.edge_weight(path[k - 1], path[k]);
    if (!wgt) throw std::runtime_error("path_cost: move not reachable");
    c += *wgt;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Unification
// ---------------------------------------------------------------------------

double lookahead_direction(const std::vector<Cell>& path, int t, int dt) {
  if (path.size() < 2) throw std::invalid_argument("lookahead needs length >= 2");
  int last = int(path.size()) - 1;
  int from = std::min(t, last - 1);
  int to = std::min(t + dt, last);
  if (to <= from) {
    from = last - 1;
    to = last;
  }
  return cell_direction(path[std::size_t(from)], path[std::size_t(to)]);
}

double divergence_angle(std::vector<double> directions) {
  if (directions.empty()) throw std::invalid_argument("divergence_angle: empty");
  if (directions.size() == 1) return 0.0;
  for (double& d : directions) d = wrap_angle(d);
  std::sort(directions.begin(), directions.end());
  double largest_gap = 0.0;
  const std::size_t n = directions.size();
  for (std::size_t k = 0; k < n; ++k) {
    double next = k + 1 < n ? directions[k + 1] : directions[0] + kTwoPi;
    largest_gap = std::max(largest_gap, next - directions[k]);
  }
  return kTwoPi - largest_gap;
}

namespace {

Cell snap_to_support(Cell c, const GridMap* support) {
  if (!support) return c;
  if (support->in_bounds(c.i, c.j) && support->at(0, c.i, c.j) > 0.0) return c;
  // Nearest supported cell within a small window; averaged cells sit within a
  // cell of real path cells, so radius 2 suffices.
  double best = 1e300;
  Cell best_cell = c;
  for (int di = -2; di <= 2; ++di) {
    for (int dj = -2; dj <= 2; ++dj) {
      int ni = c.i + di, nj = c.j + dj;
      if (!support->in_bounds(ni, nj)) continue;
      if (!(support->at(0, ni, nj) > 0.0)) continue;
      double d = std::hypot(double(di), double(dj));
      Cell cand{ni, nj};
      if (d < best - 1e-12 ||
          (std::fabs(d - best) <= 1e-12 && cell_less(cand, best_cell))) {
        best = d;
        best_cell = cand;
      }
    }
  }
  return best_cell;
}

}  // namespace

UnifyResult unify(const std::vector<std::vector<Cell>>& tree,
                  const UnifyConfig& cfg) {
  if (tree.empty()) throw std::invalid_argument("unify: empty tree");
  for (const auto& p : tree) {
    if (p.empty()) throw std::invalid_argument("unify: empty path");
    if (!(p.front() == tree.front().front())) {
      throw std::invalid_argument("unify: paths do not share a root");
    }
  }

  UnifyResult out;
  if (tree.size() == 1) {
    out.common = tree.front();
    return out;
  }

  int min_len = int(tree.front().size());
  for (const auto& p : tree) min_len = std::min(min_len, int(p.size()));

  // Scan forward for the first index where the tree has diverged: either the
  // lookahead directions span more than theta_div, or the cells at t are not
  // all within one cell of each other.
  int divergence = min_len - 1;
  bool found = false;
  for (int t = 0; t < min_len && !found; ++t) {
    for (std::size_t a = 0; a + 1 < tree.size() && !found; ++a) {
      for (std::size_t b = a + 1; b < tree.size(); ++b) {
        if (cheb_dist(tree[a][std::size_t(t)], tree[b][std::size_t(t)]) > 1) {
          divergence = t;
          found = true;
          break;
        }
      }
    }
    if (found) break;
    // Deduplicate paths still identical through the lookahead window.
    std::vector<double> dirs;
    std::vector<std::vector<Cell>> seen_windows;
    for (const auto& p : tree) {
      int to = std::min(t + cfg.lookahead, int(p.size()) - 1);
      std::vector<Cell> window(p.begin() + t, p.begin() + to + 1);
      bool dup = false;
      for (const auto& sw : seen_windows) {
        if (sw == window) {
          dup = true;
          break;
        }
      }
      if (dup) continue;
      seen_windows.push_back(window);
      dirs.push_back(lookahead_direction(p, t, cfg.lookahead));
    }
    if (divergence_angle(dirs) > cfg.theta_div) {
      divergence = t;
      found = true;
    }
  }

  // Common path: cell-wise average over [0, divergence], snapped to support.
  out.common.reserve(std::size_t(divergence) + 1);
  for (int t = 0; t <= divergence; ++t) {
    double si = 0.0, sj = 0.0;
    for (const auto& p : tree) {
      si += p[std::size_t(t)].i;
      sj += p[std::size_t(t)].j;
    }
    Cell avg{int(std::llround(si / double(tree.size()))),
             int(std::llround(sj / double(tree.size())))};
    avg = snap_to_support(avg, cfg.support);
    if (out.common.empty() || !(out.common.back() == avg)) {
      out.common.push_back(avg);
    }
  }

  for (const auto& p : tree) {
    std::vector<Cell> suffix;
    suffix.push_back(out.common.back());
    for (int t = divergence + 1; t < int(p.size()); ++t) {
      if (!(p[std::size_t(t)] == suffix.back())) suffix.push_back(p[std::size_t(t)]);
    }
    out.suffixes.push_back(std::move(suffix));
  }
  return out;
}

UnifyResult reverse_unify(const std::vector<std::vector<Cell>>& tree,
                          const UnifyConfig& cfg) {
  std::vector<std::vector<Cell>> reversed = tree;
  for (auto& p : reversed) std::reverse(p.begin(), p.end());
  UnifyResult r = unify(reversed, cfg);
  std::reverse(r.common.begin(), r.common.end());
  for (auto& s : r.suffixes) std::reverse(s.begin(), s.end());
  return r;
}

// ---------------------------------------------------------------------------
// Algorithm 1
// ---------------------------------------------------------------------------

namespace {

std::optional<double> heading_near(const DirectionalField& dir, const Cell& c) {
  for (int radius = 0; radius <= 2; ++radius) {
    for (int di = -radius; di <= radius; ++di) {
      for (int dj = -radius; dj <= radius; ++dj) {
        if (std::max(std::abs(di), std::abs(dj)) != radius) continue;
        int ni = c.i + di, nj = c.j + dj;
        if (ni < 0 || nj < 0 || ni >= dir.height || nj >= dir.width) continue;
        auto m = dir.dominant_mean(ni, nj);
        if (m) return m;
      }
    }
  }
  return std::nullopt;
}

}  // namespace

LaneGraph generate_graph(const AffordanceInput& bundle,
                         const GraphGenConfig& cfg) {
  LaneGraph g;
  GridMap tilde = preprocess_lane_map(*bundle.lane);
  AdjacencyField field{tilde, *bundle.direction, cfg.delta_theta};

  std::vector<Cell> q_entry = extract_points(*bundle.entry, cfg.point_threshold);
  std::vector<Cell> q_exit = extract_points(*bundle.exit, cfg.point_threshold);
  if (q_entry.empty() || q_exit.empty()) {
    g.warnings.push_back("no entry or exit points extracted; empty graph");
    return g;
  }

  std::vector<std::optional<double>> entry_heading(q_entry.size());
  std::vector<std::optional<double>> exit_heading(q_exit.size());
  for (std::size_t e = 0; e < q_entry.size(); ++e) {
    entry_heading[e] = heading_near(*bundle.direction, q_entry[e]);
  }
  for (std::size_t x = 0; x < q_exit.size(); ++x) {
    exit_heading[x] = heading_near(*bundle.direction, q_exit[x]);
  }

  UnifyConfig ucfg;
  ucfg.theta_div = cfg.theta_div;
  ucfg.lookahead = cfg.lookahead;
  ucfg.support = &field.lane_tilde;

  struct ConPath {
    std::vector<Cell> cells;
    int entry = -1;            // index into q_entry
    int exit = -1;             // index into q_exit
    bool from_fork = false;    // rooted at a fork vertex rather than an entry
  };

  struct EntryInfo {
    bool used = false;
    std::vector<Cell> entry_path;  // entry -> fork, when forked
    bool forked = false;
  };

  std::vector<ConPath> p_con;
  std::vector<EntryInfo> entries(q_entry.size());

  for (std::size_t e = 0; e < q_entry.size(); ++e) {
    std::vector<std::vector<Cell>> tree;
    std::vector<int> tree_exits;
    for (std::size_t x = 0; x < q_exit.size(); ++x) {
      // U-turn suppression: same-arm entry/exit pairs are never searched.
      double d = std::hypot(double(q_entry[e].i - q_exit[x].i),
                            double(q_entry[e].j - q_exit[x].j));
      if (d <= cfg.uturn_radius && entry_heading[e] && exit_heading[x] &&
          angle_diff(*entry_heading[e], *exit_heading[x]) >= cfg.uturn_heading) {
        continue;
      }
      auto path = astar(q_entry[e], q_exit[x], field);
      if (path && path->size() >= 2) {
        tree.push_back(std::move(*path));
        tree_exits.push_back(int(x));
      }
    }
    if (tree.empty()) {
      g.warnings.push_back("entry at (" + std::to_string(q_entry[e].i) + "," +
                           std::to_string(q_entry[e].j) +
                           ") has no reachable exit; omitted");
      continue;
    }
    entries[e].used = true;
    UnifyResult u = unify(tree, ucfg);
    if (u.suffixes.empty()) {
      // Single continuation: the whole path is carried forward and pairs with
      // the matching exit below.
      ConPath cp;
      cp.cells = u.common;
      cp.entry = int(e);
      cp.exit = tree_exits.front();
      cp.from_fork = false;
      p_con.push_back(std::move(cp));
    } else {
      entries[e].forked = true;
      entries[e].entry_path = u.common;
      for (std::size_t s = 0; s < u.suffixes.size(); ++s) {
        ConPath cp;
        cp.cells = u.suffixes[s];
        cp.entry = int(e);
        cp.exit = tree_exits[s];
        cp.from_fork = true;
        p_con.push_back(std::move(cp));
      }
    }
  }

  // Vertex bookkeeping. Construction order: entry vertices, then per-entry
  // forks, then per-exit merges and exits, matching the deterministic loops.
  int next_id = 0;
  std::vector<int> entry_vertex(q_entry.size(), -1);
  std::vector<int> fork_vertex(q_entry.size(), -1);
  for (std::size_t e = 0; e < q_entry.size(); ++e) {
    if (!entries[e].used) continue;
    entry_vertex[e] = next_id;
    g.vertices.push_back({next_id++, VertexKind::entry, q_entry[e]});
  }
  for (std::size_t e = 0; e < q_entry.size(); ++e) {
    if (!entries[e].forked) continue;
    fork_vertex[e] = next_id;
    g.vertices.push_back({next_id++, VertexKind::fork, entries[e].entry_path.back()});
    Edge edge;
    edge.src = entry_vertex[e];
    edge.dst = fork_vertex[e];
    edge.kind = EdgeKind::entry;
    edge.geometry = entries[e].entry_path;
    g.edges.push_back(std::move(edge));
  }

  for (std::size_t x = 0; x < q_exit.size(); ++x) {
    std::vector<const ConPath*> tree_paths;
    for (const auto& cp : p_con) {
      if (cp.exit == int(x)) tree_paths.push_back(&cp);
    }
    if (tree_paths.empty()) continue;

    if (tree_paths.size() == 1 && !tree_paths.front()->from_fork) {
      // No fork and no merge intervene: a single lane edge.
      const ConPath& cp = *tree_paths.front();
      int exit_id = next_id;
      g.vertices.push_back({next_id++, VertexKind::exit, q_exit[x]});
      Edge edge;
      edge.src = entry_vertex[std::size_t(cp.entry)];
      edge.dst = exit_id;
      edge.kind = EdgeKind::lane;
      edge.geometry = cp.cells;
      g.edges.push_back(std::move(edge));
      continue;
    }

    if (tree_paths.size() == 1) {
      // A lone fork suffix: the exit path runs fork -> exit (Corollary 3).
      const ConPath& cp = *tree_paths.front();
      int exit_id = next_id;
      g.vertices.push_back({next_id++, VertexKind::exit, q_exit[x]});
      Edge edge;
      edge.src = fork_vertex[std::size_t(cp.entry)];
      edge.dst = exit_id;
      edge.kind = EdgeKind::exit;
      edge.geometry = cp.cells;
      g.edges.push_back(std::move(edge));
      continue;
    }

    std::vector<std::vector<Cell>> tree;
    tree.reserve(tree_paths.size());
    for (const ConPath* cp : tree_paths) tree.push_back(cp->cells);
    UnifyResult r = reverse_unify(tree, ucfg);

    int merge_id = next_id;
    g.vertices.push_back({next_id++, VertexKind::merge, r.common.front()});
    int exit_id = next_id;
    g.vertices.push_back({next_id++, VertexKind::exit, q_exit[x]});

    for (std::size_t s = 0; s < tree_paths.size(); ++s) {
      const ConPath& cp = *tree_paths[s];
      Edge edge;
      edge.dst = merge_id;
      edge.geometry = r.suffixes[s];
      if (cp.from_fork) {
        edge.src = fork_vertex[std::size_t(cp.entry)];
        edge.kind = EdgeKind::intersection;
      } else {
        edge.src = entry_vertex[std::size_t(cp.entry)];
        edge.kind = EdgeKind::entry;
      }
      g.edges.push_back(std::move(edge));
    }
    Edge exit_edge;
    exit_edge.src = merge_id;
    exit_edge.dst = exit_id;
    exit_edge.kind = EdgeKind::exit;
    exit_edge.geometry = r.common;
    g.edges.push_back(std::move(exit_edge));
  }

  return g;
}

}  // namespace lanegraph::graphgen
