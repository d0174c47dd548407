#include "lanegraph/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "json.hpp"
#include "lanegraph/learning.hpp"

namespace lanegraph::metrics {

double acc_pos(const GridMap& pred, const GridMap& eval_label,
               std::vector<std::string>* warnings) {
  if (pred.height != eval_label.height || pred.width != eval_label.width) {
    throw std::invalid_argument("acc_pos: shape mismatch");
  }
  long long total = 0, hit = 0;
  for (int i = 0; i < pred.height; ++i) {
    for (int j = 0; j < pred.width; ++j) {
      double lbl = eval_label.at(0, i, j);
      if (lbl != 0.0 && lbl != 1.0) {
        throw std::invalid_argument("acc_pos: eval label not binary");
      }
      if (lbl == 1.0) {
        ++total;
        if (pred.at(0, i, j) > 0.5) ++hit;
      }
    }
  }
  if (total == 0) {
    if (warnings) warnings->push_back("acc_pos: label has no positives");
    return 1.0;
  }
  return double(hit) / double(total);
}

double l1_neg(const GridMap& pred, const GridMap& eval_label) {
  if (pred.height != eval_label.height || pred.width != eval_label.width) {
    throw std::invalid_argument("l1_neg: shape mismatch");
  }
  double sum = 0.0;
  long long n = 0;
  for (int i = 0; i < pred.height; ++i) {
    for (int j = 0; j < pred.width; ++j) {
      if (eval_label.at(0, i, j) == 0.0) {
        sum += std::fabs(pred.at(0, i, j));
        ++n;
      }
    }
  }
  return n > 0 ? sum / double(n) : 0.0;
}

double eval_kl(const graphgen::DirectionalField& pred,
               const graphgen::DirectionalField& label,
               const GridMap& lane_mask, int bins) {
  double acc = 0.0;
  long long n = 0;
  for (int i = 0; i < lane_mask.height; ++i) {
    for (int j = 0; j < lane_mask.width; ++j) {
      if (lane_mask.at(0, i, j) <= 0.5) continue;
      learning::VonMisesMixture p = pred.mixture_at(i, j);
      learning::VonMisesMixture q = label.mixture_at(i, j);
      if (p.components.empty() || q.components.empty()) {
        throw std::runtime_error("eval_kl: undefined direction on a mask cell");
      }
      acc += learning::kl_divergence(p, q, bins);
      ++n;
    }
  }
  return n > 0 ? acc / double(n) : 0.0;
}

// ---------------------------------------------------------------------------
// Graph comparison
// ---------------------------------------------------------------------------

namespace {

using graphgen::LaneGraph;
using graphgen::VertexKind;

// Greedy nearest-first one-to-one matching of same-kind terminals within rho.
// Returns candidate-vertex-id -> reference-vertex-id.
std::map<int, int> match_terminals(const LaneGraph& g, const LaneGraph& ref,
                                   VertexKind kind, double rho) {
  struct Pair {
    double d;
    int gid, rid;
  };
  std::vector<Pair> pairs;
  for (const auto& gv : g.vertices) {
    if (gv.kind != kind) continue;
    for (const auto& rv : ref.vertices) {
      if (rv.kind != kind) continue;
      double d = std::hypot(double(gv.cell.i - rv.cell.i),
                            double(gv.cell.j - rv.cell.j));
      if (d <= rho) pairs.push_back({d, gv.id, rv.id});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.d != b.d) return a.d < b.d;
    if (a.gid != b.gid) return a.gid < b.gid;
    return a.rid < b.rid;
  });
  std::map<int, int> match;
  std::set<int> used_ref;
  for (const auto& p : pairs) {
    if (match.count(p.gid) || used_ref.count(p.rid)) continue;
    match[p.gid] = p.rid;
    used_ref.insert(p.rid);
  }
  return match;
}

struct RouteRec {
  int entry_id;
  int exit_id;
  std::vector<graphgen::EdgeKind> kinds;
};

// Terminal-to-terminal route relation via edge-path traversal (paths are
// capped at 4 edges to stay finite on invalid graphs).
std::vector<RouteRec> route_relation(const LaneGraph& g) {
  std::map<int, const graphgen::Vertex*> byid;
  for (const auto& v : g.vertices) byid[v.id] = &v;
  std::map<int, std::vector<const graphgen::Edge*>> out;
  for (const auto& e : g.edges) out[e.src].push_back(&e);

  std::vector<RouteRec> result;
  for (const auto& v : g.vertices) {
    if (v.kind != VertexKind::entry) continue;
    struct Frame {
      int vertex;
      std::vector<graphgen::EdgeKind> kinds;
    };
    std::vector<Frame> stack{{v.id, {}}};
    while (!stack.empty()) {
      Frame f = std::move(stack.back());
      stack.pop_back();
      const graphgen::Vertex* cur = byid[f.vertex];
      if (cur->kind == VertexKind::exit) {
        result.push_back({v.id, cur->id, f.kinds});
        continue;
      }
      if (f.kinds.size() >= 4) continue;
      for (const graphgen::Edge* e : out[f.vertex]) {
        Frame next;
        next.vertex = e->dst;
        next.kinds = f.kinds;
        next.kinds.push_back(e->kind);
        stack.push_back(std::move(next));
      }
    }
  }
  return result;
}

}  // namespace

GraphDiff graph_diff(const LaneGraph& g, const LaneGraph& g_ref, double rho) {
  std::map<int, int> entry_match = match_terminals(g, g_ref, VertexKind::entry, rho);
  std::map<int, int> exit_match = match_terminals(g, g_ref, VertexKind::exit, rho);

  std::vector<RouteRec> routes_g = route_relation(g);
  std::vector<RouteRec> routes_ref = route_relation(g_ref);

  // Routes of g mapped into reference-terminal id space; routes touching an
  // unmatched terminal are erroneous outright.
  GraphDiff diff;
  std::map<std::pair<int, int>, std::vector<graphgen::EdgeKind>> rel_g, rel_ref;
  for (const auto& r : routes_g) {
    if (!entry_match.count(r.entry_id) || !exit_match.count(r.exit_id)) {
      ++diff.erroneous;
      continue;
    }
    rel_g[{entry_match[r.entry_id], exit_match[r.exit_id]}] = r.kinds;
  }
  std::set<int> matched_ref_entries, matched_ref_exits;
  for (const auto& [gid, rid] : entry_match) matched_ref_entries.insert(rid);
  for (const auto& [gid, rid] : exit_match) matched_ref_exits.insert(rid);
  for (const auto& r : routes_ref) {
    if (!matched_ref_entries.count(r.entry_id) ||
        !matched_ref_exits.count(r.exit_id)) {
      ++diff.missing;
      continue;
    }
    rel_ref[{r.entry_id, r.exit_id}] = r.kinds;
  }

  for (const auto& [key, kinds] : rel_ref) {
    auto it = rel_g.find(key);
    if (it == rel_g.end()) {
      ++diff.missing;
    } else if (it->second != kinds) {
      ++diff.erroneous;  // matched route with a different edge-kind sequence
    }
  }
  for (const auto& [key, kinds] : rel_g) {
    if (!rel_ref.count(key)) ++diff.erroneous;
  }
  return diff;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["acc_pos"] = {{"lane", acc_pos_lane}, {"entry", acc_pos_entry}, {"exit", acc_pos_exit}};
  j["l1_neg"] = {{"lane", l1_neg_lane}, {"entry", l1_neg_entry}, {"exit", l1_neg_exit}};
  j["d_kl"] = d_kl;
  j["graph_missing"] = graph_missing;
  j["graph_erroneous"] = graph_erroneous;
  j["error_free"] = error_free;
  return j.dump(2) + "\n";
}

}  // namespace lanegraph::metrics
