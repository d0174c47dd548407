#pragma once

#include "lanegraph/core.hpp"
#include "lanegraph/graphgen.hpp"

namespace lanegraph::metrics {

// ---------------------------------------------------------------------------
// Dense affordance metrics
// ---------------------------------------------------------------------------

// Ratio of label-positive cells predicted positive (pred > 0.5). A label with
// no positives scores 1.0 and records a warning.
double acc_pos(const GridMap& pred, const GridMap& eval_label,
               std::vector<std::string>* warnings = nullptr);

// Mean |pred| over label-negative cells.
double l1_neg(const GridMap& pred, const GridMap& eval_label);

// Mean over lane-mask cells of KL(pred_cell || label_cell) at 256 bins.
double eval_kl(const graphgen::DirectionalField& pred,
               const graphgen::DirectionalField& label,
               const GridMap& lane_mask, int bins = 256);

// ---------------------------------------------------------------------------
// Graph topological comparison: terminals matched by nearest cell within
// radius rho (greedy, one-to-one), graphs canonicalized to their terminal
// route relation, and kind sequences compared on matched routes.
// ---------------------------------------------------------------------------

struct GraphDiff {
  int missing = 0;
  int erroneous = 0;
  bool error_free() const { return missing == 0 && erroneous == 0; }
};

GraphDiff graph_diff(const graphgen::LaneGraph& g,
                     const graphgen::LaneGraph& g_ref, double rho = 5.0);

struct EvalReport {
  double acc_pos_lane = 0.0;
  double acc_pos_entry = 0.0;
  double acc_pos_exit = 0.0;
  double l1_neg_lane = 0.0;
  double l1_neg_entry = 0.0;
  double l1_neg_exit = 0.0;
  double d_kl = 0.0;
  int graph_missing = 0;
  int graph_erroneous = 0;
  bool error_free = false;

  std::string to_json() const;
};

}  // namespace lanegraph::metrics
