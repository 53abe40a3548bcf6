#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hba/geometry.hpp"
#include "hba/pyramid.hpp"

namespace hba {

// One collapsed relative-pose measurement between two first-layer frames.
// Every window of every layer contributes one factor per adjacent frame pair
// it covers, so overlapping windows yield parallel factors; they are kept as
// independent cost items, never averaged.
struct RelativePoseFactor {
  int a = 0;  // first-layer frame indices, a < b
  int b = 0;
  Pose z;  // measured pose of frame b expressed in frame a
  Mat6 info = Mat6::Identity();
  int layer = 1;  // pyramid layer the source window belongs to (1 = finest)
};

// Factor graph over the full first-layer trajectory. The gauge is fixed by a
// strong unary prior holding node 0 at prior_pose.
struct FactorGraph {
  Trajectory nodes;  // current first-layer estimates, optimization start point
  std::vector<RelativePoseFactor> factors;
  Pose prior_pose;
  double prior_weight = 1e6;
};

struct PgParams {
  int max_iter = 50;
  double grad_tol = 1e-8;
  double lambda_init = 1e-4;
  double lambda_up = 10.0;
  double lambda_dn = 10.0;
  int workers = 1;
};

struct PgResult {
  Trajectory poses;
  double final_cost = 0.0;
  int iterations = 0;
  std::vector<double> cost_history;  // initial cost, then after each accepted step
  bool grad_converged = false;
  bool max_iter_reached = false;
};

// Collapse all window results of a pyramid into factors between first-layer
// nodes: a layer-i adjacent pair (j, j+1) maps to nodes s^(i-1)*j and
// s^(i-1)*(j+1). Information comes from the window Hessian (Schur complement
// onto the pair, adjoint-transported); windows flagged no_features contribute
// identity information. Throws DisconnectedGraph if node 0 cannot reach every
// node, ConfigError on an empty pyramid or stride < 1.
FactorGraph build_graph(const Pyramid& pyramid, int stride);

// e = Log(z^-1 ta^-1 tb) and the weighted quadratic e^T info e.
std::pair<Vec6, double> factor_residual(const RelativePoseFactor& f, const Pose& ta,
                                        const Pose& tb);

// Total cost of the graph at the given node poses (factors plus prior).
double graph_cost(const FactorGraph& graph, const Trajectory& nodes);

// Levenberg-Marquardt over all node poses with sparse normal equations.
// Accepted steps never increase the cost. Stops on the gradient norm or on
// max_iter (max_iter_reached set, best iterate returned, never thrown).
PgResult optimize(const FactorGraph& graph, const PgParams& params = {});

// Edge-list dump, one factor per line: a, b, layer, z as a 3x4 row-major
// 12-tuple, then the upper triangle of info (21 numbers).
void write_graph(const std::string& path, const FactorGraph& graph);

}  // namespace hba
