#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "hba/errors.hpp"
#include "hba/pose_graph.hpp"
#include "hba/synth.hpp"
#include "room_fixture.hpp"

using namespace hba;

namespace {

Pose random_pose(std::mt19937_64& rng, double rot_scale, double trans_scale) {
  std::normal_distribution<double> g;
  Vec6 v;
  for (int i = 0; i < 3; ++i) v(i) = rot_scale * g(rng);
  for (int i = 3; i < 6; ++i) v(i) = trans_scale * g(rng);
  return exp_map(Twist::from_vec(v));
}

// A smooth ground-truth chain and the consistent consecutive factors for it.
FactorGraph chain_graph(int n, std::uint64_t seed, Trajectory* gt_out = nullptr) {
  std::mt19937_64 rng(seed);
  Trajectory gt;
  gt.push_back(Pose());
  for (int i = 1; i < n; ++i)
    gt.push_back(compose(gt.back(), random_pose(rng, 0.15, 0.5)));

  FactorGraph g;
  g.nodes = gt;
  g.prior_pose = gt[0];
  for (int i = 0; i + 1 < n; ++i) {
    RelativePoseFactor f;
    f.a = i;
    f.b = i + 1;
    f.z = relative(gt[static_cast<std::size_t>(i)], gt[static_cast<std::size_t>(i) + 1]);
    g.factors.push_back(f);
  }
  if (gt_out) *gt_out = gt;
  return g;
}

}  // namespace

TEST_CASE("consistent factor has zero residual and small translations quadratic cost") {
  std::mt19937_64 rng(3);
  const Pose ta = random_pose(rng, 0.4, 1.0);
  RelativePoseFactor f;
  f.z = random_pose(rng, 0.3, 0.8);
  const Pose tb = compose(ta, f.z);
  auto [e, cost] = factor_residual(f, ta, tb);
  CHECK(e.norm() < 1e-12);
  CHECK(cost < 1e-24);

  RelativePoseFactor id;
  Pose shifted;
  shifted.t = Vec3(1e-3, 0, 0);
  auto [e2, cost2] = factor_residual(id, Pose(), shifted);
  CHECK(e2(3) == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(cost2 == doctest::Approx(1e-6).epsilon(1e-12));
}

TEST_CASE("factor cost matches the dense weighted quadratic") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    RelativePoseFactor f;
    f.z = random_pose(rng, 0.5, 1.0);
    Eigen::Matrix<double, 6, 6> root;
    std::normal_distribution<double> g;
    for (int r = 0; r < 6; ++r)
      for (int c = 0; c < 6; ++c) root(r, c) = g(rng);
    f.info = root * root.transpose() + Mat6::Identity();
    const Pose ta = random_pose(rng, 0.5, 1.0);
    const Pose tb = random_pose(rng, 0.5, 1.0);
    auto [e, cost] = factor_residual(f, ta, tb);

    double dense = 0;
    for (int r = 0; r < 6; ++r)
      for (int c = 0; c < 6; ++c) dense += e(r) * f.info(r, c) * e(c);
    CHECK(cost == doctest::Approx(dense).epsilon(1e-12));
  }
}

TEST_CASE("factor jacobians match central differences") {
  std::mt19937_64 rng(17);
  const double h = 1e-6;
  for (int trial = 0; trial < 10; ++trial) {
    RelativePoseFactor f;
    f.z = random_pose(rng, 0.4, 1.0);
    const Pose ta = random_pose(rng, 0.4, 1.0);
    const Pose tb = compose(compose(ta, f.z), random_pose(rng, 0.05, 0.1));

    const Vec6 e0 = factor_residual(f, ta, tb).first;
    const Mat6 jb_num = [&] {
      Mat6 j;
      for (int k = 0; k < 6; ++k) {
        Vec6 d = Vec6::Zero();
        d(k) = h;
        const Vec6 ep = factor_residual(f, ta, compose(tb, exp_map(Twist::from_vec(d)))).first;
        d(k) = -h;
        const Vec6 em = factor_residual(f, ta, compose(tb, exp_map(Twist::from_vec(d)))).first;
        j.col(k) = (ep - em) / (2 * h);
      }
      return j;
    }();
    const Mat6 ja_num = [&] {
      Mat6 j;
      for (int k = 0; k < 6; ++k) {
        Vec6 d = Vec6::Zero();
        d(k) = h;
        const Vec6 ep = factor_residual(f, compose(ta, exp_map(Twist::from_vec(d))), tb).first;
        d(k) = -h;
        const Vec6 em = factor_residual(f, compose(ta, exp_map(Twist::from_vec(d))), tb).first;
        j.col(k) = (ep - em) / (2 * h);
      }
      return j;
    }();

    const Mat6 jb = inv_right_jacobian(Twist::from_vec(e0));
    const Mat6 ja = -jb * adjoint(relative(ta, tb).inverse());
    CHECK((jb - jb_num).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((ja - ja_num).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("graph built from a pyramid covers every adjacent pair once per window") {
  SceneSpec scene = hall_scene(20, 0.1, 5);
  const SynthResult data = generate(scene);
  PyramidConfig config;  // w=10, s=5
  config.layers = 2;     // layer 1 partitions into (0,10) (5,10) (10,10)
  const Pyramid pyr = build_pyramid(data.frames, data.ground_truth, config, BaParams{});
  REQUIRE(pyr.layers.size() == 2);
  REQUIRE(pyr.layers[0].windows.size() == 3);

  const FactorGraph g = build_graph(pyr, config.stride);
  CHECK(g.nodes.size() == 20);

  std::size_t expect = 0;
  for (const PyramidLayer& layer : pyr.layers)
    for (const WindowRef& w : layer.windows) expect += static_cast<std::size_t>(w.length - 1);
  CHECK(g.factors.size() == expect);

  // Pair (5,6) is inside windows (0,10) and (5,10): exactly two factors.
  // The top layer's two factors connect the window anchors 0-5 and 5-10.
  int pair56 = 0, top = 0;
  for (const RelativePoseFactor& f : g.factors) {
    CHECK(f.a < f.b);
    if (f.layer == 2) {
      ++top;
      CHECK(f.b - f.a == 5);
      CHECK(f.a % 5 == 0);
    }
    if (f.layer == 1 && f.a == 5 && f.b == 6) ++pair56;
  }
  CHECK(pair56 == 2);
  CHECK(top == 2);

  // All factor informations are symmetric positive definite.
  for (const RelativePoseFactor& f : g.factors) {
    CHECK((f.info - f.info.transpose()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(Eigen::LLT<Mat6>(f.info).info() == Eigen::Success);
  }
}

TEST_CASE("multi-layer graph collapses upper-layer pairs onto strided first-layer nodes") {
  SceneSpec scene = hall_scene(54, 0.08, 6);
  const SynthResult data = generate(scene);
  PyramidConfig config;
  config.window = 6;
  config.stride = 3;
  config.layers = 3;
  const Pyramid pyr = build_pyramid(data.frames, data.ground_truth, config, BaParams{});
  REQUIRE(pyr.layers.size() == 3);

  const FactorGraph g = build_graph(pyr, config.stride);
  std::size_t expect = 0;
  for (const PyramidLayer& layer : pyr.layers)
    for (const WindowRef& w : layer.windows) expect += static_cast<std::size_t>(w.length - 1);
  CHECK(g.factors.size() == expect);

  // A layer-2 adjacent pair (0,1) lands on first-layer nodes 0 and 3; the top
  // layer (3) pairs land on multiples of 9.
  bool has_l2_0_3 = false, has_l3 = false;
  for (const RelativePoseFactor& f : g.factors) {
    if (f.layer == 2) {
      CHECK(f.a % 3 == 0);
      CHECK(f.b - f.a == 3);
      if (f.a == 0 && f.b == 3) has_l2_0_3 = true;
    }
    if (f.layer == 3) {
      CHECK(f.a % 9 == 0);
      CHECK(f.b - f.a == 9);
      has_l3 = true;
    }
  }
  CHECK(has_l2_0_3);
  CHECK(has_l3);
}

TEST_CASE("optimize leaves a consistent graph at its optimum in zero iterations") {
  Trajectory gt;
  FactorGraph g = chain_graph(8, 23, &gt);
  // Redundant long-range factor, still consistent.
  RelativePoseFactor lr;
  lr.a = 2;
  lr.b = 6;
  lr.z = relative(gt[2], gt[6]);
  g.factors.push_back(lr);

  const PgResult res = optimize(g);
  CHECK(res.iterations == 0);
  CHECK(res.grad_converged);
  CHECK(!res.max_iter_reached);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    CHECK((res.poses[i].t - gt[i].t).norm() < 1e-10);
    CHECK((res.poses[i].R - gt[i].R).norm() < 1e-10);
  }
}

TEST_CASE("perturbed chain of 10 nodes recovers ground truth relative to node 0") {
  Trajectory gt;
  FactorGraph g = chain_graph(10, 29, &gt);
  std::mt19937_64 rng(31);
  for (std::size_t i = 0; i < g.nodes.size(); ++i)
    g.nodes[i] = compose(g.nodes[i], random_pose(rng, 0.02, 0.04));
  g.prior_pose = g.nodes[0];

  const PgResult res = optimize(g);
  CHECK(res.final_cost < 1e-16);
  // Costs never increase across accepted steps.
  for (std::size_t i = 1; i < res.cost_history.size(); ++i)
    CHECK(res.cost_history[i] <= res.cost_history[i - 1]);

  for (std::size_t i = 0; i < gt.size(); ++i) {
    const Pose rel_est = relative(res.poses[0], res.poses[i]);
    const Pose rel_gt = relative(gt[0], gt[i]);
    CHECK((rel_est.t - rel_gt.t).norm() < 1e-8);
    CHECK((rel_est.R - rel_gt.R).norm() < 1e-8);
  }
}

TEST_CASE("two parallel translation factors average to the midpoint") {
  FactorGraph g;
  g.nodes = {Pose(), Pose()};
  g.prior_pose = Pose();
  RelativePoseFactor f1;
  f1.a = 0;
  f1.b = 1;
  f1.z.t = Vec3(1, 0, 0);
  RelativePoseFactor f2 = f1;
  f2.z.t = Vec3(2, 0, 0);
  g.factors = {f1, f2};

  const PgResult res = optimize(g);
  CHECK((res.poses[0].t).norm() < 1e-9);
  CHECK((res.poses[1].t - Vec3(1.5, 0, 0)).norm() < 1e-9);
  CHECK((res.poses[1].R - Mat3::Identity()).norm() < 1e-9);
}

TEST_CASE("total cost is invariant under factor reordering") {
  Trajectory gt;
  FactorGraph g = chain_graph(12, 41, &gt);
  std::mt19937_64 rng(43);
  for (auto& f : g.factors) {
    Eigen::Matrix<double, 6, 6> root;
    std::normal_distribution<double> nd;
    for (int r = 0; r < 6; ++r)
      for (int c = 0; c < 6; ++c) root(r, c) = nd(rng);
    f.info = root * root.transpose() + Mat6::Identity();
  }
  Trajectory x = gt;
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = compose(x[i], random_pose(rng, 0.05, 0.1));

  const double before = graph_cost(g, x);
  FactorGraph shuffled = g;
  std::shuffle(shuffled.factors.begin(), shuffled.factors.end(), rng);
  const double after = graph_cost(shuffled, x);
  CHECK(before == doctest::Approx(after).epsilon(1e-12));
  CHECK(before > 0);
}

TEST_CASE("optimize is deterministic across worker counts") {
  Trajectory gt;
  FactorGraph g = chain_graph(15, 47, &gt);
  std::mt19937_64 rng(53);
  for (std::size_t i = 1; i < g.nodes.size(); ++i)
    g.nodes[i] = compose(g.nodes[i], random_pose(rng, 0.03, 0.06));

  PgParams p1;
  p1.workers = 1;
  PgParams p8;
  p8.workers = 8;
  const PgResult a = optimize(g, p1);
  const PgResult b = optimize(g, p8);
  CHECK(a.final_cost == b.final_cost);
  REQUIRE(a.poses.size() == b.poses.size());
  for (std::size_t i = 0; i < a.poses.size(); ++i) {
    CHECK((a.poses[i].R.array() == b.poses[i].R.array()).all());
    CHECK((a.poses[i].t.array() == b.poses[i].t.array()).all());
  }
}

TEST_CASE("max_iter stops with a flag and the best iterate") {
  Trajectory gt;
  FactorGraph g = chain_graph(10, 59, &gt);
  std::mt19937_64 rng(61);
  for (std::size_t i = 1; i < g.nodes.size(); ++i)
    g.nodes[i] = compose(g.nodes[i], random_pose(rng, 0.05, 0.1));

  PgParams p;
  p.max_iter = 1;
  const PgResult res = optimize(g, p);
  CHECK(res.iterations == 1);
  CHECK(res.max_iter_reached);
  CHECK(!res.grad_converged);
  CHECK(res.final_cost < res.cost_history.front());
}

TEST_CASE("disconnected graph is rejected") {
  FactorGraph g;
  g.nodes = {Pose(), Pose(), Pose()};
  g.prior_pose = Pose();
  RelativePoseFactor f;
  f.a = 0;
  f.b = 1;
  g.factors = {f};
  CHECK_THROWS_AS(optimize(g), DisconnectedGraph);

  RelativePoseFactor bad;
  bad.a = 1;
  bad.b = 1;
  g.factors = {bad};
  CHECK_THROWS_AS(optimize(g), ConfigError);
}

TEST_CASE("graph dump writes one parsable line per factor") {
  Trajectory gt;
  FactorGraph g = chain_graph(5, 67, &gt);
  const std::string path = (std::filesystem::temp_directory_path() / "graph_dump.txt").string();
  write_graph(path, g);

  std::ifstream in(path);
  REQUIRE(in.good());
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::vector<double> vals;
    double v;
    while (ss >> v) vals.push_back(v);
    REQUIRE(vals.size() == 36);  // a, b, layer, 12 pose numbers, 21 info numbers
    if (lines == 0) {
      CHECK(vals[0] == 0);
      CHECK(vals[1] == 1);
      CHECK(vals[2] == 1);
      // Rotation row-major with translation interleaved: slots 3..6 are
      // r00 r01 r02 tx.
      CHECK(vals[3] == doctest::Approx(g.factors[0].z.R(0, 0)).epsilon(1e-10));
      CHECK(vals[6] == doctest::Approx(g.factors[0].z.t(0)).epsilon(1e-10));
      // Info written upper-triangular: first six entries are row 0.
      CHECK(vals[15] == doctest::Approx(g.factors[0].info(0, 0)).epsilon(1e-10));
      CHECK(vals[21] == doctest::Approx(g.factors[0].info(1, 1)).epsilon(1e-10));
    }
    ++lines;
  }
  CHECK(lines == g.factors.size());
  std::filesystem::remove(path);
}
