#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "penergy/forms.hpp"
#include "penergy/renorm.hpp"
#include "penergy/solver.hpp"

using namespace penergy;

namespace {

std::shared_ptr<const GraphPForm> path_graph(int n, double p) {
  std::vector<Edge> edges;
  for (int i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1, 1.0});
  return std::make_shared<const GraphPForm>(n, p, edges);
}

DirichletProblem sg_problem(double p, int n, std::vector<double> boundary) {
  auto spec = preset_structure("sg");
  DirichletProblem prob;
  prob.net = std::make_shared<const VertexNet>(build_net(spec, n));
  prob.cell_form = std::make_shared<const GraphPForm>(GraphPForm::complete(3, p));
  prob.rho = 1.0;
  prob.pinned_ids = prob.net->boundary_ids;
  prob.pinned_values = std::move(boundary);
  return prob;
}

}  // namespace

TEST(Solver, ConfigValidation) {
  SolverConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.tol = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = SolverConfig{};
  cfg.smoothing_decay = 1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Solver, PathMinimizerIsLinear) {
  for (double p : {1.5, 2.0, 3.0, 4.0}) {
    CompiledGraph cg(path_graph(6, p), {0, 5});
    std::vector<double> ends{0.0, 5.0};
    auto r = cg.solve(ends, SolverConfig{});
    ASSERT_TRUE(r.converged) << "p=" << p;
    for (int i = 0; i < 6; ++i) EXPECT_NEAR(r.values[i], i, 1e-6) << "p=" << p;
    EXPECT_NEAR(r.energy, 5.0, 1e-8);
  }
}

TEST(Solver, PinnedValuesUntouched) {
  auto prob = sg_problem(3.0, 3, {0.25, -1.0, 2.0});
  auto sol = solve_dirichlet(prob, SolverConfig{});
  ASSERT_TRUE(sol.converged);
  for (int a = 0; a < 3; ++a) EXPECT_EQ(sol.values[prob.pinned_ids[a]], prob.pinned_values[a]);
}

TEST(Solver, ConvergedSolutionsAreStationary) {
  SolverConfig cfg;
  for (double p : {1.5, 2.0, 3.0}) {
    auto prob = sg_problem(p, 3, {0.0, 1.0, 3.0});
    auto sol = solve_dirichlet(prob, cfg);
    ASSERT_TRUE(sol.converged) << "p=" << p;
    double scale = 1 + std::pow(sol.objective, (p - 1) / p);
    for (int x : prob.net->interior_ids) EXPECT_LE(std::abs(kirchhoff_residual(prob, sol.values, x)), 10 * cfg.tol * scale);
  }
}

TEST(Solver, ResolveFromSolutionIsFixedPoint) {
  SolverConfig cfg;
  auto prob = sg_problem(2.5, 3, {0.0, 1.0, -1.0});
  auto sol = solve_dirichlet(prob, cfg);
  cfg.warm_start = WarmStart::given;
  auto again = solve_dirichlet(prob, cfg, &sol.values);
  ASSERT_TRUE(again.converged);
  EXPECT_LE((again.values - sol.values).lpNorm<Eigen::Infinity>(), 10 * cfg.tol);
  EXPECT_NEAR(again.objective, sol.objective, 1e-10 * sol.objective);
}

TEST(Solver, IndependentWarmStartsAgree) {
  SolverConfig cfg;
  cfg.warm_start = WarmStart::given;
  auto prob = sg_problem(3.0, 2, {0.0, 1.0, 2.0});
  Vec s1 = 3 * sample_direction(prob.net->vertex_count, 1, 0);
  Vec s2 = 3 * sample_direction(prob.net->vertex_count, 2, 0);
  auto a = solve_dirichlet(prob, cfg, &s1);
  auto b = solve_dirichlet(prob, cfg, &s2);
  ASSERT_TRUE(a.converged && b.converged);
  EXPECT_LE((a.values - b.values).lpNorm<Eigen::Infinity>(), 10 * cfg.tol * 10);
}

TEST(Solver, LinearTraceMatchesRenormalization) {
  // p = 2: the level-1 net of K3 traces to (3/5) K3.
  SolverConfig cfg;
  auto prob = sg_problem(2.0, 1, {0.0, 1.0, 1.0});
  auto [energy, minimizer] = trace_energy(prob, prob.pinned_values, cfg);
  EXPECT_NEAR(energy, 6.0 / 5.0, 1e-10);
  EXPECT_NEAR(minimizer[prob.net->boundary_ids[0]], 0.0, 0);
}

TEST(Solver, TowerProperty) {
  // Tracing V_2 -> V_1 -> V_0 equals tracing V_2 -> V_0.
  SolverConfig cfg;
  double p = 2.5;
  auto spec = preset_structure("sg");
  auto base = std::make_shared<const GraphPForm>(GraphPForm::complete(3, p));
  auto one = renormalized_trace(base, spec, 1.0, 1, cfg);
  auto composed = renormalized_trace(one, spec, 1.0, 1, cfg);
  auto direct = renormalized_trace(base, spec, 1.0, 2, cfg);
  for (int s = 0; s < 5; ++s) {
    Vec u = sample_direction(3, 23, s);
    double d = direct->value(u);
    EXPECT_NEAR(composed->value(u), d, 2 * cfg.tol * (1 + d));
  }
}

TEST(Solver, MinimizeHandleMatchesGraphSolver) {
  auto g = std::make_shared<const GraphPForm>(GraphPForm::complete(5, 3.0));
  std::vector<double> pinned{0.0, 2.0};
  auto a = minimize_handle(*g, {0, 4}, pinned, SolverConfig{});
  CompiledGraph cg(g, {0, 4});
  auto b = cg.solve(pinned, SolverConfig{});
  ASSERT_TRUE(a.converged && b.converged);
  EXPECT_NEAR(a.energy, b.energy, 1e-8 * b.energy);
}
