#include <gtest/gtest.h>

#include <cmath>

#include "penergy/renorm.hpp"

using namespace penergy;

namespace {

Vec vec3(double a, double b, double c) {
  Vec v(3);
  v << a, b, c;
  return v;
}

}  // namespace

TEST(Renorm, LinearDeepTraces) {
  // p = 2 on SG: each level multiplies the energy by 3/5.
  auto sg = preset_structure("sg");
  SolverConfig cfg;
  Vec u = vec3(0, 1, 1);
  EXPECT_NEAR(deep_trace(sg, 2.0, 0, u, cfg), 2.0, 1e-12);
  EXPECT_NEAR(deep_trace(sg, 2.0, 1, u, cfg), 6.0 / 5.0, 1e-10);
  EXPECT_NEAR(deep_trace(sg, 2.0, 2, u, cfg), 18.0 / 25.0, 1e-10);
}

TEST(Renorm, DirectionsAreCentred) {
  for (int m : {3, 4}) {
    auto dirs = rho_directions(m);
    ASSERT_EQ(dirs.size(), 3u);
    for (const auto& d : dirs) EXPECT_NEAR(d.sum(), 0.0, 1e-14);
  }
  EXPECT_THROW(rho_directions(1), std::invalid_argument);
}

TEST(Renorm, RhoAtPEqualsTwo) {
  auto est = estimate_rho(preset_structure("sg"), 2.0, 5, SolverConfig{});
  EXPECT_NEAR(est.rho, 5.0 / 3.0, 1e-8);
  for (const auto& r : est.ratios)
    for (double x : r) EXPECT_NEAR(x, 5.0 / 3.0, 1e-8);
}

TEST(Renorm, VicsekRhoAtPEqualsTwo) {
  auto est = estimate_rho(preset_structure("vicsek"), 2.0, 4, SolverConfig{});
  EXPECT_NEAR(est.rho, 3.0, 1e-8);
}

TEST(Renorm, RejectsBadArguments) {
  auto sg = preset_structure("sg");
  EXPECT_THROW(estimate_rho(sg, 1.0, 5, SolverConfig{}), std::invalid_argument);
  EXPECT_THROW(estimate_rho(sg, 2.0, 2, SolverConfig{}), std::invalid_argument);
  EXPECT_THROW(sweep_p(sg, {2.0, 1.5}, 4, 3, SolverConfig{}), std::invalid_argument);
}

TEST(Renorm, OracleIsAFixedPoint) {
  SolverConfig cfg;
  auto sg = preset_structure("sg");
  auto o = build_e0_oracle(sg, 2.0, 4, cfg);
  EXPECT_NEAR(o->rho(), 5.0 / 3.0, 1e-9);
  EXPECT_LT(o->residual(), 1e-9);
  // p = 2 oracle is the resistance form of K3 with weight 1.
  EXPECT_NEAR(o->value(vec3(0, 1, 1)), 2.0, 1e-9);

  auto o3 = build_e0_oracle(sg, 3.0, 4, cfg);
  EXPECT_LT(o3->residual(), 1e-3);
  EXPECT_GE(o3->tolerance(), o3->residual());
}

TEST(Renorm, OracleIsSymmetric) {
  SolverConfig cfg;
  auto sg = preset_structure("sg");
  auto o = build_e0_oracle(sg, 3.5, 3, cfg);
  Vec u = vec3(0.1, 1.0, -0.7);
  double e = o->value(u);
  std::vector<double> raw(u.data(), u.data() + 3);
  for (const auto& g : sg.group) {
    auto r = apply_symmetry(sg, g, raw);
    Vec ug = Eigen::Map<const Vec>(r.data(), 3);
    EXPECT_NEAR(o->value(ug), e, 2 * o->tolerance() * e);
  }
}

TEST(Renorm, HomogeneityOfOracle) {
  SolverConfig cfg;
  auto o = build_e0_oracle(preset_structure("sg"), 1.5, 3, cfg);
  Vec u = vec3(0, 1, 3);
  double e = o->value(u);
  EXPECT_NEAR(o->value(2.0 * u), std::pow(2.0, 1.5) * e, 10 * o->tolerance() * e);
  EXPECT_NEAR(o->value((u.array() + 5).matrix()), e, 10 * o->tolerance() * e);
}

TEST(Renorm, RescaledOracle) {
  SolverConfig cfg;
  auto o = build_e0_oracle(preset_structure("sg"), 2.0, 3, cfg);
  auto r = o->rescaled(2.0);
  Vec u = vec3(0, 1, 2);
  EXPECT_NEAR(r->value(u), 2 * o->value(u), 1e-9);
  EXPECT_THROW(o->rescaled(0.0), std::invalid_argument);
}

TEST(Renorm, LinearEigenpair) {
  SolverConfig cfg;
  auto sg = preset_structure("sg");
  auto o = build_e0_oracle(sg, 2.0, 4, cfg);
  for (int i = 0; i < 3; ++i) {
    auto ep = eigen_pair(sg, 2.0, i, *o, cfg);
    EXPECT_NEAR(ep.kappa, 0.6, 1e-8);
    EXPECT_NEAR(ep.kappa_read, 0.6, 1e-8);
    EXPECT_NEAR(ep.lambda, 0.2, 1e-8);
    EXPECT_TRUE(ep.consistent);
  }
}

TEST(Renorm, NonlinearEigenpairAgreesAcrossSymbols) {
  SolverConfig cfg;
  auto sg = preset_structure("sg");
  auto o = build_e0_oracle(sg, 3.0, 4, cfg);
  auto e0 = eigen_pair(sg, 3.0, 0, *o, cfg);
  EXPECT_GT(e0.lambda, 0.0);
  EXPECT_LT(e0.lambda, e0.kappa);
  EXPECT_LT(e0.kappa, 1.0);
  for (int i = 1; i < 3; ++i) {
    auto e = eigen_pair(sg, 3.0, i, *o, cfg);
    EXPECT_NEAR(e.lambda, e0.lambda, 2 * o->tolerance() + 1e-9);
    EXPECT_NEAR(e.kappa_read, e0.kappa_read, 2 * o->tolerance() + 1e-9);
  }
}

TEST(Renorm, SweepRowsAreComplete) {
  auto rows = sweep_p(preset_structure("sg"), {1.5, 2.0, 3.0}, 5, 3, SolverConfig{}, 2);
  ASSERT_EQ(rows.size(), 3u);
  for (const auto& r : rows) {
    EXPECT_TRUE(r.ok) << r.message;
    EXPECT_GT(r.rho, 1.0);
    EXPECT_NEAR(r.kappa * r.rho_resist, 1.0, 1e-12);
  }
  EXPECT_LT(rows[0].rho_resist, rows[1].rho_resist);
  EXPECT_LT(rows[1].rho_resist, rows[2].rho_resist);
}
