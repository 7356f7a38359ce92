#include <gtest/gtest.h>

#include <cmath>

#include "penergy/measures.hpp"

using namespace penergy;

namespace {

Vec vec3(double a, double b, double c) {
  Vec v(3);
  v << a, b, c;
  return v;
}

std::shared_ptr<const E0Oracle> sg_oracle(double p, int depth) {
  return build_e0_oracle(preset_structure("sg"), p, depth, SolverConfig{});
}

}  // namespace

TEST(Measures, LinearMassFractions) {
  auto h = harmonic_extend(sg_oracle(2.0, 4), vec3(0, 1, 1), 1, SolverConfig{});
  auto mu = energy_measure(h, 1);
  ASSERT_EQ(mu.mass.size(), 3u);
  EXPECT_NEAR(mu.total(), 2.0, 1e-9);
  EXPECT_NEAR(mu.mass[0] / mu.total(), 0.6, 1e-10);
  EXPECT_NEAR(mu.mass[1] / mu.total(), 0.2, 1e-10);
  EXPECT_NEAR(mu.mass[2] / mu.total(), 0.2, 1e-10);
}

TEST(Measures, CoarseningIsAdditive) {
  auto o = sg_oracle(3.0, 4);
  auto h = harmonic_extend(o, vec3(0, 1, 2), 4, SolverConfig{});
  auto fine = energy_measure(h, 4);
  auto coarse = fine.coarsen();
  auto direct = energy_measure(h, 3);
  ASSERT_EQ(coarse.mass.size(), direct.mass.size());
  for (std::size_t c = 0; c < coarse.mass.size(); ++c)
    EXPECT_NEAR(coarse.mass[c], direct.mass[c], 4 * o->tolerance() * fine.total());
  EXPECT_LE(additivity_defect(h), 4 * o->tolerance());
  EXPECT_THROW(energy_measure(h, 5), std::out_of_range);
}

TEST(Measures, DerivativeMeasureTotals) {
  SolverConfig cfg;
  auto o = sg_oracle(2.5, 4);
  auto u = harmonic_extend(o, vec3(0, 1, 2), 3, cfg);
  auto v = harmonic_extend(o, vec3(1, -1, 0.5), 3, cfg);
  auto mu = derivative_measure(u, v, 3);
  EXPECT_NEAR(mu.total(), o->derivative(u.boundary(), v.boundary()), 10 * o->tolerance() * u.level_energy(0));
  auto self = derivative_measure(u, u, 2, 2);
  auto en = energy_measure(u, 2);
  for (std::size_t c = 0; c < en.mass.size(); ++c) EXPECT_NEAR(self.mass[c], en.mass[c], 1e-6 * en.total());
}

TEST(Measures, PolynomialEvaluation) {
  Polynomial phi{{1.0, -2.0, 3.0}};
  EXPECT_DOUBLE_EQ(phi(2.0), 1 - 4 + 12);
  EXPECT_DOUBLE_EQ(phi.derivative(2.0), -2 + 12);
  Polynomial zero{{}};
  EXPECT_DOUBLE_EQ(zero(3.0), 0.0);
}

TEST(Measures, ChainRuleAffineIsExact) {
  SolverConfig cfg;
  auto o = sg_oracle(2.0, 4);
  auto u = harmonic_extend(o, vec3(0, 1, 2), 5, cfg);
  auto rep = chain_rule_check(u, Polynomial{{0.5, -2.0}}, 3, 2);
  ASSERT_EQ(rep.levels.size(), 3u);
  for (const auto& l : rep.levels) EXPECT_LE(l.deviation, 10 * o->tolerance());
  EXPECT_THROW(chain_rule_check(u, Polynomial{{0, 1}}, 4, 2), std::invalid_argument);
}

TEST(Measures, ChainRuleSquareImproves) {
  SolverConfig cfg;
  auto o = sg_oracle(2.0, 3);
  auto u = harmonic_extend(o, vec3(0, 1, 2), 5, cfg);
  auto rep = chain_rule_check(u, Polynomial{{0, 0, 1}}, 3, 2);
  for (std::size_t k = 1; k < rep.levels.size(); ++k) EXPECT_LT(rep.levels[k].deviation, rep.levels[k - 1].deviation);
}

TEST(Measures, EqualExponentsHaveUnitAffinity) {
  SolverConfig cfg;
  auto o = sg_oracle(2.0, 3);
  auto t = hellinger_experiment(o, o, vec3(0, 1, 1), vec3(0, 1, 1), 1, 3, cfg);
  ASSERT_EQ(t.rows.size(), 3u);
  for (const auto& r : t.rows) {
    EXPECT_NEAR(r.max_affinity, 1.0, 1e-9);
    EXPECT_NEAR(r.min_affinity, 1.0, 1e-9);
  }
}

TEST(Measures, DifferentExponentsLoseAffinity) {
  SolverConfig cfg;
  auto t = hellinger_experiment(sg_oracle(2.0, 3), sg_oracle(3.0, 3), vec3(0, 1, 1), vec3(0, 1, 1), 1, 3, cfg);
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    EXPECT_LT(t.rows[k].max_affinity, 1.0);
    if (k > 0) EXPECT_LT(t.rows[k].max_cum_product, t.rows[k - 1].max_cum_product);
  }
}

TEST(Measures, DeltaBound) {
  // A = c2 ρ^{-N/(p-1)}; A = 1 gives cos(π/2 − π/4).
  EXPECT_NEAR(delta_bound(1.0, 1.0, 2.0, 1), std::cos(M_PI / 4), 1e-14);
  EXPECT_TRUE(std::isnan(delta_bound(4.0, 1.0, 2.0, 1)));
  double d = delta_bound(0.25, 5.0 / 3.0, 2.0, 2);
  EXPECT_GT(d, 0.0);
  EXPECT_LT(d, 1.0);
}

TEST(Measures, NoAtomsAtJunctions) {
  SolverConfig cfg;
  auto o = sg_oracle(3.0, 3);
  auto h = harmonic_extend(o, vec3(0, 1, 2), 5, cfg);
  int x = h.net->interior_ids.front();
  auto rows = atom_check(h, x);
  ASSERT_FALSE(rows.empty());
  EXPECT_NEAR(rows.front().mass, h.level_energy(0), 1e-9 * h.level_energy(0));
  for (std::size_t k = 1; k < rows.size(); ++k) EXPECT_LE(rows[k].mass, rows[k - 1].mass);
  EXPECT_LT(rows.back().mass, 0.1 * rows.front().mass);
}
