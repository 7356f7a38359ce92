#include <gtest/gtest.h>

#include <cmath>

#include "penergy/harmonic.hpp"

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

TEST(Harmonic, OneFifthTwoFifthsRule) {
  auto h = harmonic_extend(sg_oracle(2.0, 3), vec3(0, 0, 1), 1, SolverConfig{});
  // cell 1 has corners (q_1, midpoint q_1q_2, midpoint q_1q_3)
  Vec t = h.tuple(1, 0);
  EXPECT_NEAR(t[0], 0.0, 1e-12);
  EXPECT_NEAR(t[1], 0.2, 1e-9);
  EXPECT_NEAR(t[2], 0.4, 1e-9);
  Vec t2 = h.tuple(1, 1);
  EXPECT_NEAR(t2[2], 0.4, 1e-9);
}

TEST(Harmonic, TuplesAgreeWithNetValues) {
  auto h = harmonic_extend(sg_oracle(3.0, 3), vec3(0, 1, 2), 3, SolverConfig{});
  for (int k = 0; k <= 3; ++k) {
    Vec vals = h.values_at(k);
    auto net = build_net(h.spec, k);
    for (std::uint64_t c = 0; c < net.cells(); ++c) {
      auto ids = net.cell(c);
      Vec t = h.tuple(k, c);
      for (int a = 0; a < 3; ++a) EXPECT_EQ(vals[ids[a]], t[a]);
    }
  }
}

TEST(Harmonic, RestrictionConsistency) {
  SolverConfig cfg;
  for (double p : {1.5, 3.0}) {
    auto o = sg_oracle(p, 4);
    Vec u0 = vec3(0, 1, 3);
    auto deep = harmonic_extend(o, u0, 4, cfg);
    for (int m = 1; m < 4; ++m) {
      auto shallow = harmonic_extend(o, u0, m, cfg);
      Vec a = deep.values_at(m), b = shallow.values;
      EXPECT_LE((a - b).lpNorm<Eigen::Infinity>(), 2 * o->tolerance() * 3) << "p=" << p << " m=" << m;
    }
  }
}

TEST(Harmonic, EnergyDecomposition) {
  SolverConfig cfg;
  for (double p : {1.5, 2.0, 3.0}) {
    auto o = sg_oracle(p, 4);
    auto h = harmonic_extend(o, vec3(0, 1, 2), 4, cfg);
    double e0 = h.level_energy(0);
    // The bound is attained on the calibration direction of ρ, so it gets a rounding allowance.
    for (int n = 1; n <= 4; ++n)
      EXPECT_NEAR(h.level_energy(n), e0, (n * o->tolerance() + 1e-12) * e0) << "p=" << p;
  }
}

TEST(Harmonic, RecursiveEqualsGlobal) {
  SolverConfig cfg;
  for (double p : {1.5, 2.0, 3.0}) {
    auto o = sg_oracle(p, 4);
    Vec u0 = vec3(0, 1, 2);
    auto h = harmonic_extend(o, u0, 3, cfg);
    Vec g = global_harmonic(*o, u0, 3, cfg);
    EXPECT_LE((h.values - g).lpNorm<Eigen::Infinity>(), 10 * o->tolerance() * 2) << "p=" << p;
  }
}

TEST(Harmonic, ThreadCountDoesNotChangeResults) {
  auto o = sg_oracle(3.0, 3);
  auto a = harmonic_extend(o, vec3(0, 1, 2), 4, SolverConfig{}, 1);
  auto b = harmonic_extend(o, vec3(0, 1, 2), 4, SolverConfig{}, 4);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.energies, b.energies);
}

TEST(Harmonic, VicsekExtension) {
  SolverConfig cfg;
  auto o = build_e0_oracle(preset_structure("vicsek"), 2.0, 3, cfg);
  Vec u0(4);
  u0 << 0, 1, 1, 1;
  auto h = harmonic_extend(o, u0, 3, cfg);
  EXPECT_EQ(h.net->vertex_count, 3 * 125 + 1);
  EXPECT_NEAR(h.level_energy(3), h.level_energy(0), 3 * o->tolerance() * h.level_energy(0));
  // maximum principle
  EXPECT_GE(h.values.minCoeff(), -1e-9);
  EXPECT_LE(h.values.maxCoeff(), 1 + 1e-9);
}

TEST(Harmonic, RepeatedWordIndex) {
  EXPECT_EQ(repeated_word_index(0, 4, 3), 0u);
  EXPECT_EQ(repeated_word_index(2, 2, 3), 8u);
  EXPECT_EQ(repeated_word_index(1, 3, 5), 31u);
}

TEST(Harmonic, PerronFrobeniusLinear) {
  SolverConfig cfg;
  auto r = pf_experiment(sg_oracle(2.0, 4), vec3(0, 1, 2), 0, 8, cfg);
  EXPECT_TRUE(r.dominated);
  EXPECT_NEAR(r.c, 1.5, 1e-8);
  for (std::size_t k = 2; k < r.rows.size(); ++k) {
    if (r.rows[k - 1].distance < 1e-10) break;
    EXPECT_NEAR(r.rows[k].distance / r.rows[k - 1].distance, 1.0 / 3.0, 1e-6);
  }
}

TEST(Harmonic, PerronFrobeniusOnEigenfunction) {
  SolverConfig cfg;
  auto o = sg_oracle(3.0, 5);
  auto r = pf_experiment(o, vec3(0, 1, 1), 0, 6, cfg);
  EXPECT_NEAR(r.c, 1.0, 10 * o->tolerance());
  for (const auto& row : r.rows) EXPECT_LE(row.distance, 10 * o->tolerance()) << "n=" << row.n;
}

TEST(Harmonic, ComparisonPrinciples) {
  auto rep = comparison_suite(sg_oracle(2.0, 3), 3, 40, 5, SolverConfig{}, 2);
  EXPECT_EQ(rep.pairs, 40);
  EXPECT_TRUE(rep.passed()) << "weak " << rep.weak_violations << " strong " << rep.strong_failures;
  EXPECT_GT(rep.strong_pairs, 0);
  EXPECT_GT(rep.min_strong_margin, 0.0);
}

TEST(Harmonic, OscillationOfEigenfunction) {
  SolverConfig cfg;
  auto o = sg_oracle(3.0, 5);
  auto h = harmonic_extend(o, vec3(0, 1, 1), 4, cfg);
  auto prof = oscillation_profile(h, cfg);
  double kappa = std::pow(o->rho(), -1.0 / 2.0);
  ASSERT_FALSE(prof.chain_osc_ratios.empty());
  for (double r : prof.chain_osc_ratios[0]) EXPECT_NEAR(r, kappa, 10 * o->tolerance());
  EXPECT_GT(prof.c1, 0.0);
  EXPECT_GT(prof.c3, 0.0);
}

TEST(Harmonic, HoelderAndContraction) {
  auto rep = hoelder_check(sg_oracle(2.5, 3), 3, 40, 3, SolverConfig{});
  EXPECT_TRUE(rep.passed()) << rep.violations << " " << rep.contraction_violations;
}
