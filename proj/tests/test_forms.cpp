#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "penergy/forms.hpp"
#include "penergy/renorm.hpp"

using namespace penergy;

namespace {

Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

}  // namespace

TEST(Forms, CompleteGraphValues) {
  auto k2 = GraphPForm::complete(3, 2.0);
  EXPECT_DOUBLE_EQ(k2.value(vec({0, 1, 1})), 2.0);
  auto k3 = GraphPForm::complete(3, 3.0);
  EXPECT_DOUBLE_EQ(k3.value(vec({0, 1, 2})), 10.0);
  EXPECT_EQ(k3.edges().size(), 3u);
}

TEST(Forms, RejectsBadInput) {
  EXPECT_THROW(GraphPForm(3, 0.5, {{0, 1, 1.0}, {1, 2, 1.0}}), std::invalid_argument);
  EXPECT_THROW(GraphPForm(3, 2.0, {{0, 1, 1.0}}), std::invalid_argument);  // disconnected
  EXPECT_THROW(GraphPForm(2, 2.0, {{0, 1, -1.0}}), std::invalid_argument);
  auto k = GraphPForm::complete(3, 2.0);
  EXPECT_THROW(k.value(vec({1, 2})), std::invalid_argument);
}

TEST(Forms, HomogeneityAndTranslation) {
  for (double p : {1.5, 2.0, 3.0}) {
    auto g = GraphPForm::complete(4, p, 0.7);
    Vec u = sample_direction(4, 3, 0);
    double e = g.value(u);
    EXPECT_NEAR(g.value(-2.5 * u), std::pow(2.5, p) * e, 1e-10 * std::pow(2.5, p) * e);
    EXPECT_NEAR(g.value((u.array() + 4.0).matrix()), e, 1e-10 * e);
  }
}

TEST(Forms, GradientIsScaledDerivative) {
  auto g = GraphPForm::complete(4, 3.0);
  Vec u = vec({0, 1, -0.5, 2});
  Vec grad = g.gradient(u);
  for (int x = 0; x < 4; ++x) {
    Vec e = Vec::Zero(4);
    e[x] = 1;
    EXPECT_NEAR(grad[x], g.derivative(u, e), 1e-12);
  }
  EXPECT_NEAR(grad.sum(), 0.0, 1e-12);
  // E(u; u) = E(u)
  EXPECT_NEAR(g.derivative(u, u), g.value(u), 1e-12);
}

TEST(Forms, DerivativeMatchesFiniteDifferences) {
  for (double p : {1.5, 2.0, 2.5, 3.0}) {
    auto g = GraphPForm::complete(5, p);
    EXPECT_LT(derivative_fd_defect(g, 100, 17), 1e-6) << "p=" << p;
  }
}

TEST(Forms, EffectiveResistance) {
  SolverConfig cfg;
  auto k = GraphPForm::complete(3, 2.0);
  EXPECT_NEAR(effective_resistance(k, 0, 1, cfg), 2.0 / 3.0, 1e-9);
  // p = 3: inf = 1 + 2 (1/2)^3
  auto k3 = GraphPForm::complete(3, 3.0);
  EXPECT_NEAR(effective_resistance(k3, 0, 2, cfg), 1.0 / 1.25, 1e-8);
}

TEST(Forms, PropertySuiteOnGraphForms) {
  for (double p : {1.5, 2.0, 3.0}) {
    auto g = GraphPForm::complete(5, p, 1.3);
    auto report = property_suite(g, 60, 5);
    for (const auto& c : report.checks) EXPECT_TRUE(c.passed) << c.name << " p=" << p << " worst=" << c.worst;
    EXPECT_TRUE(report.passed());
  }
}

TEST(Forms, LevelFormSumsCells) {
  auto spec = preset_structure("sg");
  auto net = std::make_shared<const VertexNet>(build_net(spec, 1));
  auto inner = std::make_shared<const GraphPForm>(GraphPForm::complete(3, 2.0));
  LevelForm lf(net, inner, 5.0 / 3.0);
  Vec u = sample_direction(net->vertex_count, 9, 0);
  double sum = 0;
  for (std::uint64_t c = 0; c < net->cells(); ++c) sum += inner->value(lf.cell_values(u, c));
  EXPECT_NEAR(lf.value(u), 5.0 / 3.0 * sum, 1e-12);
  EXPECT_TRUE(lf.expand().has_value());
}

TEST(Forms, TraceOfStarIsTriangle) {
  // p = 2 star with unit legs traces to a triangle with weight 1/3.
  auto star = std::make_shared<const GraphPForm>(4, 2.0, std::vector<Edge>{{0, 3, 1.0}, {1, 3, 1.0}, {2, 3, 1.0}});
  TraceForm tr(star, {0, 1, 2}, SolverConfig{});
  Vec u = vec({0, 1, 3});
  EXPECT_NEAR(tr.value(u), (1.0 + 9.0 + 4.0) / 3.0, 1e-9);
  Vec grad = tr.gradient(u);
  auto tri = GraphPForm::complete(3, 2.0, 1.0 / 3.0);
  Vec expect = tri.gradient(u);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(grad[i], expect[i], 1e-8);
}

TEST(Forms, SampleDirectionIsSeededAndCentred) {
  Vec a = sample_direction(6, 42, 3);
  Vec b = sample_direction(6, 42, 3);
  Vec c = sample_direction(6, 42, 4);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  EXPECT_NEAR(a.sum(), 0.0, 1e-14);
}
