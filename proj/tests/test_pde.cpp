#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "mcomp/model/diffusion_model.hpp"
#include "mcomp/pde/export.hpp"
#include "mcomp/pde/residual.hpp"
#include "mcomp/pde/solver.hpp"

using namespace mcomp;
using namespace mcomp::model;
using namespace mcomp::pde;

namespace {

double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Undiscounted-payoff call on S = exp(x1), zero rate, unit maturity.
double lognormal_call(double s, double k, double vol) {
  const double d1 = (std::log(s / k) + 0.5 * vol * vol) / vol;
  return s * norm_cdf(d1) - k * norm_cdf(d1 - vol);
}

// Constant coefficients with a correlated covariance (nonzero a12).
DiffusionModel correlated_model(double r, Payoff g) {
  const Mat2 sigma{{{0.3, 0.0}, {0.15, 0.25}}};
  auto m = constant_model({-0.045, 0.02}, sigma, r, CoefficientField::coordinate(0), std::move(g));
  return m;
}

SpaceTimeGrid unit_grid(int n1, int n2, int nt) {
  SpaceTimeGrid g;
  g.box = Box{{-1.5, -1.5}, {1.5, 1.5}};
  g.n1 = n1;
  g.n2 = n2;
  g.n_t = nt;
  return g;
}

}  // namespace

TEST(Grid, KinkAlignedMidwayBetweenLines) {
  const auto m = lognormal_model(0.2, 0.0, 1.3);
  const auto g = make_grid(m, 41, 21, 8);
  const double s = (std::log(1.3) - g.box.lo[0]) / g.h(0);
  EXPECT_NEAR(s - std::floor(s), 0.5, 1e-9);
}

TEST(Grid, RejectsDegenerateLayouts) {
  auto g = unit_grid(2, 5, 4);
  EXPECT_THROW(g.check(), GridError);
  g = unit_grid(3, 3, 4);
  const auto m = lognormal_model(0.2, 0.0, 1.0);
  EXPECT_THROW(solve_backward(m, g, m.payoff), GridError);
}

TEST(Solver, ConstantTerminalStaysConstant) {
  const auto m = correlated_model(0.0, constant_payoff(1.0));
  const auto v = solve_backward(m, unit_grid(21, 17, 10), m.payoff);
  for (double x : v.data()) EXPECT_NEAR(x, 1.0, 1e-13);
}

TEST(Solver, ConstantRateDiscounts) {
  const auto m = correlated_model(0.05, constant_payoff(1.0));
  const auto v = solve_backward(m, unit_grid(21, 17, 40), m.payoff);
  EXPECT_NEAR(v.at(0, 10, 8), std::exp(-0.05), 1e-5);
}

TEST(Solver, LognormalCallMatchesClosedForm) {
  const auto m = lognormal_model(0.2, 0.0, 1.0);
  const auto g = make_grid(m, 201, 101, 256);
  const auto v = solve_backward(m, g, m.payoff);
  const double got = v.interpolate(0.0, m.x0);
  const double want = lognormal_call(1.0, 1.0, 0.2);
  EXPECT_LE(std::abs(got - want) / want, 5e-3) << got << " vs " << want;
}

TEST(Solver, LinearInTerminalCondition) {
  const auto m = correlated_model(0.03, call_payoff(1.0));
  const auto g = unit_grid(31, 25, 20);
  const Payoff g1 = call_payoff(1.0), g2 = put_payoff(0.8);
  const double alpha = 1.7, beta = -0.6;
  const auto v1 = solve_backward(m, g, g1);
  const auto v2 = solve_backward(m, g, g2);
  const auto vc = solve_backward(m, g, combine(alpha, g1, beta, g2));
  double worst = 0.0, scale = 0.0;
  for (std::size_t q = 0; q < vc.data().size(); ++q) {
    worst = std::max(worst, std::abs(vc.data()[q] - alpha * v1.data()[q] - beta * v2.data()[q]));
    scale = std::max(scale, std::abs(vc.data()[q]));
  }
  EXPECT_LE(worst, 1e-12 * scale);
}

// Face nodes hold linearly extrapolated values, so the sign check covers the
// nodes the scheme solves for.
TEST(Solver, FullyImplicitComparisonPrinciple) {
  const Mat2 sigma{{{0.3, 0.0}, {0.2, 0.25}}};
  auto m = constant_model({0.0, 0.0}, sigma, 0.02, CoefficientField::coordinate(0), call_payoff(1.0));
  m.payoff.value = [](const Vec2& x) { return std::max(std::exp(x[0]) + std::exp(x[1]) - 2.0, 0.0); };
  auto g = unit_grid(41, 41, 40);
  g.theta = 1.0;
  const auto v = solve_backward(m, g, m.payoff);
  double gmax = 0.0;
  for (int i = 0; i < g.n1; ++i)
    for (int j = 0; j < g.n2; ++j) gmax = std::max(gmax, m.payoff(g.node(i, j)));
  double worst = 0.0;
  for (int k = 0; k < v.levels(); ++k)
    for (int i = 1; i < g.n1 - 1; ++i)
      for (int j = 1; j < g.n2 - 1; ++j) worst = std::min(worst, v.at(k, i, j));
  EXPECT_GE(worst, -1e-12 * gmax);
}

TEST(Solver, ResultIndependentOfWorkerCount) {
  const auto m = correlated_model(0.01, call_payoff(1.0));
  const auto g = unit_grid(25, 21, 12);
  SolveOptions one, three;
  one.workers = 1;
  three.workers = 3;
  const auto a = solve_backward(m, g, m.payoff, one);
  const auto b = solve_backward(m, g, m.payoff, three);
  EXPECT_EQ(a.data(), b.data());
}

TEST(Solver, ZeroPivotReportsStep) {
  auto m = constant_model({0.0, 0.0}, Mat2{{{0.0, 0.0}, {0.0, 0.0}}}, -20.0, CoefficientField::coordinate(0),
                          constant_payoff(1.0));
  auto g = unit_grid(6, 6, 10);
  g.theta = 1.0;
  g.rannacher_steps = 0;
  try {
    solve_backward(m, g, m.payoff);
    FAIL() << "expected SolverError";
  } catch (const SolverError& e) {
    EXPECT_EQ(e.step(), 0);
  }
}

TEST(Solver, CrossTermWarning) {
  const Mat2 sigma{{{1.0, 0.0}, {0.99, 0.1}}};
  const auto m = constant_model({0.0, 0.0}, sigma, 0.0, CoefficientField::coordinate(0), call_payoff(1.0));
  SolveStats stats;
  solve_backward(m, unit_grid(41, 41, 2), m.payoff, {}, &stats);
  EXPECT_GT(stats.max_cross_ratio, 1.0);
  EXPECT_FALSE(stats.warnings.empty());
  SolveStats calm;
  solve_backward(m, unit_grid(11, 11, 400), m.payoff, {}, &calm);
  EXPECT_TRUE(calm.warnings.empty());
}

TEST(Residual, ConstantFieldHasZeroResidual) {
  const auto m = correlated_model(0.0, constant_payoff(1.0));
  const auto v = ValueField::sample(unit_grid(15, 15, 10), [](double, const Vec2&) { return 1.0; });
  EXPECT_EQ(pde_residual(m, v).max, 0.0);
  EXPECT_EQ(derivative_pde_residual(m, v, 0).max, 0.0);
  EXPECT_EQ(derivative_pde_residual(m, v, 1).max, 0.0);
}

// v = exp(-(1 - t)) x1 solves d_t v + L v - v = 0 for b = 0, r = 1; the only
// residual left is the time-stencil truncation error, second order in dt.
TEST(Residual, ManufacturedSolutionSecondOrderInTime) {
  const auto m = constant_model({0.0, 0.0}, identity2(), 1.0, CoefficientField::coordinate(0), coordinate_payoff(0));
  auto run = [&](int nt) {
    const auto v = ValueField::sample(unit_grid(9, 9, nt),
                                      [](double t, const Vec2& x) { return std::exp(-(1.0 - t)) * x[0]; });
    return pde_residual(m, v).l2;
  };
  const double coarse = run(20), fine = run(40);
  EXPECT_GT(coarse, 0.0);
  EXPECT_NEAR(std::log2(coarse / fine), 2.0, 0.1);
}

TEST(Residual, SolverResidualDecreasesUnderRefinement) {
  const auto m = lognormal_model(0.2, 0.0, 1.0);
  auto run = [&](int n1, int n2, int nt) {
    const auto g = make_grid(m, n1, n2, nt);
    return pde_residual(m, solve_backward(m, g, m.payoff)).l2;
  };
  const double coarse = run(84, 44, 64), fine = run(168, 88, 128);
  EXPECT_GE(coarse / fine, 3.0) << coarse << " " << fine;
}

TEST(Residual, DerivativeEquationReducesForConstantCoefficients) {
  const auto m = correlated_model(0.02, call_payoff(1.0));
  const auto v = solve_backward(m, unit_grid(31, 31, 30), m.payoff);
  for (int axis = 0; axis < 2; ++axis) {
    const auto a = derivative_pde_residual(m, v, axis);
    const auto b = pde_residual(m, v.derivative_field(axis));
    EXPECT_NEAR(a.l2, b.l2, 1e-12 * std::max(1.0, b.l2));
  }
}

TEST(Export, CsvHeaderAndRowCount) {
  const auto v = ValueField::sample(unit_grid(4, 5, 2), [](double t, const Vec2& x) { return t + x[0]; });
  const std::string path = ::testing::TempDir() + "/value.csv";
  write_value_csv(v, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,x1,x2,v");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 3 * 4 * 5);
  std::remove(path.c_str());
}
