#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "mcomp/model/diffusion_model.hpp"
#include "mcomp/model/generator.hpp"
#include "mcomp/model/structural_operators.hpp"
#include "mcomp/model/validate.hpp"

using namespace mcomp;
using namespace mcomp::model;

namespace {

Jet X1(const Vec2& x) { return Jet::coordinate(0, x[0]); }
Jet X2(const Vec2& x) { return Jet::coordinate(1, x[1]); }

// Every coefficient depends on both coordinates, f also on time.
DiffusionModel mixed_model() {
  DiffusionModel m;
  m.kind = "mixed";
  m.forward = CoefficientField("f", [](double t, const Vec2& x) {
    const Jet a = X1(x), b = X2(x), tt = Jet::time(t);
    return exp(0.4 * a + 0.3 * tt * b + 0.1 * a * b);
  });
  m.vol[0][0] = CoefficientField("s11", [](double, const Vec2& x) { return 0.4 + 0.1 * X1(x) * X1(x); });
  m.vol[0][1] = CoefficientField("s12", [](double, const Vec2& x) { return 0.05 * X2(x); });
  m.vol[1][0] = CoefficientField("s21", [](double, const Vec2& x) { return 0.1 * X1(x) * X2(x); });
  m.vol[1][1] = CoefficientField("s22", [](double t, const Vec2& x) { return 0.3 + 0.05 * exp(X1(x) - t); });
  m.drift[0] = CoefficientField("b1", [](double, const Vec2& x) { return 0.1 * X1(x) * X2(x); });
  m.drift[1] = CoefficientField("b2", [](double, const Vec2& x) { return -0.2 * X2(x) + 0.05 * X1(x) * X1(x); });
  m.rate = CoefficientField("r", [](double, const Vec2& x) { return 0.02 + 0.01 * X1(x) * X1(x) + 0.01 * X2(x); });
  m.payoff = call_payoff(1.0);
  return m;
}

using Scalar = std::function<double(double, const Vec2&)>;

// Fourth-order central difference in x_j (or t when j == 2).
Scalar fd(const Scalar& f, int j, double h = 1e-2) {
  return [=](double t, const Vec2& x) {
    auto at = [&](double s) {
      if (j == 2) return f(t + s, x);
      Vec2 y = x;
      y[j] += s;
      return f(t, y);
    };
    return (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
  };
}

Scalar as_scalar(const CoefficientField& c) {
  return [c](double t, const Vec2& x) { return c.eval(t, x); };
}

// A, B, C from finite differences of the coefficient values only.
StructuralOperators fd_operators(const DiffusionModel& m, double t, const Vec2& x) {
  const Scalar f = as_scalar(m.forward);
  Scalar a[2][2];
  for (int p = 0; p < 2; ++p)
    for (int q = 0; q < 2; ++q)
      a[p][q] = [&m, p, q](double s, const Vec2& y) { return eval_coeffs(m, s, y).a[p][q]; };
  const Scalar df[2] = {fd(f, 0), fd(f, 1)};
  const Scalar ddf[2][2] = {{fd(df[0], 0), fd(df[0], 1)}, {fd(df[1], 0), fd(df[1], 1)}};
  StructuralOperators out;
  for (int j = 0; j < 2; ++j) {
    const double sign = j == 0 ? -1.0 : 1.0;
    const int o = 1 - j;
    for (int k = 0; k < 2; ++k) {
      double ha = 0.0;
      for (int mm = 0; mm < 2; ++mm) ha += ddf[o][mm](t, x) * a[mm][k](t, x);
      out.A[j][k] = df[0](t, x) * fd(a[j][k], 1)(t, x) - df[1](t, x) * fd(a[j][k], 0)(t, x) - 2 * sign * ha;
    }
    const auto c = eval_coeffs(m, t, x);
    double gen = fd(df[o], 2)(t, x) - c.r * df[o](t, x);
    for (int p = 0; p < 2; ++p) {
      gen += c.b[p] * ddf[o][p](t, x);
      for (int q = 0; q < 2; ++q) gen += 0.5 * c.a[p][q] * fd(ddf[o][p], q)(t, x);
    }
    const Scalar bj = as_scalar(m.drift[j]);
    out.B[j] = df[0](t, x) * fd(bj, 1)(t, x) - df[1](t, x) * fd(bj, 0)(t, x) - sign * gen;
  }
  const Scalar r = as_scalar(m.rate);
  out.C = df[0](t, x) * fd(r, 1)(t, x) - df[1](t, x) * fd(r, 0)(t, x);
  return out;
}

double rel(double got, double want, double scale) { return std::abs(got - want) / std::max(scale, 1e-300); }

}  // namespace

TEST(EvalCoeffs, IdentityVolatility) {
  const auto m = constant_model({0.0, 0.0}, identity2(), 0.0, CoefficientField::coordinate(0), coordinate_payoff(1));
  const auto c = eval_coeffs(m, 0.3, {1.0, -2.0});
  EXPECT_EQ(c.a, identity2());
}

TEST(EvalCoeffs, CovarianceIsSymmetricProduct) {
  const auto m = mixed_model();
  const auto c = eval_coeffs(m, 0.5, {0.3, -0.4});
  const Mat2 expect = c.sigma * transpose(c.sigma);
  for (int p = 0; p < 2; ++p)
    for (int q = 0; q < 2; ++q) EXPECT_DOUBLE_EQ(c.a[p][q], expect[p][q]);
  EXPECT_EQ(c.a[0][1], c.a[1][0]);
}

TEST(EvalCoeffs, NonFiniteCoefficientNamesFieldAndPoint) {
  auto m = constant_model({0.0, 0.0}, identity2(), 0.0, CoefficientField::coordinate(0), coordinate_payoff(1));
  m.drift[1] = CoefficientField("b2", [](double, const Vec2& x) { return Jet::constant(std::log(x[0])); });
  try {
    eval_coeffs(m, 0.25, {-1.0, 0.0});
    FAIL() << "expected ModelError";
  } catch (const ModelError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("b2"), std::string::npos);
    EXPECT_NE(what.find("t=0.25"), std::string::npos);
  }
}

TEST(CoefficientField, CapabilityErrors) {
  CoefficientField c("low", [](double, const Vec2& x) { return Jet::coordinate(0, x[0]); }, 1, false, false);
  EXPECT_NO_THROW(c.d_dx(0, 0.0, {0.0, 0.0}));
  EXPECT_THROW(c.d2_dx(0, 0, 0.0, {0.0, 0.0}), CapabilityError);
  EXPECT_THROW(c.d_dt(0.0, {0.0, 0.0}), CapabilityError);
  auto m = mixed_model();
  m.forward = c;
  EXPECT_THROW(structural_operators(m, 0.5, {0.0, 0.0}), CapabilityError);
}

TEST(CoefficientField, MixedPartialsSymmetric) {
  const auto m = mixed_model();
  const Jet j = m.forward.jet(0.3, {0.2, 0.7});
  EXPECT_DOUBLE_EQ(j.xx[0][1], j.xx[1][0]);
  EXPECT_DOUBLE_EQ(j.third(0, 0, 1), j.third(0, 1, 0));
  EXPECT_DOUBLE_EQ(j.third(0, 0, 1), j.third(1, 0, 0));
}

TEST(StructuralOperators, MatchFiniteDifferenceOracle) {
  const auto m = mixed_model();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ux(-1.0, 1.0), ut(0.05, 0.95);
  for (int n = 0; n < 50; ++n) {
    const double t = ut(rng);
    const Vec2 x{ux(rng), ux(rng)};
    const auto s = structural_operators(m, t, x);
    const auto o = fd_operators(m, t, x);
    const double sa = std::max({frobenius(o.A), 1e-3}), sb = std::max({norm(o.B), 1e-3});
    for (int j = 0; j < 2; ++j) {
      for (int k = 0; k < 2; ++k) EXPECT_LE(rel(s.A[j][k], o.A[j][k], sa), 1e-6);
      EXPECT_LE(rel(s.B[j], o.B[j], sb), 1e-6);
    }
    EXPECT_LE(rel(s.C, o.C, std::max(std::abs(o.C), 1e-3)), 1e-6);
  }
}

TEST(StructuralOperators, DivergenceMatchesDerivativeOfA) {
  const auto m = mixed_model();
  const double t = 0.4;
  const Vec2 x{0.3, -0.2};
  const auto s = structural_operators(m, t, x);
  for (int j = 0; j < 2; ++j) {
    double div = 0.0;
    for (int k = 0; k < 2; ++k) {
      const Scalar ajk = [&m, j, k](double tt, const Vec2& y) { return structural_operators(m, tt, y).A[j][k]; };
      div += fd(ajk, k)(t, x);
    }
    EXPECT_NEAR(s.divA[j], div, 1e-7 * std::max(1.0, std::abs(div)));
  }
}

TEST(StructuralOperators, ParallelGradientsGiveZeroC) {
  auto m = lognormal_model(0.2, 0.0, 1.0);
  m.rate = CoefficientField("r", [](double, const Vec2& x) { return 0.01 + 0.01 * X1(x) * X1(x); });
  for (double x1 : {-0.5, 0.0, 0.7}) EXPECT_EQ(structural_operators(m, 0.5, {x1, 0.3}).C, 0.0);
}

TEST(StructuralOperators, AffineInEachCoefficient) {
  const auto base = mixed_model();
  const double t = 0.6;
  const Vec2 x{0.2, 0.5};
  auto with_drift = [&](double s) {
    auto m = base;
    m.drift[0] = CoefficientField("b1", [s](double, const Vec2& y) { return s * X1(y) * X2(y); });
    return structural_operators(m, t, x);
  };
  auto with_rate = [&](double s) {
    auto m = base;
    m.rate = CoefficientField("r", [s](double, const Vec2& y) { return s * (0.02 + X1(y) * X2(y)); });
    return structural_operators(m, t, x);
  };
  const auto d0 = with_drift(0.0), d1 = with_drift(1.0), d3 = with_drift(3.0);
  for (int j = 0; j < 2; ++j) EXPECT_NEAR(d3.B[j] - d0.B[j], 3.0 * (d1.B[j] - d0.B[j]), 1e-12);
  const auto r0 = with_rate(0.0), r1 = with_rate(1.0), r3 = with_rate(3.0);
  for (int j = 0; j < 2; ++j) EXPECT_NEAR(r3.B[j] - r0.B[j], 3.0 * (r1.B[j] - r0.B[j]), 1e-12);
  EXPECT_NEAR(r3.C - r0.C, 3.0 * (r1.C - r0.C), 1e-12);
  // covariance: scale sigma by sqrt(s) so that a scales by s
  auto with_cov = [&](double s) {
    auto m = base;
    const double q = std::sqrt(s);
    for (auto& row : m.vol)
      for (auto& c : row) {
        auto old = c;
        c = CoefficientField(old.name(), [old, q](double tt, const Vec2& y) { return q * old.jet(tt, y); });
      }
    return structural_operators(m, t, x);
  };
  const auto a0 = with_cov(0.0), a1 = with_cov(1.0), a3 = with_cov(3.0);
  for (int j = 0; j < 2; ++j) {
    for (int k = 0; k < 2; ++k) EXPECT_NEAR(a3.A[j][k] - a0.A[j][k], 3.0 * (a1.A[j][k] - a0.A[j][k]), 1e-12);
    EXPECT_NEAR(a3.B[j] - a0.B[j], 3.0 * (a1.B[j] - a0.B[j]), 1e-12);
  }
}

TEST(StructuralOperators, SignBridgeBetweenConventions) {
  const auto m = mixed_model();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int n = 0; n < 20; ++n) {
    const Vec2 x{u(rng), u(rng)};
    const auto g = structural_operators(m, 0.5, x, Convention::generator);
    const auto p = structural_operators(m, 0.5, x, Convention::parabolic);
    EXPECT_EQ(p.C, -g.C);
    EXPECT_EQ(p.B, g.B);
    EXPECT_DOUBLE_EQ(p.A[0][1], 0.5 * g.A[0][1]);
  }
}

TEST(ValidateAssumptions, IdentityModelPasses) {
  auto m = constant_model({0.0, 0.0}, identity2(), 0.0, CoefficientField::coordinate(0), coordinate_payoff(0));
  m.envelope.n_inv = 2.0;
  const auto rep = validate_assumptions(m, Box{{-1.0, -1.0}, {1.0, 1.0}}, 256);
  EXPECT_TRUE(rep.passed());
  EXPECT_NEAR(rep.find("A1.invertibility")->value, std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(rep.find("A1.ellipticity")->value, 1.0, 1e-15);
}

TEST(ValidateAssumptions, SingularVolatilityLocated) {
  auto m = constant_model({0.0, 0.0}, identity2(), 0.0, CoefficientField::coordinate(0), coordinate_payoff(0));
  m.vol[0][0] = CoefficientField::coordinate(0, "s11");
  const auto rep = validate_assumptions(m, Box{{-1.0, -1.0}, {1.0, 1.0}}, 1024);
  const auto* row = rep.find("A1.invertibility");
  ASSERT_NE(row, nullptr);
  EXPECT_FALSE(row->passed);
  ASSERT_TRUE(row->witness.has_value());
  EXPECT_LT(std::abs(row->witness->x[0]), 0.05);
  EXPECT_FALSE(rep.passed());
}

TEST(ValidateAssumptions, NegativeRateFails) {
  auto m = constant_model({0.0, 0.0}, identity2(), -0.01, CoefficientField::coordinate(0), coordinate_payoff(0));
  const auto rep = validate_assumptions(m, Box{{-1.0, -1.0}, {1.0, 1.0}}, 64);
  EXPECT_FALSE(rep.find("A2.nonnegative_rate")->passed);
}

TEST(ValidateAssumptions, EllipticityOnRandomDirections) {
  const auto m = mixed_model();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0), ut(0.0, 1.0), ang(0.0, 6.283185307179586);
  const auto rep = validate_assumptions(m, Box{{-1.0, -1.0}, {1.0, 1.0}}, 2048);
  const double lmin_probe = rep.find("A1.ellipticity")->value;
  for (int n = 0; n < 200; ++n) {
    const Vec2 x{u(rng), u(rng)};
    const auto c = eval_coeffs(m, ut(rng), x);
    const double l = sym_eigenvalues(c.a)[0];
    EXPECT_GT(l, 0.0);
    for (int k = 0; k < 5; ++k) {
      const double th = ang(rng);
      const Vec2 y{std::cos(th), std::sin(th)};
      EXPECT_GE(dot(y, c.a * y), l * (1 - 1e-12));
    }
    // probe minimum is an upper estimate of the true minimum, not far above it
    EXPECT_GE(l, 0.5 * lmin_probe);
  }
}

TEST(Generator, ConstantsLinearAndQuadratic) {
  pde::SpaceTimeGrid g;
  g.box = Box{{-1.0, -1.0}, {1.0, 1.0}};
  g.n1 = 11;
  g.n2 = 9;
  g.n_t = 2;
  const double beta = 0.7;
  const auto m = constant_model({beta, 0.0}, identity2(), 0.0, CoefficientField::coordinate(0), coordinate_payoff(0));
  const auto one = pde::ValueField::sample(g, [](double, const Vec2&) { return 1.0; });
  const auto lin = pde::ValueField::sample(g, [](double, const Vec2& x) { return x[0]; });
  const auto m0 = constant_model({0.0, 0.0}, identity2(), 0.0, CoefficientField::coordinate(0), coordinate_payoff(0));
  const auto quad = pde::ValueField::sample(g, [](double, const Vec2& x) { return x[0] * x[0]; });
  const auto r1 = generator_apply(m, one, 0.5);
  const auto r2 = generator_apply(m, lin, 0.5);
  const auto r3 = generator_apply(m0, quad, 0.5);
  for (int i = 0; i < g.n1; ++i)
    for (int j = 0; j < g.n2; ++j) {
      EXPECT_NEAR(r1.at(0, i, j), 0.0, 1e-12);
      EXPECT_NEAR(r2.at(0, i, j), beta, 1e-12);
      EXPECT_NEAR(r3.at(0, i, j), 1.0, 1e-11);
    }
  EXPECT_THROW(generator_apply(m, one, 0.3), GridError);
}
