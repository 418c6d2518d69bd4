#pragma once

#include <functional>
#include <sstream>
#include <string>
#include <utility>

#include "mcomp/core/errors.hpp"
#include "mcomp/core/jet.hpp"

namespace mcomp::model {

/// Scalar coefficient of (t, x) with registered closed-form derivatives.
///
/// The field is backed by a jet function returning the value together with
/// its derivatives. `x_order` says how many x-derivatives are meaningful
/// (0..3); asking for more raises CapabilityError, as does asking for time
/// derivatives of a field registered without them.
class CoefficientField {
 public:
  using JetFn = std::function<Jet(double, const Vec2&)>;

  CoefficientField() : CoefficientField("zero", [](double, const Vec2&) { return Jet{}; }) {}

  CoefficientField(std::string name, JetFn fn, int x_order = 3, bool has_dt = true, bool has_dtdx = true)
      : name_(std::move(name)), fn_(std::move(fn)), x_order_(x_order), has_dt_(has_dt), has_dtdx_(has_dtdx) {}

  static CoefficientField constant(double c, std::string name = "const") {
    return CoefficientField(std::move(name), [c](double, const Vec2&) { return Jet::constant(c); });
  }

  /// The coordinate x_j.
  static CoefficientField coordinate(int j, std::string name = "") {
    if (name.empty()) name = "x" + std::to_string(j + 1);
    return CoefficientField(std::move(name), [j](double, const Vec2& x) { return Jet::coordinate(j, x[j]); });
  }

  const std::string& name() const { return name_; }
  int x_order() const { return x_order_; }
  bool has_dt() const { return has_dt_; }
  bool has_dtdx() const { return has_dtdx_; }

  /// Full jet; entries above the registered order are unspecified.
  Jet jet(double t, const Vec2& x) const { return fn_(t, x); }

  /// Jet restricted to the requested x-order, with availability checks.
  Jet jet_checked(double t, const Vec2& x, int x_order, bool need_dt = false, bool need_dtdx = false) const {
    require(x_order, need_dt, need_dtdx);
    return fn_(t, x);
  }

  double eval(double t, const Vec2& x) const { return fn_(t, x).v; }

  double d_dt(double t, const Vec2& x) const {
    require(0, true, false);
    return fn_(t, x).t;
  }

  double d_dx(int j, double t, const Vec2& x) const {
    require(1, false, false);
    return fn_(t, x).x[j];
  }

  double d2_dx(int j, int k, double t, const Vec2& x) const {
    require(2, false, false);
    return fn_(t, x).xx[j][k];
  }

  double d3_dx(int j, int k, int l, double t, const Vec2& x) const {
    require(3, false, false);
    return fn_(t, x).third(j, k, l);
  }

  double d2_dtdx(int j, double t, const Vec2& x) const {
    require(1, false, true);
    return fn_(t, x).tx[j];
  }

  void require(int x_order, bool need_dt, bool need_dtdx) const {
    if (x_order > x_order_) {
      std::ostringstream os;
      os << "coefficient '" << name_ << "' provides x-derivatives up to order " << x_order_ << ", order "
         << x_order << " requested";
      throw CapabilityError(os.str());
    }
    if (need_dt && !has_dt_) throw CapabilityError("coefficient '" + name_ + "' has no time derivative");
    if (need_dtdx && !has_dtdx_) throw CapabilityError("coefficient '" + name_ + "' has no mixed t-x derivative");
  }

 private:
  std::string name_;
  JetFn fn_;
  int x_order_;
  bool has_dt_;
  bool has_dtdx_;
};

}  // namespace mcomp::model
