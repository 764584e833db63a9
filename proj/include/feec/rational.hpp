#ifndef FEEC_RATIONAL_HPP
#define FEEC_RATIONAL_HPP

#include <gmpxx.h>

#include <cmath>
#include <cstdint>
#include <string>

namespace feec {

/// Exact scalar for the rational-mode checks. mpq_class construction from a
/// double is exact (every finite double is a dyadic rational), so meshes whose
/// coordinates are stored as doubles convert without loss.
using Rational = mpq_class;

template <class S> struct ScalarOps;

template <> struct ScalarOps<double> {
  static double zero() { return 0.0; }
  static double one() { return 1.0; }
  static bool is_zero(double x) { return x == 0.0; }
  static double abs(double x) { return std::fabs(x); }
  static double to_double(double x) { return x; }
  static double from_long(long v) { return static_cast<double>(v); }
  static double from_coord(double v) { return v; }
};

template <> struct ScalarOps<Rational> {
  static Rational zero() { return Rational(0); }
  static Rational one() { return Rational(1); }
  static bool is_zero(const Rational& x) { return sgn(x) == 0; }
  static Rational abs(const Rational& x) { return ::abs(x); }
  static double to_double(const Rational& x) { return x.get_d(); }
  static Rational from_long(long v) { return Rational(v); }
  static Rational from_coord(double v) {
    Rational q(v); // exact
    q.canonicalize();
    return q;
  }
};

} // namespace feec

#endif
