#ifndef FEEC_QUADRATURE_HPP
#define FEEC_QUADRATURE_HPP

#include <memory>
#include <vector>

#include "feec/polyform.hpp"

namespace feec {

struct QuadPoint {
  std::vector<double> lambda; // barycentric, size d+1
  double w;                   // reference weight; reference weights sum to 1/d!
};

/// Conical-product rule on the reference d-simplex, exact for polynomials of
/// total degree <= q. Every generated rule is audited against the factorial
/// moment identity before use.
struct QuadratureRule {
  int dim = 0;
  int degree = 0;
  std::vector<QuadPoint> points;
};

/// Cached rule lookup (thread safe).
const QuadratureRule& rule_for(int dim, int degree);

/// Integral of a scalar barycentric polynomial over a physical simplex via a
/// rule (degree q must cover the polynomial degree; throws otherwise unless
/// `exact_mode` is requested, which uses the moment identity instead).
double integrate(const SimplicialComplex& cx, SimplexRef s, const PolyD& p, int rule_degree,
                 bool exact_mode = false);

/// Integral of a top-intrinsic-degree polynomial form over its carrier
/// (de Rham pairing); exact via moments.
double integrate(const SimplicialComplex& cx, const PolyFormD& u);

/// L2 inner product of two same-degree polynomial k-forms on one simplex,
/// quadrature path (exact when the rule covers the product degree).
double l2_inner_on(const SimplicialComplex& cx, SimplexRef s, const PolyFormD& u,
                   const PolyFormD& v, int rule_degree);

/// Callback integration over one cell: f(lambda) -> value, fixed degree.
double integrate_callback(const SimplicialComplex& cx, int cell,
                          const std::function<double(const std::vector<double>&)>& f,
                          int rule_degree);

} // namespace feec

#endif
