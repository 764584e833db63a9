#ifndef FEEC_POLYFORM_HPP
#define FEEC_POLYFORM_HPP

#include <map>
#include <optional>

#include "feec/complex.hpp"
#include "feec/poly.hpp"

namespace feec {

// ---------------------------------------------------------------------------
// Alternating-basis index masks over the ambient axes
// ---------------------------------------------------------------------------

using Mask = unsigned;

inline int mask_size(Mask m) { return __builtin_popcount(m); }

/// Increasing index tuples of size k out of {0..n-1}, ascending as masks.
std::vector<Mask> masks_of(int n, int k);

/// Sign of dx_a wedge dx_b relative to dx_{a|b}; 0 if the masks intersect.
int wedge_sign(Mask a, Mask b);

/// Position-based contraction sign: (-1)^t for the t-th set bit.
int removal_sign(Mask m, int axis);

// ---------------------------------------------------------------------------
// Per-simplex chart
// ---------------------------------------------------------------------------

/// Affine chart data of one simplex: vertex matrix, edge matrix B, tangential
/// barycentric gradients and the tangential projector. Exact when S is
/// Rational (vertex doubles convert exactly).
template <class S> struct Geom {
  int n = 0, dim = 0;
  SmallMat<S> V;    // n x (dim+1)
  SmallMat<S> B;    // n x dim, columns v_i - v_0 in ascending vertex order
  SmallMat<S> grad; // (dim+1) x n rows: tangential gradients of the barycentrics
  SmallMat<S> proj; // n x n tangential projector
  S gram_det = ScalarOps<S>::zero(); // det(B^T B)
  std::vector<S> barycenter;

  /// det of the dim x dim submatrix of B with rows selected by `rows`.
  S edge_minor(Mask rows) const {
    SmallMat<S> M(dim, dim);
    int r = 0;
    for (int i = 0; i < n; ++i) {
      if (!(rows & (1u << i))) continue;
      for (int j = 0; j < dim; ++j) M.at(r, j) = B.at(i, j);
      ++r;
    }
    return M.determinant();
  }
  /// det of the projector submatrix with rows J, columns I (|I| = |J| = k).
  S proj_minor(Mask J, Mask I) const {
    int k = mask_size(I);
    SmallMat<S> M(k, k);
    int r = 0;
    for (int i = 0; i < n; ++i) {
      if (!(J & (1u << i))) continue;
      int c = 0;
      for (int j = 0; j < n; ++j) {
        if (!(I & (1u << j))) continue;
        M.at(r, c) = proj.at(i, j);
        ++c;
      }
      ++r;
    }
    if (k == 0) return ScalarOps<S>::one();
    return M.determinant();
  }
};

template <class S> Geom<S> make_geom(const SimplicialComplex& cx, SimplexRef s) {
  Geom<S> g;
  g.n = cx.n();
  g.dim = s.dim;
  const auto& verts = cx.simplex(s).v;
  g.V = SmallMat<S>(g.n, g.dim + 1);
  for (int j = 0; j <= g.dim; ++j) {
    for (int i = 0; i < g.n; ++i) g.V.at(i, j) = ScalarOps<S>::from_coord(cx.vertex_coords()(i, verts[j]));
  }
  g.B = SmallMat<S>(g.n, g.dim);
  for (int j = 0; j < g.dim; ++j) {
    for (int i = 0; i < g.n; ++i) g.B.at(i, j) = g.V.at(i, j + 1) - g.V.at(i, 0);
  }
  g.grad = SmallMat<S>(g.dim + 1, g.n);
  g.proj = SmallMat<S>(g.n, g.n);
  if (g.dim > 0) {
    SmallMat<S> Bt = g.B.transposed();
    SmallMat<S> G = Bt * g.B;
    g.gram_det = G.determinant();
    SmallMat<S> Y = G.solve(Bt); // dim x n
    for (int a = 1; a <= g.dim; ++a) {
      for (int i = 0; i < g.n; ++i) {
        g.grad.at(a, i) = Y.at(a - 1, i);
        g.grad.at(0, i) = g.grad.at(0, i) - Y.at(a - 1, i);
      }
    }
    g.proj = g.B * Y;
  } else {
    g.gram_det = ScalarOps<S>::one();
  }
  g.barycenter.assign(g.n, ScalarOps<S>::zero());
  S inv = ScalarOps<S>::one() / ScalarOps<S>::from_long(g.dim + 1);
  for (int i = 0; i < g.n; ++i) {
    for (int j = 0; j <= g.dim; ++j) g.barycenter[i] += g.V.at(i, j) * inv;
  }
  return g;
}

// ---------------------------------------------------------------------------
// Polynomial differential forms
// ---------------------------------------------------------------------------

/// Polynomial k-form on one simplex: ambient alternating frame dx_I with
/// coefficients that are polynomials in the carrier's barycentric coordinates.
template <class S> struct PolyForm {
  SimplexRef carrier;
  int k = 0;
  std::map<Mask, Poly<S>> comp;

  bool empty() const {
    for (const auto& [m, p] : comp) {
      if (!p.empty()) return false;
    }
    return true;
  }
  int poly_degree() const {
    int d = 0;
    for (const auto& [m, p] : comp) d = std::max(d, p.degree());
    return d;
  }
  void prune() {
    for (auto it = comp.begin(); it != comp.end();) {
      it = it->second.empty() ? comp.erase(it) : std::next(it);
    }
  }
  PolyForm& add_term(Mask m, const Poly<S>& p) {
    auto it = comp.find(m);
    if (it == comp.end()) {
      if (!p.empty()) comp[m] = p;
    } else {
      it->second = it->second + p;
      if (it->second.empty()) comp.erase(it);
    }
    return *this;
  }
};

using PolyFormD = PolyForm<double>;
using PolyFormQ = PolyForm<Rational>;

template <class S> PolyForm<S> pf_zero(SimplexRef carrier, int k) {
  PolyForm<S> f;
  f.carrier = carrier;
  f.k = k;
  return f;
}

template <class S> PolyForm<S> pf_add(const PolyForm<S>& a, const PolyForm<S>& b) {
  PolyForm<S> r = a;
  for (const auto& [m, p] : b.comp) r.add_term(m, p);
  return r;
}

template <class S> PolyForm<S> pf_scale(const PolyForm<S>& a, const S& c) {
  PolyForm<S> r = pf_zero<S>(a.carrier, a.k);
  if (ScalarOps<S>::is_zero(c)) return r;
  for (const auto& [m, p] : a.comp) r.comp[m] = p.scaled(c);
  return r;
}

template <class S> PolyForm<S> pf_sub(const PolyForm<S>& a, const PolyForm<S>& b) {
  return pf_add(a, pf_scale(b, ScalarOps<S>::from_long(-1)));
}

/// lambda_a as a 0-form on `carrier`.
template <class S> PolyForm<S> hat_form(SimplexRef carrier, int a) {
  PolyForm<S> f = pf_zero<S>(carrier, 0);
  f.comp[0u] = Poly<S>::hat(a);
  return f;
}

/// d(lambda_a): constant 1-form with the tangential gradient as coefficients.
template <class S> PolyForm<S> dlambda_form(const Geom<S>& g, SimplexRef carrier, int a) {
  PolyForm<S> f = pf_zero<S>(carrier, 1);
  for (int i = 0; i < g.n; ++i) {
    if (!ScalarOps<S>::is_zero(g.grad.at(a, i))) {
      f.comp[1u << i] = Poly<S>::constant(g.grad.at(a, i));
    }
  }
  return f;
}

template <class S> PolyForm<S> wedge(int n, const PolyForm<S>& a, const PolyForm<S>& b) {
  if (a.k + b.k > n) throw Error("wedge: degree overflow");
  PolyForm<S> r = pf_zero<S>(a.carrier, a.k + b.k);
  for (const auto& [ma, pa] : a.comp) {
    for (const auto& [mb, pb] : b.comp) {
      int s = wedge_sign(ma, mb);
      if (s == 0) continue;
      Poly<S> prod = pa * pb;
      if (s < 0) prod = prod.scaled(ScalarOps<S>::from_long(-1));
      r.add_term(ma | mb, prod);
    }
  }
  return r;
}

/// Exterior derivative (intrinsic to the carrier; for carriers of lower
/// dimension the tangential barycentric gradients make the result a valid
/// ambient representative of the intrinsic derivative).
template <class S> PolyForm<S> exterior_derivative(const Geom<S>& g, const PolyForm<S>& u) {
  PolyForm<S> r = pf_zero<S>(u.carrier, u.k + 1);
  for (const auto& [m, p] : u.comp) {
    for (int a = 0; a <= g.dim; ++a) {
      Poly<S> dp = p.derivative(a);
      if (dp.empty()) continue;
      for (int i = 0; i < g.n; ++i) {
        const S& gi = g.grad.at(a, i);
        if (ScalarOps<S>::is_zero(gi)) continue;
        int s = wedge_sign(1u << i, m);
        if (s == 0) continue;
        Poly<S> t = dp.scaled(s > 0 ? gi : -gi);
        r.add_term((1u << i) | m, t);
      }
    }
  }
  return r;
}

/// Koszul contraction with the field x - base (base defaults to the carrier
/// barycenter).
template <class S>
PolyForm<S> koszul(const Geom<S>& g, const PolyForm<S>& u,
                   const std::vector<S>* base_point = nullptr) {
  if (u.k < 1) throw Error("koszul: degree must be >= 1");
  std::vector<S> base = base_point ? *base_point : g.barycenter;
  // ambient coordinate i as barycentric-affine polynomial
  std::vector<Poly<S>> X(g.n);
  for (int i = 0; i < g.n; ++i) {
    Poly<S> xi;
    for (int a = 0; a <= g.dim; ++a) {
      xi.terms.push_back({expo_unit(a), g.V.at(i, a) - base[i]});
    }
    xi.normalize();
    X[i] = xi;
  }
  PolyForm<S> r = pf_zero<S>(u.carrier, u.k - 1);
  for (const auto& [m, p] : u.comp) {
    for (int i = 0; i < g.n; ++i) {
      if (!(m & (1u << i))) continue;
      int s = removal_sign(m, i);
      Poly<S> t = (p * X[i]).scaled(ScalarOps<S>::from_long(s));
      r.add_term(m & ~(1u << i), t);
    }
  }
  return r;
}

/// Euclidean Hodge star; the carrier must be an n-simplex.
template <class S> PolyForm<S> hodge_star(int n, const PolyForm<S>& u) {
  PolyForm<S> r = pf_zero<S>(u.carrier, n - u.k);
  const Mask full = (1u << n) - 1u;
  for (const auto& [m, p] : u.comp) {
    Mask c = full & ~m;
    int s = wedge_sign(m, c);
    r.add_term(c, s < 0 ? p.scaled(ScalarOps<S>::from_long(-1)) : p);
  }
  return r;
}

template <class S> PolyForm<S> hodge_star_inverse(int n, const PolyForm<S>& u) {
  // on Lambda^j, star^{-1} = (-1)^{j(n-j)} star
  PolyForm<S> r = hodge_star(n, u);
  if (((n - u.k) * u.k) % 2 != 0) r = pf_scale(r, ScalarOps<S>::from_long(-1));
  return r;
}

/// delta_k = (-1)^k star^{-1} d star; carrier must be an n-simplex.
template <class S> PolyForm<S> coderivative(const Geom<S>& g, const PolyForm<S>& u) {
  if (u.k < 1) throw Error("coderivative: degree must be >= 1");
  PolyForm<S> su = hodge_star(g.n, u);
  PolyForm<S> dsu = exterior_derivative(g, su);
  PolyForm<S> r = hodge_star_inverse(g.n, dsu);
  if (u.k % 2 != 0) r = pf_scale(r, ScalarOps<S>::from_long(-1));
  return r;
}

/// Pullback under the inclusion of a face: barycentric substitution; the
/// ambient frame coefficients stay (the result is a representative of the
/// intrinsic trace; pair or compare through the face's projector).
template <class S>
PolyForm<S> trace_to_face(const SimplicialComplex& cx, const PolyForm<S>& u, SimplexRef face) {
  if (face.dim < u.k) {
    return pf_zero<S>(face, u.k);
  }
  auto pos = cx.vertex_positions_in(face, u.carrier);
  std::vector<int> map(static_cast<std::size_t>(u.carrier.dim) + 1, -1);
  for (std::size_t i = 0; i < pos.size(); ++i) map[pos[i]] = static_cast<int>(i);
  PolyForm<S> r = pf_zero<S>(face, u.k);
  for (const auto& [m, p] : u.comp) {
    Poly<S> q = p.substitute(map);
    if (!q.empty()) r.add_term(m, q);
  }
  return r;
}

/// Canonical tangential representative on the carrier (idempotent).
template <class S> PolyForm<S> tangential_part(const Geom<S>& g, const PolyForm<S>& u) {
  PolyForm<S> r = pf_zero<S>(u.carrier, u.k);
  if (g.dim == g.n) return u;
  auto masks = masks_of(g.n, u.k);
  for (Mask J : masks) {
    Poly<S> acc;
    for (const auto& [I, p] : u.comp) {
      S w = g.proj_minor(J, I);
      if (ScalarOps<S>::is_zero(w)) continue;
      acc = acc + p.scaled(w);
    }
    if (!acc.empty()) r.comp[J] = acc;
  }
  return r;
}

/// Coefficient array aligned with masks_of(n, k) at one barycentric point.
template <class S>
std::vector<S> eval_form(const PolyForm<S>& u, int n, const std::vector<S>& lambda) {
  auto masks = masks_of(n, u.k);
  std::vector<S> out(masks.size(), ScalarOps<S>::zero());
  for (std::size_t i = 0; i < masks.size(); ++i) {
    auto it = u.comp.find(masks[i]);
    if (it != u.comp.end()) out[i] = it->second.eval(lambda);
  }
  return out;
}

/// alpha! / (|alpha| + d)! as the exact reference-simplex moment of lambda^alpha.
template <class S> S ref_moment(Expo e, int d) {
  // 1/moment = multinomial(|a|; a) * prod_{j=1..d} (|a|+j)
  long total = expo_degree(e);
  S denom = ScalarOps<S>::one();
  long run = 0;
  for (int a = 0; a < 6; ++a) {
    int p = expo_get(e, a);
    for (int i = 1; i <= p; ++i) {
      ++run;
      denom = denom * (ScalarOps<S>::from_long(run) / ScalarOps<S>::from_long(i));
    }
  }
  (void)total;
  for (int j = 1; j <= d; ++j) denom = denom * ScalarOps<S>::from_long(run + j);
  return ScalarOps<S>::one() / denom;
}

template <class S> S integrate_poly_reference(const Poly<S>& p, int d) {
  S acc = ScalarOps<S>::zero();
  for (const auto& [e, c] : p.terms) acc += c * ref_moment<S>(e, d);
  return acc;
}

/// Integral of a top-intrinsic-degree form over its carrier (the de Rham map
/// integrand): exact, orientation induced by the sorted vertex order.
template <class S> S integrate_over_carrier(const Geom<S>& g, const PolyForm<S>& u) {
  if (u.k != g.dim) throw Error("integrate_over_carrier: degree must equal carrier dimension");
  S acc = ScalarOps<S>::zero();
  for (const auto& [m, p] : u.comp) {
    S dj = g.edge_minor(m);
    if (ScalarOps<S>::is_zero(dj)) continue;
    acc += dj * integrate_poly_reference(p, g.dim);
  }
  return acc;
}

/// Exact L2 inner product of two k-forms on the same carrier via factorial
/// moments. For lower-dimensional carriers this is float-path only (the
/// measure is a square root); rational instantiation requires dim == n.
template <class S>
S l2_inner_exact(const SimplicialComplex& cx, const Geom<S>& g, const PolyForm<S>& u,
                 const PolyForm<S>& v) {
  if (u.k != v.k) throw Error("l2_inner_exact: mismatched degrees");
  S scale;
  if (g.dim == g.n) {
    scale = ScalarOps<S>::abs(g.B.determinant());
  } else {
    if constexpr (!std::is_same_v<S, double>) {
      throw Error("l2_inner_exact: exact mode needs a full-dimensional carrier");
    } else {
      scale = cx.measure(u.carrier);
      for (int j = 2; j <= g.dim; ++j) scale *= j;
    }
  }
  S acc = ScalarOps<S>::zero();
  const bool full = (g.dim == g.n);
  for (const auto& [mi, pi] : u.comp) {
    for (const auto& [mj, pj] : v.comp) {
      S w = full ? (mi == mj ? ScalarOps<S>::one() : ScalarOps<S>::zero()) : g.proj_minor(mi, mj);
      if (ScalarOps<S>::is_zero(w)) continue;
      acc += w * integrate_poly_reference(pi * pj, g.dim) * scale;
    }
  }
  return acc;
}

/// Whitney form of the subsimplex sitting at `positions` inside `carrier`.
template <class S>
PolyForm<S> whitney_on(const Geom<S>& g, SimplexRef carrier, const std::vector<int>& positions) {
  const int k = static_cast<int>(positions.size()) - 1;
  PolyForm<S> acc = pf_zero<S>(carrier, k);
  for (int j = 0; j <= k; ++j) {
    PolyForm<S> term = hat_form<S>(carrier, positions[j]);
    for (int t = 0; t <= k; ++t) {
      if (t == j) continue;
      term = wedge(g.n, term, dlambda_form(g, carrier, positions[t]));
    }
    if (j % 2 != 0) term = pf_scale(term, ScalarOps<S>::from_long(-1));
    acc = pf_add(acc, term);
  }
  S kfact = ScalarOps<S>::one();
  for (int j = 2; j <= k; ++j) kfact = kfact * ScalarOps<S>::from_long(j);
  return pf_scale(acc, kfact);
}

/// Intrinsic volume form of the carrier, unit pointwise norm, oriented by the
/// sorted vertex order; integral over the carrier equals its measure.
PolyFormD vol_form(const SimplicialComplex& cx, SimplexRef carrier);

/// Largest canonical coefficient of the tangential homogenized representative
/// (exact zero test in rational mode, scaled comparisons in float mode).
template <class S> double form_max_canonical(const Geom<S>& g, const PolyForm<S>& u) {
  PolyForm<S> t = tangential_part(g, u);
  double best = 0.0;
  int deg = t.poly_degree();
  for (const auto& [m, p] : t.comp) {
    Poly<S> h = p.homogenized(deg, g.dim + 1);
    for (const auto& [e, c] : h.terms) {
      best = std::max(best, std::abs(ScalarOps<S>::to_double(c)));
    }
  }
  return best;
}

template <class S>
double form_difference_canonical(const Geom<S>& g, const PolyForm<S>& a, const PolyForm<S>& b) {
  return form_max_canonical(g, pf_sub(a, b));
}

} // namespace feec

#endif
