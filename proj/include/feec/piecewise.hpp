#ifndef FEEC_PIECEWISE_HPP
#define FEEC_PIECEWISE_HPP

#include <functional>
#include <random>

#include "feec/quadrature.hpp"

namespace feec {

/// Element-indexed polynomial k-form with sparse support. Pieces live on
/// n-simplices; the field is implicitly zero on cells without a piece.
template <class S> struct PiecewiseForm {
  const SimplicialComplex* cx = nullptr;
  int k = 0;
  std::map<int, PolyForm<S>> piece;

  std::vector<int> support() const {
    std::vector<int> out;
    out.reserve(piece.size());
    for (const auto& [c, f] : piece) out.push_back(c);
    return out;
  }
  void prune() {
    for (auto it = piece.begin(); it != piece.end();) {
      it->second.prune();
      it = it->second.comp.empty() ? piece.erase(it) : std::next(it);
    }
  }
};

using PiecewiseFormD = PiecewiseForm<double>;
using PiecewiseFormQ = PiecewiseForm<Rational>;

template <class S> PiecewiseForm<S> pw_zero(const SimplicialComplex& cx, int k) {
  PiecewiseForm<S> f;
  f.cx = &cx;
  f.k = k;
  return f;
}

template <class S> PiecewiseForm<S> pw_add(const PiecewiseForm<S>& a, const PiecewiseForm<S>& b) {
  PiecewiseForm<S> r = a;
  for (const auto& [c, f] : b.piece) {
    auto it = r.piece.find(c);
    if (it == r.piece.end()) {
      r.piece[c] = f;
    } else {
      it->second = pf_add(it->second, f);
    }
  }
  r.prune();
  return r;
}

template <class S> PiecewiseForm<S> pw_scale(const PiecewiseForm<S>& a, const S& s) {
  PiecewiseForm<S> r = pw_zero<S>(*a.cx, a.k);
  if (ScalarOps<S>::is_zero(s)) return r;
  for (const auto& [c, f] : a.piece) r.piece[c] = pf_scale(f, s);
  return r;
}

template <class S> PiecewiseForm<S> pw_sub(const PiecewiseForm<S>& a, const PiecewiseForm<S>& b) {
  return pw_add(a, pw_scale(b, ScalarOps<S>::from_long(-1)));
}

/// Elementwise exterior derivative.
template <class S> PiecewiseForm<S> pw_d(const PiecewiseForm<S>& a) {
  PiecewiseForm<S> r = pw_zero<S>(*a.cx, a.k + 1);
  for (const auto& [c, f] : a.piece) {
    auto g = make_geom<S>(*a.cx, {a.cx->n(), c});
    r.piece[c] = exterior_derivative(g, f);
  }
  r.prune();
  return r;
}

/// Elementwise coderivative (distributionally valid only under the H-delta
/// conformity of the field; the checks below verify that separately).
template <class S> PiecewiseForm<S> pw_delta(const PiecewiseForm<S>& a) {
  PiecewiseForm<S> r = pw_zero<S>(*a.cx, a.k - 1);
  for (const auto& [c, f] : a.piece) {
    auto g = make_geom<S>(*a.cx, {a.cx->n(), c});
    r.piece[c] = coderivative(g, f);
  }
  r.prune();
  return r;
}

template <class S> PiecewiseForm<S> pw_star(const PiecewiseForm<S>& a) {
  PiecewiseForm<S> r = pw_zero<S>(*a.cx, a.cx->n() - a.k);
  for (const auto& [c, f] : a.piece) r.piece[c] = hodge_star(a.cx->n(), f);
  return r;
}

/// Product with a scalar piecewise field (bubble weights).
template <class S>
PiecewiseForm<S> pw_mult(const PiecewiseForm<S>& scalar, const PiecewiseForm<S>& u) {
  if (scalar.k != 0) throw Error("pw_mult: first factor must be a 0-form");
  PiecewiseForm<S> r = pw_zero<S>(*u.cx, u.k);
  for (const auto& [c, f] : u.piece) {
    auto it = scalar.piece.find(c);
    if (it == scalar.piece.end()) continue;
    const Poly<S>& s0 = it->second.comp.count(0u) ? it->second.comp.at(0u) : Poly<S>();
    PolyForm<S> prod = pf_zero<S>(f.carrier, f.k);
    for (const auto& [m, p] : f.comp) prod.comp[m] = p * s0;
    r.piece[c] = prod;
  }
  r.prune();
  return r;
}

// ---------------------------------------------------------------------------
// Whitney forms and bubbles
// ---------------------------------------------------------------------------

/// Global Whitney form of sigma, supported on st(sigma).
template <class S>
PiecewiseForm<S> whitney_form(const SimplicialComplex& cx, SimplexRef sigma) {
  PiecewiseForm<S> w = pw_zero<S>(cx, sigma.dim);
  for (int c : cx.star_cells(sigma)) {
    SimplexRef cell{cx.n(), c};
    auto g = make_geom<S>(cx, cell);
    w.piece[c] = whitney_on(g, cell, cx.vertex_positions_in(sigma, cell));
  }
  return w;
}

/// Bubble supported on an explicit cell list: sum over the cells of the
/// product of all barycentric hats of that cell.
template <class S>
PiecewiseForm<S> bubble_from_cells(const SimplicialComplex& cx, const std::vector<int>& cells) {
  PiecewiseForm<S> b = pw_zero<S>(cx, 0);
  for (int c : cells) {
    Expo e = 0;
    for (int a = 0; a <= cx.n(); ++a) e = expo_set(e, a, 1);
    Poly<S> p;
    p.terms.push_back({e, ScalarOps<S>::one()});
    PolyForm<S> f = pf_zero<S>({cx.n(), c}, 0);
    f.comp[0u] = p;
    b.piece[c] = f;
  }
  return b;
}

enum class BubbleKind { Cell, Star, ExtendedStar };

template <class S>
PiecewiseForm<S> bubble(const SimplicialComplex& cx, BubbleKind kind, SimplexRef s) {
  switch (kind) {
    case BubbleKind::Cell:
      if (s.dim != cx.n()) throw Error("bubble: cell bubble needs an n-simplex");
      return bubble_from_cells<S>(cx, {s.idx});
    case BubbleKind::Star:
      return bubble_from_cells<S>(cx, cx.star_cells(s));
    case BubbleKind::ExtendedStar:
    default:
      return bubble_from_cells<S>(cx, cx.extended_star_cells(s));
  }
}

// ---------------------------------------------------------------------------
// Integrals and norms
// ---------------------------------------------------------------------------

double pw_l2_inner(const PiecewiseFormD& a, const PiecewiseFormD& b, int rule_degree = -1);
double pw_l2_inner_on(const PiecewiseFormD& a, const PiecewiseFormD& b,
                      const std::vector<int>& cells, int rule_degree = -1);
double pw_l2_norm(const PiecewiseFormD& a, int rule_degree = -1);
double pw_l2_norm_on(const PiecewiseFormD& a, const std::vector<int>& cells, int rule_degree = -1);

/// Exact rational L2 inner product (moment identity per cell).
Rational pw_l2_inner_exact(const PiecewiseFormQ& a, const PiecewiseFormQ& b);

/// Largest canonical coefficient over all pieces (crude magnitude for scaled
/// comparisons).
template <class S> double pw_max_canonical(const PiecewiseForm<S>& a) {
  double best = 0.0;
  for (const auto& [c, f] : a.piece) {
    auto g = make_geom<S>(*a.cx, {a.cx->n(), c});
    best = std::max(best, form_max_canonical(g, f));
  }
  return best;
}

// ---------------------------------------------------------------------------
// Conformity checks
// ---------------------------------------------------------------------------

struct ConformityReport {
  double max_facet_jump = 0.0;     // tangential-trace jumps across interior facets
  double max_boundary_trace = 0.0; // trace on facets with support on one side only
  double scale = 0.0;              // magnitude reference of the field itself
};

/// Tangential-trace continuity of the field across the facets of its support
/// (H-Lambda conformity when jumps vanish).
template <class S> ConformityReport hlambda_conformity(const PiecewiseForm<S>& w) {
  const auto& cx = *w.cx;
  ConformityReport rep;
  rep.scale = pw_max_canonical(w);
  std::map<int, std::vector<int>> facet_cells;
  for (const auto& [c, f] : w.piece) {
    for (const auto& [fi, sgn] : cx.faces(cx.n(), c)) {
      (void)sgn;
      facet_cells[fi].push_back(c);
    }
  }
  for (const auto& [fi, cells] : facet_cells) {
    SimplexRef face{cx.n() - 1, fi};
    if (w.k > face.dim) continue;
    auto gf = make_geom<S>(cx, face);
    if (cells.size() == 2) {
      auto t0 = trace_to_face(cx, w.piece.at(cells[0]), face);
      auto t1 = trace_to_face(cx, w.piece.at(cells[1]), face);
      rep.max_facet_jump = std::max(rep.max_facet_jump, form_difference_canonical(gf, t0, t1));
    } else if (cells.size() == 1) {
      bool shared = cx.cofaces(cx.n() - 1, fi).size() > 1; // facet interior to the mesh
      auto t0 = trace_to_face(cx, w.piece.at(cells[0]), face);
      double mag = form_max_canonical(gf, t0);
      if (shared) {
        rep.max_facet_jump = std::max(rep.max_facet_jump, mag);
      } else {
        rep.max_boundary_trace = std::max(rep.max_boundary_trace, mag);
      }
    }
  }
  return rep;
}

/// Star-trace continuity (H-delta) including the vanishing star trace on the
/// boundary of the support patch: applies the Hodge star and checks all
/// facets of the support, one-sided facets included.
template <class S> ConformityReport hdelta_conformity(const PiecewiseForm<S>& w) {
  const auto& cx = *w.cx;
  PiecewiseForm<S> sw = pw_star(w);
  ConformityReport rep;
  rep.scale = pw_max_canonical(sw);
  std::map<int, std::vector<int>> facet_cells;
  for (const auto& [c, f] : sw.piece) {
    for (const auto& [fi, sgn] : cx.faces(cx.n(), c)) {
      (void)sgn;
      facet_cells[fi].push_back(c);
    }
  }
  for (const auto& [fi, cells] : facet_cells) {
    SimplexRef face{cx.n() - 1, fi};
    if (sw.k > face.dim) continue; // top-degree star-trace is vacuous
    auto gf = make_geom<S>(cx, face);
    if (cells.size() == 2) {
      auto t0 = trace_to_face(cx, sw.piece.at(cells[0]), face);
      auto t1 = trace_to_face(cx, sw.piece.at(cells[1]), face);
      rep.max_facet_jump = std::max(rep.max_facet_jump, form_difference_canonical(gf, t0, t1));
    } else if (cells.size() == 1) {
      auto t0 = trace_to_face(cx, sw.piece.at(cells[0]), face);
      rep.max_boundary_trace =
          std::max(rep.max_boundary_trace, form_max_canonical(gf, t0));
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Global polynomial fields (smooth inputs for the commutation tests)
// ---------------------------------------------------------------------------

/// Ambient monomial x^beta as a barycentric polynomial on one cell.
template <class S>
Poly<S> ambient_monomial(const SimplicialComplex& cx, int cell, const std::vector<int>& beta) {
  auto g = make_geom<S>(cx, {cx.n(), cell});
  Poly<S> acc = Poly<S>::constant(ScalarOps<S>::one());
  for (int i = 0; i < cx.n(); ++i) {
    Poly<S> xi;
    for (int a = 0; a <= cx.n(); ++a) xi.terms.push_back({expo_unit(a), g.V.at(i, a)});
    xi.normalize();
    for (int p = 0; p < beta[i]; ++p) acc = acc * xi;
  }
  return acc;
}

/// Random global polynomial k-form of total degree <= deg (same polynomial on
/// every cell, hence smooth): conforming member of H-Lambda.
PiecewiseFormD random_global_poly_form(const SimplicialComplex& cx, int k, int deg,
                                       std::mt19937_64& rng);

/// Random piecewise polynomial form (no interelement continuity): a genuinely
/// rough L2 input.
PiecewiseFormD random_broken_form(const SimplicialComplex& cx, int k, int deg,
                                  std::mt19937_64& rng);

} // namespace feec

#endif
