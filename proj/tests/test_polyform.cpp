#include <doctest.h>

#include <random>

#include "feec/meshgen.hpp"
#include "feec/piecewise.hpp"

using namespace feec;

namespace {

std::shared_ptr<SimplicialComplex> tri_mesh() { return build_complex(structured_mesh(2, 1)); }
std::shared_ptr<SimplicialComplex> tet_mesh() { return build_complex(structured_mesh(3, 1)); }

template <class S> Poly<S> random_poly(int nvars, int deg, std::mt19937_64& rng) {
  std::uniform_int_distribution<long> pick(-4, 4);
  Poly<S> p;
  std::function<void(Expo, int, int)> gen = [&](Expo e, int var, int left) {
    if (var == nvars - 1) {
      p.terms.push_back({expo_set(e, var, left), ScalarOps<S>::from_long(pick(rng))});
      return;
    }
    for (int q = 0; q <= left; ++q) gen(expo_set(e, var, q), var + 1, left - q);
  };
  gen(0u, 0, deg);
  p.normalize();
  return p;
}

template <class S>
PolyForm<S> random_form(const SimplicialComplex& cx, SimplexRef carrier, int k, int deg,
                        std::mt19937_64& rng) {
  PolyForm<S> f = pf_zero<S>(carrier, k);
  for (Mask m : masks_of(cx.n(), k)) f.comp[m] = random_poly<S>(carrier.dim + 1, deg, rng);
  f.prune();
  return f;
}

} // namespace

TEST_CASE("exterior derivative of a hat is its constant gradient form") {
  auto cx = tri_mesh();
  SimplexRef T{2, 0};
  auto g = make_geom<double>(*cx, T);
  auto dl0 = exterior_derivative(g, hat_form<double>(T, 0));
  CHECK(form_difference_canonical(g, dl0, dlambda_form(g, T, 0)) == doctest::Approx(0.0));
}

TEST_CASE("d(x dy) = dx wedge dy") {
  auto cx = tri_mesh();
  SimplexRef T{2, 0};
  auto g = make_geom<double>(*cx, T);
  PolyFormD u = pf_zero<double>(T, 1);
  u.comp[2u] = ambient_monomial<double>(*cx, 0, {1, 0}); // x * dy
  auto du = exterior_derivative(g, u);
  PolyFormD want = pf_zero<double>(T, 2);
  want.comp[3u] = PolyD::constant(1.0);
  CHECK(form_difference_canonical(g, du, want) == doctest::Approx(0.0));
}

TEST_CASE("d of d vanishes exactly in rational arithmetic") {
  auto cx = tet_mesh();
  std::mt19937_64 rng(11);
  SimplexRef T{3, 2};
  auto g = make_geom<Rational>(*cx, T);
  for (int k = 0; k <= 1; ++k) {
    auto u = random_form<Rational>(*cx, T, k, 3, rng);
    auto ddu = exterior_derivative(g, exterior_derivative(g, u));
    CHECK(form_max_canonical(g, ddu) == 0.0);
  }
}

TEST_CASE("koszul against explicit contractions, and kk = 0") {
  auto cx = tri_mesh();
  SimplexRef T{2, 0};
  auto g = make_geom<double>(*cx, T);
  std::vector<double> origin{0.0, 0.0};

  PolyFormD dx = pf_zero<double>(T, 1);
  dx.comp[1u] = PolyD::constant(1.0);
  auto kdx = koszul(g, dx, &origin);
  PolyFormD want_x = pf_zero<double>(T, 0);
  want_x.comp[0u] = ambient_monomial<double>(*cx, 0, {1, 0});
  CHECK(form_difference_canonical(g, kdx, want_x) == doctest::Approx(0.0));

  PolyFormD area = pf_zero<double>(T, 2);
  area.comp[3u] = PolyD::constant(1.0);
  auto karea = koszul(g, area, &origin);
  PolyFormD want = pf_zero<double>(T, 1);
  want.comp[2u] = ambient_monomial<double>(*cx, 0, {1, 0});            // x dy
  want.comp[1u] = ambient_monomial<double>(*cx, 0, {0, 1}).scaled(-1); // - y dx
  CHECK(form_difference_canonical(g, karea, want) == doctest::Approx(0.0));

  std::mt19937_64 rng(5);
  auto u = random_form<double>(*cx, T, 2, 3, rng);
  auto kku = koszul(g, koszul(g, u));
  CHECK(form_max_canonical(g, kku) < 1e-12);
}

TEST_CASE("hodge star orientation conventions") {
  auto cx2 = tri_mesh();
  SimplexRef T{2, 0};
  auto g2 = make_geom<double>(*cx2, T);
  PolyFormD dx = pf_zero<double>(T, 1), dy = pf_zero<double>(T, 1);
  dx.comp[1u] = PolyD::constant(1.0);
  dy.comp[2u] = PolyD::constant(1.0);
  auto sdx = hodge_star(2, dx);
  auto sdy = hodge_star(2, dy);
  CHECK(form_difference_canonical(g2, sdx, dy) == doctest::Approx(0.0));
  CHECK(form_difference_canonical(g2, sdy, pf_scale(dx, -1.0)) == doctest::Approx(0.0));

  auto cx3 = tet_mesh();
  SimplexRef K{3, 0};
  auto g3 = make_geom<double>(*cx3, K);
  PolyFormD dxdy = pf_zero<double>(K, 2);
  dxdy.comp[3u] = PolyD::constant(1.0);
  PolyFormD dz = pf_zero<double>(K, 1);
  dz.comp[4u] = PolyD::constant(1.0);
  CHECK(form_difference_canonical(g3, hodge_star(3, dxdy), dz) == doctest::Approx(0.0));

  std::mt19937_64 rng(17);
  for (int k = 0; k <= 3; ++k) {
    auto u = random_form<double>(*cx3, K, k, 2, rng);
    auto ssu = hodge_star(3, hodge_star(3, u));
    double sign = ((k * (3 - k)) % 2 == 0) ? 1.0 : -1.0;
    CHECK(form_difference_canonical(g3, ssu, pf_scale(u, sign)) < 1e-12);
    auto back = hodge_star_inverse(3, hodge_star(3, u));
    CHECK(form_difference_canonical(g3, back, u) < 1e-12);
  }
}

TEST_CASE("coderivative: delta(x dx) = -1 against the divergence oracle") {
  auto cx = tri_mesh();
  SimplexRef T{2, 0};
  auto g = make_geom<double>(*cx, T);
  PolyFormD u = pf_zero<double>(T, 1);
  u.comp[1u] = ambient_monomial<double>(*cx, 0, {1, 0}); // x dx
  auto du = coderivative(g, u);
  PolyFormD want = pf_zero<double>(T, 0);
  want.comp[0u] = PolyD::constant(-1.0);
  CHECK(form_difference_canonical(g, du, want) == doctest::Approx(0.0));

  // independent oracle on random 1-forms: delta u = -div(u)
  std::mt19937_64 rng(23);
  auto v = random_form<double>(*cx, T, 1, 3, rng);
  auto dv = coderivative(g, v);
  PolyFormD div = pf_zero<double>(T, 0);
  PolyD acc;
  for (int axis = 0; axis < 2; ++axis) {
    auto it = v.comp.find(1u << axis);
    if (it == v.comp.end()) continue;
    for (int a = 0; a <= 2; ++a) {
      acc = acc + it->second.derivative(a).scaled(g.grad.at(a, axis));
    }
  }
  div.comp[0u] = acc.scaled(-1.0);
  CHECK(form_difference_canonical(g, dv, div) < 1e-12);

  // delta of a constant 1-form vanishes; delta delta = 0
  PolyFormD c1 = pf_zero<double>(T, 1);
  c1.comp[1u] = PolyD::constant(2.5);
  c1.comp[2u] = PolyD::constant(-1.0);
  CHECK(form_max_canonical(g, coderivative(g, c1)) == doctest::Approx(0.0));
  auto w = random_form<double>(*cx, T, 2, 3, rng);
  CHECK(form_max_canonical(g, coderivative(g, coderivative(g, w))) < 1e-12);
}

TEST_CASE("traces restrict and commute with d") {
  auto cx = tri_mesh();
  SimplexRef T{2, 0};
  auto gT = make_geom<double>(*cx, T);
  // trace of d(lambda_0) onto the opposite edge vanishes
  const auto& tv = cx->simplex(T).v;
  std::vector<int> opp = {tv[1], tv[2]};
  int ei = *cx->find(1, opp);
  auto dl0 = exterior_derivative(gT, hat_form<double>(T, 0));
  auto tr = trace_to_face(*cx, dl0, {1, ei});
  auto gE = make_geom<double>(*cx, {1, ei});
  CHECK(form_max_canonical(gE, tr) == doctest::Approx(0.0));

  // tr d = d tr for a random rational quadratic form, tetrahedron -> face
  auto cx3 = tet_mesh();
  std::mt19937_64 rng(31);
  SimplexRef K{3, 1};
  auto gK = make_geom<Rational>(*cx3, K);
  int fi = cx3->faces(3, 1)[2].first;
  SimplexRef F{2, fi};
  auto gF = make_geom<Rational>(*cx3, F);
  auto u = random_form<Rational>(*cx3, K, 1, 2, rng);
  auto route1 = trace_to_face(*cx3, exterior_derivative(gK, u), F);
  auto route2 = exterior_derivative(gF, trace_to_face(*cx3, u, F));
  CHECK(form_difference_canonical(gF, route1, route2) == 0.0);
}

TEST_CASE("wedge algebra") {
  auto cx = tri_mesh();
  SimplexRef T{2, 0};
  auto g = make_geom<double>(*cx, T);
  PolyFormD dx = pf_zero<double>(T, 1), dy = pf_zero<double>(T, 1);
  dx.comp[1u] = PolyD::constant(1.0);
  dy.comp[2u] = PolyD::constant(1.0);
  CHECK(wedge(2, dx, dx).empty());
  CHECK(form_difference_canonical(g, wedge(2, dx, dy), pf_scale(wedge(2, dy, dx), -1.0)) ==
        doctest::Approx(0.0));
  auto l0 = hat_form<double>(T, 0);
  auto dl1 = dlambda_form(g, T, 1);
  auto w = wedge(2, l0, dl1);
  PolyFormD want = pf_zero<double>(T, 1);
  for (auto& [m, p] : dl1.comp) want.comp[m] = p * PolyD::hat(0);
  CHECK(form_difference_canonical(g, w, want) == doctest::Approx(0.0));
  CHECK_THROWS(wedge(2, wedge(2, dx, dy), wedge(2, dx, dy))); // degree overflow
}

TEST_CASE("whitney forms: vertex and edge formulas, de Rham duality") {
  auto cxp = build_complex(structured_mesh(2, 1));
  const auto& cx = *cxp;
  // vertex form is the hat
  auto w0 = whitney_form<Rational>(cx, {0, 0});
  for (const auto& [c, f] : w0.piece) {
    auto g = make_geom<Rational>(cx, {2, c});
    auto pos = cx.vertex_positions_in({0, 0}, {2, c});
    auto hat = hat_form<Rational>({2, c}, pos[0]);
    CHECK(form_difference_canonical(g, f, hat) == 0.0);
  }
  // edge formula lambda_0 d lambda_1 - lambda_1 d lambda_0 on each cell
  int e01 = *cx.find(1, {0, 1});
  auto we = whitney_form<Rational>(cx, {1, e01});
  for (const auto& [c, f] : we.piece) {
    SimplexRef T{2, c};
    auto g = make_geom<Rational>(cx, T);
    auto pos = cx.vertex_positions_in({1, e01}, T);
    auto want = pf_sub(wedge(2, hat_form<Rational>(T, pos[0]), dlambda_form(g, T, pos[1])),
                       wedge(2, hat_form<Rational>(T, pos[1]), dlambda_form(g, T, pos[0])));
    CHECK(form_difference_canonical(g, f, want) == 0.0);
  }
  // R^k phi_sigma(tau) = delta_{sigma tau} for all edges, exactly in rationals
  for (int k = 1; k <= 1; ++k) {
    for (int i = 0; i < cx.num(k); ++i) {
      auto w = whitney_form<Rational>(cx, {k, i});
      for (int j = 0; j < cx.num(k); ++j) {
        SimplexRef tau{k, j};
        Rational got(0);
        for (int c : cx.star_cells(tau)) {
          auto it = w.piece.find(c);
          if (it != w.piece.end()) {
            auto gtau = make_geom<Rational>(cx, tau);
            got = integrate_over_carrier(gtau, trace_to_face(cx, it->second, tau));
            break;
          }
        }
        CHECK(got == Rational(i == j ? 1 : 0));
      }
    }
  }
}

TEST_CASE("volume form has unit pointwise norm and integrates to the measure") {
  auto cxp = build_complex(structured_mesh(2, 2));
  const auto& cx = *cxp;
  for (int k = 0; k <= 2; ++k) {
    SimplexRef s{k, cx.num(k) / 2};
    auto vol = vol_form(cx, s);
    auto g = make_geom<double>(cx, s);
    CHECK(integrate_over_carrier(g, vol) == doctest::Approx(cx.measure(s)));
    CHECK(l2_inner_exact(cx, g, vol, vol) == doctest::Approx(cx.measure(s)));
  }
}

TEST_CASE("integration by parts with a bubble-multiplied test field") {
  auto cxp = build_complex(structured_mesh(2, 2));
  const auto& cx = *cxp;
  std::mt19937_64 rng(41);
  for (int k = 0; k <= 1; ++k) {
    auto u = random_global_poly_form(cx, k, 2, rng);
    auto rough = random_broken_form(cx, k + 1, 1, rng);
    auto v = pw_mult(bubble<double>(cx, BubbleKind::Star, {1, 4}), rough);
    double lhs = pw_l2_inner(pw_d(u), v);
    double rhs = pw_l2_inner(u, pw_delta(v));
    double scale = pw_l2_norm(pw_d(u)) * pw_l2_norm(v) + pw_l2_norm(u) * pw_l2_norm(pw_delta(v));
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, scale));
  }
}

TEST_CASE("hodge-star trace conformity detectors") {
  auto cxp = build_complex(structured_mesh(2, 2));
  const auto& cx = *cxp;
  // a global Whitney form is HLambda-conforming
  auto w = whitney_form<double>(cx, {1, 4});
  auto rep = hlambda_conformity(w);
  CHECK(rep.max_facet_jump <= 1e-12 * std::max(1.0, rep.scale));
  // bubble-multiplied fields are H-delta conforming with vanishing star trace
  std::mt19937_64 rng(3);
  auto rough = random_broken_form(cx, 1, 2, rng);
  auto v = pw_mult(bubble<double>(cx, BubbleKind::ExtendedStar, {0, 4}), rough);
  auto drep = hdelta_conformity(v);
  CHECK(drep.max_facet_jump <= 1e-12 * std::max(1.0, drep.scale));
  CHECK(drep.max_boundary_trace <= 1e-12 * std::max(1.0, drep.scale));
  // a raw broken field is not conforming (detector actually fires)
  auto rep2 = hlambda_conformity(rough);
  CHECK(rep2.max_facet_jump > 1e-6 * std::max(1.0, rep2.scale));
}
