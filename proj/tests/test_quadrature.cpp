#include <doctest.h>

#include <random>

#include "feec/meshgen.hpp"
#include "feec/piecewise.hpp"

using namespace feec;

TEST_CASE("factorial moment values on the reference triangle") {
  Eigen::MatrixXd X(2, 3);
  X << 0, 1, 0, 0, 0, 1;
  SimplicialComplex cx(X, {{0, 1, 2}});
  PolyD p = PolyD::hat(0) * PolyD::hat(1); // lambda_0 lambda_1
  CHECK(integrate(cx, {2, 0}, p, 4) == doctest::Approx(1.0 / 24));
  CHECK(integrate(cx, {2, 0}, p, 0, /*exact*/ true) == doctest::Approx(1.0 / 24));
  // degree guard
  CHECK_THROWS(integrate(cx, {2, 0}, p, 1));
}

TEST_CASE("rules integrate constants to the measure and odd differences to zero") {
  auto cxp = build_complex(structured_mesh(2, 3));
  const auto& cx = *cxp;
  for (int k = 0; k <= 2; ++k) {
    SimplexRef s{k, 0};
    CHECK(integrate(cx, s, PolyD::constant(1.0), 2) == doctest::Approx(cx.measure(s)));
  }
  PolyD odd = PolyD::hat(0) - PolyD::hat(1);
  CHECK(integrate(cx, {1, 0}, odd, 3) == doctest::Approx(0.0));
}

TEST_CASE("rule exactness audit at the suite degree") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> unif(-1, 1);
  for (int n = 1; n <= 3; ++n) {
    const int rmax = 4;
    const int q = 2 * (n + rmax + 1);
    const auto& rule = rule_for(n, q); // construction runs the audit
    CHECK(rule.degree == q);
    // randomized degree-q polynomial against the moment identity
    PolyD p;
    std::function<void(Expo, int, int)> gen = [&](Expo e, int var, int left) {
      if (var == n) {
        p.terms.push_back({expo_set(e, var, left), unif(rng)});
        return;
      }
      for (int a = 0; a <= left; ++a) gen(expo_set(e, var, a), var + 1, left - a);
    };
    gen(0u, 0, q);
    p.normalize();
    double via_rule = 0.0;
    for (const auto& qp : rule.points) via_rule += qp.w * p.eval(qp.lambda);
    double via_moment = integrate_poly_reference(p, n);
    CHECK(via_rule == doctest::Approx(via_moment).epsilon(1e-12));
  }
}

TEST_CASE("frame inner products over a cell") {
  auto cxp = build_complex(structured_mesh(2, 2));
  const auto& cx = *cxp;
  SimplexRef T{2, 0};
  PolyFormD dx = pf_zero<double>(T, 1), dy = pf_zero<double>(T, 1);
  dx.comp[1u] = PolyD::constant(1.0);
  dy.comp[2u] = PolyD::constant(1.0);
  CHECK(l2_inner_on(cx, T, dx, dx, 2) == doctest::Approx(cx.cell_volume(0)));
  CHECK(l2_inner_on(cx, T, dx, dy, 2) == doctest::Approx(0.0));
  CHECK_THROWS(l2_inner_on(cx, T, dx, pf_zero<double>(T, 2), 2));
}

TEST_CASE("whitney edge mass against the exact rational oracle") {
  auto cxp = build_complex(structured_mesh(2, 2));
  const auto& cx = *cxp;
  int e = *cx.find(1, {1, 4});
  auto wd = whitney_form<double>(cx, {1, e});
  auto wq = whitney_form<Rational>(cx, {1, e});
  double via_quadrature = pw_l2_inner(wd, wd);
  Rational via_moments = pw_l2_inner_exact(wq, wq);
  CHECK(via_quadrature == doctest::Approx(via_moments.get_d()).epsilon(1e-13));
}

TEST_CASE("callback integration carries the declared degree") {
  auto cxp = build_complex(structured_mesh(2, 1));
  const auto& cx = *cxp;
  double total = 0.0;
  for (int c = 0; c < cx.num_cells(); ++c) {
    total += integrate_callback(
        cx, c, [](const std::vector<double>& lam) { return lam[0] * lam[1]; }, 4);
  }
  // sum over both cells of int lambda_0 lambda_1 = 2 * |T| * 2! * 1/4! with |T| = 1/2
  CHECK(total == doctest::Approx(2.0 * 0.5 * 2.0 / 24.0));
}
