#include <doctest.h>

#include <random>

#include "feec/meshgen.hpp"
#include "feec/projection.hpp"

using namespace feec;

namespace {

struct Rig {
  std::shared_ptr<SimplicialComplex> cx;
  std::unique_ptr<FeStore> store;
  std::unique_ptr<WeightFamily> weights;
  std::unique_ptr<UTable> utable;

  Rig(int n, int m, int r, int kmax) {
    cx = build_complex(structured_mesh(n, m));
    store = std::make_unique<FeStore>(*cx);
    weights = std::make_unique<WeightFamily>(*store, r);
    weights->build_all(kmax);
    utable = std::make_unique<UTable>(*store, r);
  }
  ProjectionOperator op(int r, int k) { return ProjectionOperator(*store, *weights, *utable, r, k); }
};

} // namespace

TEST_CASE("de rham map: gradients, Stokes compatibility, whitney duality") {
  auto cxp = build_complex(structured_mesh(2, 2));
  const auto& cx = *cxp;
  std::mt19937_64 rng(3);

  // R^1(d lambda_p)([a,b]) = lambda_p(b) - lambda_p(a)
  auto hat = whitney_form<double>(cx, {0, 4});
  auto dhat = pw_d(hat);
  Cochain R1 = de_rham(cx, dhat, 1);
  for (int e = 0; e < cx.num(1); ++e) {
    const auto& v = cx.simplex({1, e}).v;
    double want = (v[1] == 4 ? 1.0 : 0.0) - (v[0] == 4 ? 1.0 : 0.0);
    CHECK(R1(e) == doctest::Approx(want).epsilon(1e-12));
  }

  // Stokes: R^{k+1}(d u)(tau) = R^k(u)(boundary tau) for a random polynomial
  for (int k = 0; k <= 1; ++k) {
    auto u = random_global_poly_form(cx, k, 3, rng);
    Cochain Rdu = de_rham(cx, pw_d(u), k + 1);
    Cochain Ru = de_rham(cx, u, k);
    for (int t = 0; t < cx.num(k + 1); ++t) {
      double want = 0.0;
      for (const auto& [f, sgn] : cx.faces(k + 1, t)) want += sgn * Ru(f);
      CHECK(Rdu(t) == doctest::Approx(want).epsilon(1e-10));
    }
  }

  // R phi_sigma (tau) = delta
  for (int k = 0; k <= 2; ++k) {
    int i = cx.num(k) / 2;
    Cochain R = de_rham(cx, whitney_form<double>(cx, {k, i}), k);
    for (int j = 0; j < cx.num(k); ++j) {
      CHECK(R(j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-11));
    }
  }
}

TEST_CASE("whitney interpolant: reproduction and exact commutation") {
  auto cxp = build_complex(structured_mesh(2, 2));
  const auto& cx = *cxp;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(-1, 1);

  Cochain X;
  X.degree = 1;
  X.coeff[4] = 1.0;
  auto W = whitney_interpolant(cx, X);
  CHECK(pw_l2_norm(pw_sub(W, whitney_form<double>(cx, {1, 4}))) < 1e-13);

  for (int k = 0; k <= 2; ++k) {
    Cochain Y;
    Y.degree = k;
    for (int i = 0; i < cx.num(k); ++i) Y.coeff[i] = unif(rng);
    auto WY = whitney_interpolant(cx, Y);
    Cochain back = de_rham(cx, WY, k);
    for (int i = 0; i < cx.num(k); ++i) CHECK(back(i) == doctest::Approx(Y(i)).epsilon(1e-10));
    if (k < 2) {
      auto lhs = pw_d(WY);
      auto rhs = whitney_interpolant(cx, cx.coboundary(Y));
      CHECK(pw_l2_norm(pw_sub(lhs, rhs)) < 1e-11 * (1.0 + pw_l2_norm(lhs)));
    }
  }
}

TEST_CASE("lowest-order projection: whitney reproduction and Lemma 3.2 route") {
  Rig rig(2, 2, 2, 2);
  const auto& cx = *rig.cx;
  auto op1 = rig.op(2, 1);

  // u = phi_sigma reproduces itself
  auto phi = whitney_form<double>(cx, {1, 7});
  auto out = op1.pi_low(phi);
  CHECK(pw_l2_norm(pw_sub(out, phi)) < 1e-9 * (1.0 + pw_l2_norm(phi)));

  // u in the trimmed space: pi_low u = W(R u) (two independent routes)
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(-1, 1);
  auto space = rig.store->mesh_space(2, 1);
  Vector c(space->dim());
  for (int i = 0; i < space->dim(); ++i) c(i) = unif(rng);
  PiecewiseFormD u = space->combine(c);
  auto lhs = op1.pi_low(u);
  auto rhs = whitney_interpolant(cx, de_rham(cx, u, 1));
  CHECK(pw_l2_norm(pw_sub(lhs, rhs)) < 1e-9 * (1.0 + pw_l2_norm(rhs)));
}

TEST_CASE("lowest-order projection commutes with d on smooth inputs") {
  Rig rig(2, 2, 2, 2);
  const auto& cx = *rig.cx;
  std::mt19937_64 rng(13);
  for (int k = 0; k <= 1; ++k) {
    auto opk = rig.op(2, k);
    auto opk1 = rig.op(2, k + 1);
    for (int trial = 0; trial < 3; ++trial) {
      auto u = random_global_poly_form(cx, k, 4, rng);
      auto lhs = pw_d(opk.pi_low(u));
      auto rhs = opk1.pi_low(pw_d(u));
      double scale = 1.0 + pw_l2_norm(rhs);
      CHECK(pw_l2_norm(pw_sub(lhs, rhs)) <= 1e-9 * scale);
    }
  }
}

TEST_CASE("U fields: support, duality, coderivative structure") {
  Rig rig(2, 2, 2, 2);
  const auto& cx = *rig.cx;
  auto space1 = rig.store->mesh_space(2, 1);

  for (const auto& b : space1->blocks()) {
    int np = b.count - b.nvol;
    if (np == 0) continue;
    const FaceData& fd = rig.store->face(b.tau, 2, 1);
    auto st = cx.star_cells(b.tau);
    for (int j = 0; j < np; ++j) {
      const auto& U = rig.utable->field(b.tau, 1, j);
      // exact support containment in the star
      for (int c : U.support()) CHECK(std::binary_search(st.begin(), st.end(), c));
      // duality <E_tau g', U(tau,g)> = delta through the orthonormal p-basis
      for (int j2 = 0; j2 < np; ++j2) {
        auto E = extend(*space1, b.tau, fd.pbasis[j2]);
        double got = pw_l2_inner(E, U);
        CHECK(std::abs(got - (j2 == j ? 1.0 : 0.0)) < 1e-8);
      }
      // complement members have vanishing coderivative (delta delta = 0)
      if (j >= static_cast<int>(fd.zimage.size())) {
        CHECK(pw_l2_norm(pw_delta(U)) < 1e-9 * (1.0 + pw_l2_norm(U)));
      }
    }
  }
}

TEST_CASE("UU2-1: the U pairing realizes the alternative dofs on M") {
  Rig rig(2, 2, 2, 2);
  const auto& cx = *rig.cx;
  auto space = rig.store->mesh_space(2, 1);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unif(-1, 1);
  auto mb = space->m_basis();
  PiecewiseFormD u = pw_zero<double>(cx, 1);
  for (const auto& m : mb) u = pw_add(u, pw_scale(m, unif(rng)));

  for (const auto& b : space->blocks()) {
    int np = b.count - b.nvol;
    if (np == 0) continue;
    const FaceData& fd = rig.store->face(b.tau, 2, 1);
    auto tr = pw_trace(u, b.tau);
    REQUIRE(tr);
    for (int j = 0; j < np; ++j) {
      double lhs = pw_l2_inner(u, rig.utable->field(b.tau, 1, j));
      double rhs = ddc_inner(cx, fd, *tr, fd.pbasis[j]);
      CHECK(std::abs(lhs - rhs) < 1e-8 * (1.0 + std::abs(rhs)));
    }
  }
}

TEST_CASE("the correction Q: reproduction on M, codomain, commutation") {
  Rig rig(2, 2, 2, 2);
  const auto& cx = *rig.cx;
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> unif(-1, 1);
  auto op1 = rig.op(2, 1);
  auto op2 = rig.op(2, 2);
  auto space = rig.store->mesh_space(2, 1);

  // Q u = u on M
  auto mb = space->m_basis();
  PiecewiseFormD u = pw_zero<double>(cx, 1);
  for (const auto& m : mb) u = pw_add(u, pw_scale(m, unif(rng)));
  auto Qu = op1.q_op(u);
  CHECK(pw_l2_norm(pw_sub(Qu, u)) < 1e-9 * (1.0 + pw_l2_norm(u)));

  // Q of a Whitney field lands in M (vanishing k-face integrals)
  auto w = whitney_form<double>(cx, {1, 7});
  auto Qw = op1.q_op(w);
  for (int i = 0; i < cx.num(1); ++i) {
    CHECK(std::abs(de_rham_value(cx, Qw, {1, i})) < 1e-9 * (1.0 + pw_l2_norm(Qw)));
  }

  // commutation d Q = Q d on smooth inputs
  for (int trial = 0; trial < 3; ++trial) {
    auto s = random_global_poly_form(cx, 1, 4, rng);
    auto lhs = pw_d(op1.q_op(s));
    auto rhs = op2.q_op(pw_d(s));
    double scale = 1.0 + pw_l2_norm(rhs);
    CHECK(pw_l2_norm(pw_sub(lhs, rhs)) <= 1e-9 * scale);
  }
}

TEST_CASE("final projection: reproduction, commutation, constants") {
  Rig rig(2, 2, 2, 2);
  const auto& cx = *rig.cx;
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> unif(-1, 1);

  for (int k = 0; k <= 2; ++k) {
    auto op = rig.op(2, k);
    auto space = rig.store->mesh_space(2, k);
    Vector c(space->dim());
    for (int i = 0; i < space->dim(); ++i) c(i) = unif(rng);
    PiecewiseFormD u = space->combine(c);
    auto pu = op.project(u);
    CHECK(pw_l2_norm(pw_sub(pu, u)) < 1e-9 * (1.0 + pw_l2_norm(u)));

    // whitney reproduction
    auto phi = whitney_form<double>(cx, {k, cx.num(k) / 2});
    CHECK(pw_l2_norm(pw_sub(op.project(phi), phi)) < 1e-9 * (1.0 + pw_l2_norm(phi)));
  }

  // constants are preserved at k = 0
  auto op0 = rig.op(2, 0);
  PiecewiseFormD one = pw_zero<double>(cx, 0);
  for (int c2 = 0; c2 < cx.num_cells(); ++c2) {
    PolyFormD f = pf_zero<double>({2, c2}, 0);
    f.comp[0u] = PolyD::constant(1.0);
    one.piece[c2] = f;
  }
  auto pone = op0.project(one);
  CHECK(pw_l2_norm(pw_sub(pone, one)) < 1e-9);

  // commutation of the full projection
  for (int k = 0; k <= 1; ++k) {
    auto opk = rig.op(2, k);
    auto opk1 = rig.op(2, k + 1);
    auto u = random_global_poly_form(cx, k, 4, rng);
    auto lhs = pw_d(opk.project(u));
    auto rhs = opk1.project(pw_d(u));
    double scale = 1.0 + pw_l2_norm(rhs);
    CHECK(pw_l2_norm(pw_sub(lhs, rhs)) <= 1e-9 * scale);
  }
}

TEST_CASE("r=1 projection coincides with the lowest-order operator") {
  Rig rig(2, 2, 1, 2);
  const auto& cx = *rig.cx;
  std::mt19937_64 rng(29);
  for (int k = 0; k <= 2; ++k) {
    auto op = rig.op(1, k);
    auto u = random_broken_form(cx, k, 2, rng);
    auto a = op.project(u);
    auto b = op.pi_low(u);
    CHECK(pw_l2_norm(pw_sub(a, b)) < 1e-12 * (1.0 + pw_l2_norm(b)));
  }
}

TEST_CASE("idempotence of the materialized operator") {
  Rig rig(2, 2, 2, 2);
  for (int k = 0; k <= 2; ++k) {
    auto op = rig.op(2, k);
    Matrix P = op.matrix();
    double scale = P.cwiseAbs().maxCoeff();
    CHECK((P * P - P).cwiseAbs().maxCoeff() < 1e-8 * std::max(1.0, scale * scale));
  }
}

TEST_CASE("locality: the projection on T only sees the stated neighborhood") {
  std::mt19937_64 rng(31);
  // r = 1: es(T)
  {
    Rig rig(2, 2, 1, 2);
    const auto& cx = *rig.cx;
    auto op = rig.op(1, 1);
    int T = 0;
    auto es = cx.extended_star_cells({2, T});
    auto u = random_broken_form(cx, 1, 2, rng);
    auto bump = random_broken_form(cx, 1, 2, rng);
    PiecewiseFormD u2 = u;
    for (int c = 0; c < cx.num_cells(); ++c) {
      if (std::binary_search(es.begin(), es.end(), c)) continue;
      u2.piece[c] = pf_add(u2.piece[c], bump.piece[c]);
    }
    auto p1 = op.project(u);
    auto p2 = op.project(u2);
    double diff_on_T = std::sqrt(std::max(
        0.0, pw_l2_inner_on(pw_sub(p1, p2), pw_sub(p1, p2), {T})));
    CHECK(diff_on_T <= 1e-12 * (1.0 + pw_l2_norm(p1)));
  }
  // r = 2: es^2(T)
  {
    Rig rig(2, 4, 2, 2);
    const auto& cx = *rig.cx;
    auto op = rig.op(2, 1);
    int T = 0;
    auto es2 = cx.extended_star2_cells({2, T});
    REQUIRE(es2.size() < static_cast<std::size_t>(cx.num_cells()));
    auto u = random_broken_form(cx, 1, 2, rng);
    auto bump = random_broken_form(cx, 1, 2, rng);
    PiecewiseFormD u2 = u;
    for (int c = 0; c < cx.num_cells(); ++c) {
      if (std::binary_search(es2.begin(), es2.end(), c)) continue;
      u2.piece[c] = pf_add(u2.piece[c], bump.piece[c]);
    }
    auto p1 = op.project(u);
    auto p2 = op.project(u2);
    double diff_on_T = std::sqrt(std::max(
        0.0, pw_l2_inner_on(pw_sub(p1, p2), pw_sub(p1, p2), {T})));
    CHECK(diff_on_T <= 1e-12 * (1.0 + pw_l2_norm(p1)));
  }
}

TEST_CASE("callback inputs reproduce the exact path at the stamped degree") {
  Rig rig(2, 2, 1, 1);
  const auto& cx = *rig.cx;
  std::mt19937_64 rng(37);
  auto u = random_global_poly_form(cx, 1, 2, rng);
  auto op = rig.op(1, 1);
  InputForm cb;
  cb.k = 1;
  cb.quad_degree = 10;
  cb.callback = [&](int cell, const std::vector<double>& lam) {
    return eval_form(u.piece.at(cell), cx.n(), lam);
  };
  auto via_cb = op.project(cb);
  auto via_exact = op.project(u);
  CHECK(pw_l2_norm(pw_sub(via_cb, via_exact)) < 1e-10 * (1.0 + pw_l2_norm(via_exact)));
}
