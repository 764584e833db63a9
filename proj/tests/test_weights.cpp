#include <doctest.h>

#include <random>

#include "feec/meshgen.hpp"
#include "feec/weights.hpp"

using namespace feec;

TEST_CASE("star-conjugation signs agree with the symbolic coderivative") {
  // delta(eta) = z for the potential route, checked symbolically on random data
  auto cxp = build_complex(structured_mesh(2, 2));
  const auto& cx = *cxp;
  FeStore store(cx);
  std::mt19937_64 rng(3);
  // take z = delta of a bubble-damped field so it is compatible by construction
  for (int k = 1; k <= 2; ++k) {
    auto rough = random_broken_form(cx, k, 1, rng);
    SimplexRef sigma{k, cx.num(k) / 2};
    auto bub = bubble<double>(cx, BubbleKind::ExtendedStar, sigma);
    auto zfield = pw_delta(pw_mult(bub, rough)); // in H-delta with vanishing star trace
    ZLog log;
    auto eta = potential_eta(store, sigma, zfield, log);
    CHECK(log.potential_residual < 1e-8);
    double scale = 1.0 + pw_l2_norm(zfield);
    CHECK(pw_l2_norm(pw_sub(pw_delta(eta), zfield)) / scale < 1e-8);
    // vanishing star trace of eta on the patch boundary
    auto rep = hdelta_conformity(eta);
    CHECK(rep.max_facet_jump <= 1e-8 * (1.0 + rep.scale));
    CHECK(rep.max_boundary_trace <= 1e-8 * (1.0 + rep.scale));
  }
}

TEST_CASE("potential of zero data is zero") {
  auto cxp = build_complex(structured_mesh(2, 2));
  FeStore store(*cxp);
  ZLog log;
  auto zero = pw_zero<double>(*cxp, 0);
  auto eta = potential_eta(store, {1, 4}, zero, log);
  CHECK(pw_l2_norm(eta) == 0.0);
}

TEST_CASE("incompatible data is rejected, not corrected") {
  auto cxp = build_complex(structured_mesh(2, 2));
  const auto& cx = *cxp;
  FeStore store(cx);
  SimplexRef sigma{1, 4};
  auto es = cx.extended_star_cells(sigma);
  PiecewiseFormD bad = pw_zero<double>(cx, 0);
  PolyFormD c = pf_zero<double>({2, es[0]}, 0);
  c.comp[0u] = PolyD::constant(1.0);
  bad.piece[es[0]] = c;
  ZLog log;
  CHECK_THROWS(potential_eta(store, sigma, bad, log));
}

TEST_CASE("bubble solve: zero rhs gives zero, residual gate holds") {
  auto cxp = build_complex(structured_mesh(2, 2));
  const auto& cx = *cxp;
  FeStore store(cx);
  SimplexRef sigma{1, 4};
  auto bub = bubble<double>(cx, BubbleKind::ExtendedStar, sigma);
  auto [v0, r0] = bubble_solve(store, sigma, 2, 1, bub,
                               [](const PiecewiseFormD&) { return 0.0; });
  CHECK(pw_l2_norm(v0) == doctest::Approx(0.0));

  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unif(-1, 1);
  std::vector<double> rhs_values;
  auto [v, res] = bubble_solve(store, sigma, 2, 1, bub, [&](const PiecewiseFormD& u) {
    (void)u;
    return unif(rng);
  });
  CHECK(res < 1e-10);
  CHECK(pw_l2_norm(v) > 0.0);
}

TEST_CASE("lowest-order weights reproduce point evaluation") {
  auto cxp = build_complex(structured_mesh(2, 2));
  const auto& cx = *cxp;
  FeStore store(cx);
  for (int r = 1; r <= 2; ++r) {
    WeightFamily family(store, r);
    SimplexRef p{0, 4}; // interior vertex
    family.build_for({p});
    const auto& Z = family.z(p);

    // constants: <Z, 1> = 1
    PiecewiseFormD one = pw_zero<double>(cx, 0);
    for (int c = 0; c < cx.num_cells(); ++c) {
      PolyFormD f = pf_zero<double>({2, c}, 0);
      f.comp[0u] = PolyD::constant(1.0);
      one.piece[c] = f;
    }
    CHECK(pw_l2_inner(Z, one) == doctest::Approx(1.0).epsilon(1e-9));

    // hats: <Z(p), hat_q> = delta_pq
    for (int q : {4, 0, 1, 3}) {
      auto hat = whitney_form<double>(cx, {0, q});
      double want = (q == 4) ? 1.0 : 0.0;
      CHECK(pw_l2_inner(Z, hat) == doctest::Approx(want).epsilon(1e-9));
    }

    // patch duality residual recorded during the build
    CHECK(family.log(p).patch_duality_err < 1e-9);
    // support containment
    auto es = cx.extended_star_cells(p);
    for (int c : Z.support()) CHECK(std::binary_search(es.begin(), es.end(), c));
  }
}

TEST_CASE("full family verification on the 2x2 mesh at r=1,2") {
  auto cxp = build_complex(structured_mesh(2, 2));
  FeStore store(*cxp);
  for (int r = 1; r <= 2; ++r) {
    WeightFamily family(store, r);
    family.build_all(2);
    auto checks = verify_weight_family(family, 2);
    for (const auto& c : checks) {
      CAPTURE(c.id);
      CAPTURE(c.max_err);
      if (c.tol >= 0) CHECK(c.pass);
    }
  }
}

TEST_CASE("mean-zero corruption trips the potential residual check") {
  auto cxp = build_complex(structured_mesh(2, 2));
  FeStore store(*cxp);
  WeightFamily family(store, 1, ZCorruption{ZCorruption::Kind::SkipMeanZero});
  bool failed = false;
  try {
    family.build_for({SimplexRef{1, 4}});
    auto checks = verify_weight_family(family, 1);
    for (const auto& c : checks) {
      if ((c.id == "Z_potential_residual" || c.id == "Z_compat_meanzero" || c.id == "ZZ0r") &&
          !c.pass) {
        failed = true;
      }
    }
  } catch (const Error&) {
    failed = true; // the residual gate may abort the build outright
  }
  CHECK(failed);
}

TEST_CASE("weight norms scale like h^{k - n/2} under refinement") {
  // similarity-matched anchors: same grid offset pattern on every level
  const int r = 1, n = 2;
  std::vector<std::array<double, 3>> norms; // per level: k = 0, 1, 2
  for (int m : {2, 4, 8}) {
    auto cxp = build_complex(structured_mesh(2, m));
    const auto& cx = *cxp;
    FeStore store(cx);
    WeightFamily family(store, r);
    const int s = m + 1, h = m / 2;
    int v00 = h * s + h, v10 = h * s + h + 1, v11 = (h + 1) * s + h + 1;
    std::array<SimplexRef, 3> anchors = {
        SimplexRef{0, v00},
        SimplexRef{1, *cx.find(1, {v00, v10})},
        SimplexRef{2, *cx.find(2, {v00, v10, v11})},
    };
    std::array<double, 3> row{};
    for (int k = 0; k <= 2; ++k) {
      family.build_for({anchors[k]});
      row[k] = family.log(anchors[k]).norm;
    }
    norms.push_back(row);
  }
  for (int k = 0; k <= 2; ++k) {
    // h halves per level: norm ratio between levels is 2^{n/2 - k}; the
    // exponent is read off the finest pair (the asymptotic end)
    double target = 0.5 * n - k;
    std::size_t l = norms.size() - 2;
    double est = std::log2(norms[l + 1][k] / norms[l][k]);
    CAPTURE(k);
    CAPTURE(est);
    CHECK(std::abs(est - target) <= 0.1 * std::max(1.0, std::abs(target)));
  }
}
