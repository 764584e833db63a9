#include "feec/suite.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "feec/parallel.hpp"

namespace feec {

namespace {

SimplexRef anchored_simplex(const SimplicialComplex& cx, int n, int m, int dim) {
  const int s = m + 1, h = m / 2;
  auto vid = [&](int i, int j, int k) { return (k * s + j) * s + i; };
  std::vector<int> verts;
  if (n == 1) {
    std::vector<int> all = {h, h + 1};
    verts.assign(all.begin(), all.begin() + dim + 1);
  } else if (n == 2) {
    std::vector<int> all = {vid(h, h, 0), vid(h + 1, h, 0), vid(h + 1, h + 1, 0)};
    verts.assign(all.begin(), all.begin() + dim + 1);
  } else {
    std::vector<int> all = {vid(h, h, h), vid(h + 1, h, h), vid(h + 1, h + 1, h),
                            vid(h + 1, h + 1, h + 1)};
    verts.assign(all.begin(), all.begin() + dim + 1);
  }
  std::sort(verts.begin(), verts.end());
  auto idx = cx.find(dim, verts);
  if (!idx) throw Error("anchored_simplex: anchor not present in the mesh");
  return {dim, *idx};
}

PiecewiseFormD constant_field(const SimplicialComplex& cx, double value) {
  PiecewiseFormD one = pw_zero<double>(cx, 0);
  for (int c = 0; c < cx.num_cells(); ++c) {
    PolyFormD f = pf_zero<double>({cx.n(), c}, 0);
    f.comp[0u] = PolyD::constant(value);
    one.piece[c] = f;
  }
  return one;
}

struct StageRunner {
  const SuiteConfig& cfg;
  SuiteReport& rep;
  std::vector<std::shared_ptr<SimplicialComplex>> meshes; // per level
  std::vector<std::unique_ptr<FeStore>> stores;
  std::mt19937_64 rng;

  StageRunner(const SuiteConfig& c, SuiteReport& r) : cfg(c), rep(r), rng(c.seed) {}

  void add(const std::string& op, int r, int k, int level, const std::string& id, double err,
           double tol) {
    CheckResult res;
    res.op = op;
    res.r = r;
    res.k = k;
    res.level = level;
    res.id = id;
    res.max_err = err;
    res.tol = tol;
    res.pass = (tol < 0) || (err <= tol);
    rep.checks.push_back(res);
  }
  void add_flag(const std::string& op, int r, int k, int level, const std::string& id, bool ok) {
    CheckResult res;
    res.op = op;
    res.r = r;
    res.k = k;
    res.level = level;
    res.id = id;
    res.max_err = ok ? 0.0 : 1.0;
    res.tol = 0.5;
    res.pass = ok;
    rep.checks.push_back(res);
  }

  int kmax() const { return cfg.k_max < 0 ? meshes[0]->n() : std::min(cfg.k_max, meshes[0]->n()); }
  int kmin() const { return std::max(0, cfg.k_min); }

  void build_meshes() {
    if (!cfg.mesh_file.empty()) {
      meshes.push_back(build_complex(load_mesh_json(cfg.mesh_file)));
    } else {
      for (int l = 0; l < cfg.levels; ++l) {
        meshes.push_back(build_complex(structured_mesh(cfg.n, cfg.m << l)));
      }
    }
    for (auto& m : meshes) stores.push_back(std::make_unique<FeStore>(*m));
  }

  // -- stage 1 -----------------------------------------------------------
  void complex_sanity() {
    const auto& cx = *meshes[0];
    const int n = cx.n();

    bool dd_ok = true;
    for (int k = 2; k <= n; ++k) {
      auto cols_km1 = cx.boundary_columns(k - 1);
      auto cols_k = cx.boundary_columns(k);
      if (cfg.corrupt == "orientation" && k == n && !cols_k.empty()) {
        cols_k[cols_k.size() / 2][0].second *= -1;
      }
      if (!boundary_squares_to_zero(cols_km1, cols_k, cx.num(k - 2))) dd_ok = false;
    }
    add_flag("complex_sanity", -1, -1, 0, "dd_zero", dd_ok);

    auto shape = cx.shape_report();
    rep.constants["shape_regularity"] = shape.shape_regularity_constant;
    rep.constants["h_min"] = shape.h_min;
    rep.constants["h_max"] = shape.h_max;

    bool proxy_ok = true;
    for (int k = 0; k <= n; ++k) {
      for (int i = 0; i < cx.num(k); ++i) {
        auto [conn, chi] = cx.patch_connected_euler(cx.extended_star_cells({k, i}));
        if (!conn || chi != 1) proxy_ok = false;
      }
    }
    add_flag("complex_sanity", -1, -1, 0, "es_contractible_proxy", proxy_ok);

    // bubble support containment at the anchors (corruptible)
    bool bubble_ok = true;
    for (int dim = 0; dim <= n; ++dim) {
      SimplexRef sigma = anchored_simplex(cx, n, cfg.m, dim);
      auto es = cx.extended_star_cells(sigma);
      std::vector<int> cells = es;
      if (cfg.corrupt == "bubble") {
        for (int c = 0; c < cx.num_cells(); ++c) {
          if (!std::binary_search(es.begin(), es.end(), c)) {
            cells.push_back(c);
            break;
          }
        }
      }
      auto bub = bubble_from_cells<double>(cx, cells);
      for (int c : bub.support()) {
        if (!std::binary_search(es.begin(), es.end(), c)) bubble_ok = false;
      }
      // vanishing on every lower-dimensional simplex of the patch
      for (const auto& [c, piece] : bub.piece) {
        for (const auto& [f, sgn] : cx.faces(n, c)) {
          (void)sgn;
          auto tr = trace_to_face(cx, piece, {n - 1, f});
          auto gf = make_geom<double>(cx, {n - 1, f});
          if (form_max_canonical(gf, tr) > 1e-13) bubble_ok = false;
        }
      }
    }
    add_flag("complex_sanity", -1, -1, 0, "bubble_support", bubble_ok);
  }

  // -- stage 2 -----------------------------------------------------------
  void dimension_identities() {
    auto& store = *stores[0];
    const auto& cx = *meshes[0];
    const int n = cx.n();
    for (int r = cfg.r_min; r <= cfg.r_max; ++r) {
      bool d716 = true;
      for (int k = 0; k <= n; ++k) {
        for (int d = k; d <= n; ++d) {
          for (int i = 0; i < cx.num(d); ++i) {
            const FaceData& fd = store.face({d, i}, r, k);
            if (static_cast<long>(fd.ring.size()) != dim_trace_free(r, k, d)) d716 = false;
          }
        }
      }
      add_flag("dimension_identities", r, -1, 0, "dim716", d716);

      bool d917 = true;
      for (int k = kmin(); k <= kmax(); ++k) {
        auto space = store.mesh_space(r, k);
        long total = 0;
        for (int d = 0; d <= n; ++d) total += cx.num(d) * dim_trace_free(r, k, d);
        if (space->dim() != total) d917 = false;
      }
      add_flag("dimension_identities", r, -1, 0, "dim917", d917);
    }
  }

  // -- stage 3 -----------------------------------------------------------
  void exact_sequences() {
    auto& store = *stores[0];
    const auto& cx = *meshes[0];
    const int n = cx.n();
    for (int r = cfg.r_min; r <= cfg.r_max; ++r) {
      bool local_ok = true;
      for (int d = 1; d <= n; ++d) {
        SimplexRef tau = anchored_simplex(cx, n, cfg.m, d);
        auto lrep = check_local_exactness(store, tau, r);
        if (!lrep.pass) local_ok = false;
      }
      add_flag("exact_sequences", r, -1, 0, "local_complex_exact", local_ok);

      SimplexRef v = anchored_simplex(cx, n, cfg.m, 0);
      auto prep = check_patch_exactness(store, cx.extended_star_cells(v), r);
      add_flag("exact_sequences", r, -1, 0, "patch_complex_exact", prep.pass);
    }
    // discrete Poincare constants per level (stability when levels > 1)
    const int r = std::min(cfg.r_max, 2);
    std::vector<double> cps;
    for (std::size_t l = 0; l < meshes.size(); ++l) {
      const auto& cxl = *meshes[l];
      SimplexRef v = anchored_simplex(cxl, n, cfg.m << l, 0);
      double cp = discrete_poincare_constant(*stores[l], cxl.extended_star_cells(v), r, 0,
                                             cxl.h(v));
      cps.push_back(cp);
      rep.constants["C_P_level" + std::to_string(l)] = cp;
    }
    if (cps.size() > 1) {
      double drift = 0.0;
      for (std::size_t l = 0; l + 1 < cps.size(); ++l) {
        drift = std::max(drift, std::abs(cps[l + 1] - cps[l]) / std::max(cps[l], 1e-30));
      }
      add("exact_sequences", r, 0, 0, "poincare_drift", drift, tolerances().poincare_drift);
    }
  }

  // -- stage 4 -----------------------------------------------------------
  void whitney_stage() {
    const auto& cx = *meshes[0];
    const int n = cx.n();
    std::uniform_int_distribution<long> pick(-5, 5);

    if (cfg.rational) {
      // Wd: R phi_sigma(tau) = delta, exact
      bool wd = true;
      for (int k = kmin(); k <= std::min(kmax(), n); ++k) {
        for (int i = 0; i < cx.num(k); ++i) {
          auto w = whitney_form<Rational>(cx, {k, i});
          for (int j = 0; j < cx.num(k); ++j) {
            SimplexRef tau{k, j};
            Rational got(0);
            auto st = cx.star_cells(tau);
            for (int c : st) {
              auto it = w.piece.find(c);
              if (it != w.piece.end()) {
                auto g = make_geom<Rational>(cx, tau);
                got = integrate_over_carrier(g, trace_to_face(cx, it->second, tau));
                break;
              }
            }
            if (got != Rational(i == j ? 1 : 0)) wd = false;
          }
        }
      }
      add_flag("whitney", -1, -1, 0, "Wd_exact", wd);

      // Wd0 and Wcommute on random integer cochains, exact
      bool wd0 = true, wcomm = true;
      for (int k = kmin(); k <= std::min(kmax(), n); ++k) {
        PiecewiseFormQ W = pw_zero<Rational>(cx, k);
        Cochain X;
        X.degree = k;
        for (int i = 0; i < cx.num(k); ++i) {
          long a = pick(rng);
          X.coeff[i] = static_cast<double>(a);
          if (a != 0) {
            W = pw_add(W, pw_scale(whitney_form<Rational>(cx, {k, i}), Rational(a)));
          }
        }
        for (int j = 0; j < cx.num(k); ++j) {
          SimplexRef tau{k, j};
          Rational got(0);
          for (int c : cx.star_cells(tau)) {
            auto it = W.piece.find(c);
            if (it != W.piece.end()) {
              auto g = make_geom<Rational>(cx, tau);
              got = integrate_over_carrier(g, trace_to_face(cx, it->second, tau));
              break;
            }
          }
          if (got != Rational(static_cast<long>(X(j)))) wd0 = false;
        }
        if (k < n) {
          Cochain dX = cx.coboundary(X);
          PiecewiseFormQ WdX = pw_zero<Rational>(cx, k + 1);
          for (const auto& [i, c] : dX.coeff) {
            WdX = pw_add(WdX,
                         pw_scale(whitney_form<Rational>(cx, {k + 1, i}),
                                  Rational(static_cast<long>(c))));
          }
          for (const auto& [c, piece] : W.piece) {
            auto g = make_geom<Rational>(cx, {n, c});
            PolyFormQ lhs = exterior_derivative(g, piece);
            PolyFormQ rhs = WdX.piece.count(c) ? WdX.piece.at(c) : pf_zero<Rational>({n, c}, k + 1);
            if (form_difference_canonical(g, lhs, rhs) != 0.0) wcomm = false;
          }
          // cells carrying WdX but not W must be absent (supports match)
          for (const auto& [c, piece] : WdX.piece) {
            if (!W.piece.count(c)) {
              auto g = make_geom<Rational>(cx, {n, c});
              if (form_max_canonical(g, piece) != 0.0) wcomm = false;
            }
          }
        }
      }
      add_flag("whitney", -1, -1, 0, "Wd0_exact", wd0);
      add_flag("whitney", -1, -1, 0, "Wcommute_exact", wcomm);
    }

    // Wbound constants per level and their drift
    double drift = 0.0;
    std::vector<std::map<int, double>> cw(meshes.size());
    for (std::size_t l = 0; l < meshes.size(); ++l) {
      const auto& cxl = *meshes[l];
      for (int k = kmin(); k <= std::min(kmax(), n); ++k) {
        double best = 0.0;
        for (int i = 0; i < cxl.num(k); ++i) {
          auto w = whitney_form<double>(cxl, {k, i});
          double norm = pw_l2_norm(w);
          best = std::max(best, norm / std::pow(cxl.h({k, i}), 0.5 * n - k));
        }
        cw[l][k] = best;
        rep.constants["C_W_k" + std::to_string(k) + "_level" + std::to_string(l)] = best;
      }
    }
    for (std::size_t l = 0; l + 1 < meshes.size(); ++l) {
      for (const auto& [k, v] : cw[l]) {
        drift = std::max(drift, std::abs(cw[l + 1][k] - v) / std::max(v, 1e-30));
      }
    }
    if (meshes.size() > 1) {
      add("whitney", -1, -1, 0, "Wbound_drift", drift, tolerances().drift);
    }
  }

  // -- stage 5 -----------------------------------------------------------
  void weight_stage() {
    const auto& cx = *meshes[0];
    const int n = cx.n();
    for (int r = cfg.r_min; r <= cfg.r_max; ++r) {
      ZCorruption corr;
      if (cfg.corrupt == "meanzero") corr.kind = ZCorruption::Kind::SkipMeanZero;
      WeightFamily family(*stores[0], r, corr);
      bool build_failed = false;
      try {
        family.build_all(kmax());
      } catch (const Error&) {
        build_failed = true;
      }
      if (build_failed) {
        add_flag("z_family", r, -1, 0, "Z_potential_residual", false);
        continue;
      }
      auto checks = verify_weight_family(family, kmax(), cfg.seed + r);
      for (const auto& c : checks) {
        if (c.tol < 0) {
          rep.constants[c.id + "_r" + std::to_string(r)] = c.max_err;
        } else {
          add("z_family", r, -1, 0, c.id, c.max_err, std::max(c.tol, tolerances().suite));
        }
      }

      // scaling of the anchored weights across levels
      if (meshes.size() > 1) {
        std::vector<std::map<int, double>> norms(meshes.size());
        for (std::size_t l = 0; l < meshes.size(); ++l) {
          WeightFamily fam_l(*stores[l], r);
          for (int k = kmin(); k <= kmax(); ++k) {
            SimplexRef anchor = anchored_simplex(*meshes[l], n, cfg.m << l, k);
            fam_l.build_for({anchor});
            norms[l][k] = fam_l.log(anchor).norm;
          }
        }
        for (int k = kmin(); k <= kmax(); ++k) {
          double target = 0.5 * n - k; // per halving of h
          std::size_t l = norms.size() - 2;
          double est = std::log2(norms[l + 1][k] / norms[l][k]);
          add("z_family", r, k, static_cast<int>(l), "ZZ4r_scaling",
              std::abs(est - target) / std::max(1.0, std::abs(target)),
              tolerances().scaling_exponent);
          rep.constants["Z_norm_exponent_r" + std::to_string(r) + "_k" + std::to_string(k)] = est;
        }
      }
    }
  }

  // -- stage 6 -----------------------------------------------------------
  void extension_stage() {
    auto& store = *stores[0];
    const auto& cx = *meshes[0];
    const int n = cx.n();
    std::uniform_real_distribution<double> unif(-1, 1);

    for (int r = cfg.r_min; r <= cfg.r_max; ++r) {
      double tre = 0.0, tresig = 0.0, commute = 0.0;
      for (int k = kmin(); k <= std::min(kmax(), n - 1); ++k) {
        auto space = store.mesh_space(r, k);
        auto space1 = store.mesh_space(r, k + 1);
        for (int d = k; d <= std::min(n, r + k - 1); ++d) {
          SimplexRef sigma = anchored_simplex(cx, n, cfg.m, d);
          const FaceData& fd = store.face(sigma, r, k);
          if (fd.ring.empty()) continue;
          auto g = make_geom<double>(cx, sigma);
          // trE on random trace-free input
          PolyFormD rho = pf_zero<double>(sigma, k);
          for (const auto& b : fd.ring) rho = pf_add(rho, pf_scale(b, unif(rng)));
          auto E = extend(*space, sigma, rho);
          auto tr = pw_trace(E, sigma);
          double scale = 1.0 + form_max_canonical(g, rho);
          if (tr) {
            tre = std::max(tre, form_difference_canonical(g, tangential_part(g, *tr),
                                                          tangential_part(g, rho)) /
                                    scale);
          }
          // trEsig: E tr v = v on the geometric block
          auto members = g_basis(*space, sigma);
          if (!members.empty()) {
            PiecewiseFormD v = pw_zero<double>(cx, k);
            for (const auto& mbr : members) v = pw_add(v, pw_scale(mbr, unif(rng)));
            auto trv = pw_trace(v, sigma);
            if (trv) {
              auto Ev = extend(*space, sigma, *trv);
              tresig = std::max(tresig,
                                pw_l2_norm(pw_sub(Ev, v)) / (1.0 + pw_l2_norm(v)));
            }
          }
          // commuteE on random breve input
          if (!fd.breve.empty()) {
            PolyFormD b = pf_zero<double>(sigma, k);
            for (const auto& p : fd.breve) b = pf_add(b, pf_scale(p, unif(rng)));
            auto E0 = extend(*space, sigma, b);
            auto lhs = pw_d(E0);
            auto rhs = extend(*space1, sigma, exterior_derivative(g, b));
            commute = std::max(commute,
                               pw_l2_norm(pw_sub(lhs, rhs)) / (1.0 + pw_l2_norm(lhs)));
          }
        }
      }
      add("extension", r, -1, 0, "trE", tre, tolerances().exact_identity);
      add("extension", r, -1, 0, "trEsig", tresig, tolerances().exact_identity);
      add("extension", r, -1, 0, "commuteE", commute, tolerances().exact_identity);

      // U operators at the level-0 anchors
      UTable utable(store, r);
      double uu21 = 0.0, uu32 = 0.0;
      bool uu3 = true;
      for (int k = kmin(); k <= kmax(); ++k) {
        auto space = store.mesh_space(r, k);
        auto mb = space->m_basis();
        if (mb.empty()) continue;
        PiecewiseFormD u = pw_zero<double>(cx, k);
        for (const auto& m2 : mb) u = pw_add(u, pw_scale(m2, unif(rng)));
        for (const auto& blk : space->blocks()) {
          int np = blk.count - blk.nvol;
          if (np == 0) continue;
          if (!(blk.tau == anchored_simplex(cx, n, cfg.m, blk.tau.dim))) continue;
          const FaceData& fd = store.face(blk.tau, r, k);
          auto st = cx.star_cells(blk.tau);
          auto trv = pw_trace(u, blk.tau);
          for (int j = 0; j < np; ++j) {
            const auto& U = utable.field(blk.tau, k, j);
            for (int c : U.support()) {
              if (!std::binary_search(st.begin(), st.end(), c)) uu3 = false;
            }
            if (trv) {
              double lhs = pw_l2_inner(u, U);
              double rhs = ddc_inner(cx, fd, *trv, fd.pbasis[j]);
              uu21 = std::max(uu21, std::abs(lhs - rhs) / (1.0 + std::abs(rhs)));
            }
            if (k >= 1 && j >= static_cast<int>(fd.zimage.size())) {
              uu32 = std::max(uu32,
                              pw_l2_norm(pw_delta(U)) / (1.0 + pw_l2_norm(U)));
            }
          }
        }
      }
      add("u_operators", r, -1, 0, "UU2_1", uu21, tolerances().suite);
      add("u_operators", r, -1, 0, "UU3_2", uu32, tolerances().suite);
      add_flag("u_operators", r, -1, 0, "UU3", uu3);

      // UU4 scaling at the matched anchors
      if (meshes.size() > 1 && r >= 2) {
        for (int kk = kmin(); kk <= kmax(); ++kk) {
          std::vector<std::map<int, double>> unorm(meshes.size());
          for (std::size_t l = 0; l < meshes.size(); ++l) {
            UTable ut(*stores[l], r);
            for (int d = kk; d <= std::min(n, r + kk - 1); ++d) {
              SimplexRef tau = anchored_simplex(*meshes[l], n, cfg.m << l, d);
              const FaceData& fd = stores[l]->face(tau, r, kk);
              if (fd.zimage.empty()) continue;
              unorm[l][d] = pw_l2_norm(ut.field(tau, kk, 0)); // first exact member
            }
          }
          for (int d = kk; d <= std::min(n, r + kk - 1); ++d) {
            if (!unorm[0].count(d)) continue;
            double target = 0.5 * (n - d); // exponent per halving: -(dim-n)/2
            std::size_t l = unorm.size() - 2;
            if (unorm[l][d] <= 0 || unorm[l + 1][d] <= 0) continue;
            double est = std::log2(unorm[l + 1][d] / unorm[l][d]);
            add("u_operators", r, kk, static_cast<int>(l), "UU4_scaling",
                std::abs(est - target) / std::max(1.0, std::abs(target)),
                tolerances().scaling_exponent);
          }
        }
      }
    }
  }

  // -- stage 7 -----------------------------------------------------------
  void projection_stage() {
    const auto& cx = *meshes[0];
    const int n = cx.n();
    std::uniform_real_distribution<double> unif(-1, 1);

    for (int r = cfg.r_min; r <= cfg.r_max; ++r) {
      WeightFamily weights(*stores[0], r);
      weights.build_all(kmax());
      UTable utable(*stores[0], r);

      for (int k = kmin(); k <= kmax(); ++k) {
        ProjectionOperator op(*stores[0], weights, utable, r, k);
        auto space = stores[0]->mesh_space(r, k);

        Matrix P = op.matrix();
        double pscale = std::max(1.0, P.cwiseAbs().maxCoeff());
        add("projection", r, k, 0, "pi_idempotent",
            (P * P - P).cwiseAbs().maxCoeff() / (pscale * pscale), tolerances().suite);

        // whitney reproduction
        auto phi = whitney_form<double>(cx, anchored_simplex(cx, n, cfg.m, k));
        add("projection", r, k, 0, "pi_whitney",
            pw_l2_norm(pw_sub(op.project(phi), phi)) / (1.0 + pw_l2_norm(phi)),
            tolerances().suite);

        // integral preservation on finite element inputs (newPi1r)
        {
          Vector c(space->dim());
          for (int i = 0; i < space->dim(); ++i) c(i) = unif(rng);
          PiecewiseFormD u = space->combine(c);
          auto low = op.pi_low(u);
          double err = 0.0;
          for (int i = 0; i < cx.num(k); ++i) {
            double a = de_rham_value(cx, low, {k, i});
            double b = de_rham_value(cx, u, {k, i});
            err = std::max(err, std::abs(a - b) / (1.0 + std::abs(b)));
          }
          add("projection", r, k, 0, "newPi1r", err, tolerances().suite);
        }

        if (k == 0) {
          auto one = constant_field(cx, 1.0);
          add("projection", r, 0, 0, "pi_constants",
              pw_l2_norm(pw_sub(op.project(one), one)), tolerances().suite);
        }

        // commutation on random smooth inputs
        if (k < kmax()) {
          ProjectionOperator opk1(*stores[0], weights, utable, r, k + 1);
          double low_comm = 0.0, q_comm = 0.0, pi_comm = 0.0;
          const int batch = 20;
          for (int t = 0; t < batch; ++t) {
            auto u = random_global_poly_form(cx, k, r + 2, rng);
            auto du = pw_d(u);
            {
              auto lhs = pw_d(op.pi_low(u));
              auto rhs = opk1.pi_low(du);
              low_comm = std::max(low_comm,
                                  pw_l2_norm(pw_sub(lhs, rhs)) / (1.0 + pw_l2_norm(rhs)));
            }
            {
              auto lhs = pw_d(op.q_op(u));
              auto rhs = opk1.q_op(du);
              q_comm = std::max(q_comm,
                                pw_l2_norm(pw_sub(lhs, rhs)) / (1.0 + pw_l2_norm(rhs)));
            }
            {
              auto lhs = pw_d(op.project(u));
              auto rhs = opk1.project(du);
              pi_comm = std::max(pi_comm,
                                 pw_l2_norm(pw_sub(lhs, rhs)) / (1.0 + pw_l2_norm(rhs)));
            }
          }
          add("projection", r, k, 0, "commuting1r", low_comm, tolerances().suite);
          add("projection", r, k, 0, "commuting1", q_comm, tolerances().suite);
          add("projection", r, k, 0, "commutePi", pi_comm, tolerances().suite);
        }
      }

      // locality at the finest level: perturbations outside the stated patch
      {
        std::size_t lf = meshes.size() - 1;
        const auto& cxf = *meshes[lf];
        WeightFamily wf(*stores[lf], r);
        UTable utf(*stores[lf], r);
        int k = std::min(1, kmax());
        if (k < kmin()) k = kmin();
        ProjectionOperator opf(*stores[lf], wf, utf, r, k);
        int T = anchored_simplex(cxf, n, cfg.m << lf, n).idx;
        auto patch = (r == 1) ? cxf.extended_star_cells({n, T})
                              : cxf.extended_star2_cells({n, T});
        auto u = random_broken_form(cxf, k, r, rng);
        auto bump = random_broken_form(cxf, k, r, rng);
        PiecewiseFormD u2 = u;
        bool nontrivial = false;
        for (int c = 0; c < cxf.num_cells(); ++c) {
          if (std::binary_search(patch.begin(), patch.end(), c)) continue;
          u2.piece[c] = pf_add(u2.piece[c], bump.piece[c]);
          nontrivial = true;
        }
        if (nontrivial) {
          InputForm in1, in2;
          in1.k = in2.k = k;
          in1.field = &u;
          in2.field = &u2;
          auto p1 = opf.project_on_cell(in1, T);
          auto p2 = opf.project_on_cell(in2, T);
          auto g = make_geom<double>(cxf, {n, T});
          double diff = std::sqrt(std::max(0.0, l2_inner_on(cxf, {n, T}, pf_sub(p1, p2),
                                                            pf_sub(p1, p2), 4 * r + 2 * n)));
          double scale = 1.0 + std::sqrt(std::max(0.0, l2_inner_on(cxf, {n, T}, p1, p1,
                                                                   4 * r + 2 * n)));
          (void)g;
          add("projection", r, k, static_cast<int>(lf), "pi_locality", diff / scale,
              tolerances().locality);
        }
      }

      // local operator norm across levels at the matched anchor cell; only
      // levels whose anchor patches are combinatorially comparable enter the
      // drift comparison (the coarsest patches may still touch the boundary)
      if (meshes.size() > 1) {
        int k = std::min(1, kmax());
        if (k < kmin()) k = kmin();
        std::vector<double> ratio_per_level;
        std::vector<std::size_t> patch_size;
        for (std::size_t l = 0; l < meshes.size(); ++l) {
          const auto& cxl = *meshes[l];
          WeightFamily wl(*stores[l], r);
          UTable ul(*stores[l], r);
          ProjectionOperator opl(*stores[l], wl, ul, r, k);
          int T = anchored_simplex(cxl, n, cfg.m << l, n).idx;
          auto es2 = cxl.extended_star2_cells({n, T});
          patch_size.push_back(es2.size());
          double best = 0.0;
          for (int t = 0; t < 5; ++t) {
            auto u = random_broken_form(cxl, k, r, rng);
            InputForm uin;
            uin.k = k;
            uin.field = &u;
            auto piece = opl.project_on_cell(uin, T);
            double numer = std::sqrt(std::max(
                0.0, l2_inner_on(cxl, {n, T}, piece, piece, 4 * r + 2 * n)));
            double denom = pw_l2_norm_on(u, es2);
            if (denom > 0) best = std::max(best, numer / denom);
          }
          ratio_per_level.push_back(best);
          rep.constants["pi_norm_r" + std::to_string(r) + "_level" + std::to_string(l)] = best;
        }
        double drift = 0.0;
        bool compared = false;
        for (std::size_t l = 0; l + 1 < ratio_per_level.size(); ++l) {
          if (patch_size[l] != patch_size[l + 1]) continue;
          compared = true;
          drift = std::max(drift, std::abs(ratio_per_level[l + 1] - ratio_per_level[l]) /
                                      std::max(ratio_per_level[l], 1e-30));
        }
        if (compared) {
          add("projection", r, k, 0, "pi_norm_drift", drift, tolerances().drift);
        }
      }
    }
  }
};

} // namespace

SuiteReport run_suite(const SuiteConfig& config) {
  SuiteReport rep;
  rep.config = config;
  StageRunner run(config, rep);
  run.build_meshes();
  run.complex_sanity();
  run.dimension_identities();
  run.exact_sequences();
  run.whitney_stage();
  run.weight_stage();
  run.extension_stage();
  run.projection_stage();
  if (!config.out_dir.empty()) write_report(rep);
  return rep;
}

std::string SuiteReport::to_json() const {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  // one object per stage/(r,k) pair, stable order
  std::map<std::tuple<std::string, int, int>, std::vector<const CheckResult*>> groups;
  for (const auto& c : checks) groups[{c.op, c.r, c.k}].push_back(&c);
  for (const auto& [key, list] : groups) {
    nlohmann::ordered_json obj;
    obj["op"] = std::get<0>(key);
    nlohmann::ordered_json mesh;
    mesh["n"] = config.n;
    mesh["m"] = config.m;
    mesh["levels"] = config.levels;
    if (!config.mesh_file.empty()) mesh["file"] = config.mesh_file;
    obj["mesh"] = mesh;
    obj["r"] = std::get<1>(key);
    obj["k"] = std::get<2>(key);
    auto arr = nlohmann::ordered_json::array();
    for (const auto* c : list) {
      nlohmann::ordered_json jc;
      jc["id"] = c->id;
      jc["level"] = c->level;
      jc["max_err"] = c->max_err;
      jc["tol"] = c->tol;
      jc["pass"] = c->pass;
      arr.push_back(jc);
    }
    obj["checks"] = arr;
    obj["constants"] = nlohmann::ordered_json::object();
    out.push_back(obj);
  }
  nlohmann::ordered_json root;
  root["suite"] = out;
  root["seed"] = config.seed;
  nlohmann::ordered_json cons;
  for (const auto& [k, v] : constants) cons[k] = v;
  root["constants"] = cons;
  root["pass"] = pass();
  return root.dump(1);
}

std::string SuiteReport::to_csv() const {
  std::ostringstream out;
  out << "op,r,k,level,id,max_err,tol,pass\n";
  for (const auto& c : checks) {
    out << c.op << ',' << c.r << ',' << c.k << ',' << c.level << ',' << c.id << ','
        << c.max_err << ',' << c.tol << ',' << (c.pass ? 1 : 0) << "\n";
  }
  for (const auto& [k, v] : constants) {
    out << "constant,-1,-1,0," << k << ',' << v << ",-1,1\n";
  }
  return out.str();
}

std::vector<std::string> write_report(const SuiteReport& report) {
  namespace fs = std::filesystem;
  std::vector<std::string> paths;
  fs::create_directories(report.config.out_dir);
  if (report.config.format == "csv") {
    auto p = fs::path(report.config.out_dir) / "report.csv";
    std::ofstream(p) << report.to_csv();
    paths.push_back(p.string());
  } else {
    auto p = fs::path(report.config.out_dir) / "report.json";
    std::ofstream(p) << report.to_json() << "\n";
    paths.push_back(p.string());
  }
  return paths;
}

} // namespace feec
