#include "feec/weights.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

#include "feec/parallel.hpp"

namespace feec {

namespace {

/// Complement-of-kernel basis of the patch space: pencil eigenvectors of
/// (Gram of d-images, Gram) above the kernel block, G-orthonormal.
struct KernelSplit {
  Matrix zperp;  // coordinates, one column per complement member
  Matrix kernel; // coordinates of the kernel
};

KernelSplit kernel_split(FeSpace& space, int qdeg) {
  const auto& cx = space.store().cx();
  std::vector<PiecewiseFormD> dbasis;
  dbasis.reserve(space.dim());
  for (const auto& b : space.basis()) dbasis.push_back(pw_d(b));
  Matrix G = pw_gram(cx, space.basis(), space.basis(), space.patch().cells, qdeg);
  Matrix Gd = pw_gram(cx, dbasis, dbasis, space.patch().cells, qdeg);
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(Gd, G);
  if (es.info() != Eigen::Success) throw Error("kernel_split: pencil solver failed");
  const auto& vals = es.eigenvalues();
  double lmax = std::max(vals(vals.size() - 1), 0.0);
  KernelSplit out;
  int nk = 0;
  for (int i = 0; i < vals.size(); ++i) {
    if (vals(i) <= tolerances().rank_rel * std::max(lmax, 1e-30)) ++nk;
  }
  out.kernel = es.eigenvectors().leftCols(nk);
  out.zperp = es.eigenvectors().rightCols(vals.size() - nk);
  return out;
}

} // namespace

double de_rham_value(const SimplicialComplex& cx, const PiecewiseFormD& u, SimplexRef sigma) {
  auto tr = pw_trace(u, sigma);
  if (!tr) return 0.0;
  Geom<double> g = make_geom<double>(cx, sigma);
  return integrate_over_carrier(g, *tr);
}

std::pair<PiecewiseFormD, double> bubble_solve(
    FeStore& store, SimplexRef sigma, int r, int k, const PiecewiseFormD& bubble_field,
    const std::function<double(const PiecewiseFormD&)>& rhs) {
  const auto& cx = store.cx();
  auto es_cells = cx.extended_star_cells(sigma);
  auto space = store.space(es_cells, r, k);
  int qdeg = 2 * r + cx.n() + 1;
  KernelSplit split = kernel_split(*space, qdeg);
  const int np = static_cast<int>(split.zperp.cols());
  if (np == 0) {
    return {pw_zero<double>(cx, k), 0.0};
  }
  std::vector<PiecewiseFormD> perp_fields, perp_d;
  for (int j = 0; j < np; ++j) {
    PiecewiseFormD w = space->combine(split.zperp.col(j));
    perp_d.push_back(pw_d(w));
    perp_fields.push_back(std::move(w));
  }
  Matrix S = pw_gram(cx, perp_d, perp_d, space->patch().cells, qdeg + cx.n() + 1, &bubble_field);
  Vector b(np);
  for (int j = 0; j < np; ++j) b(j) = rhs(perp_fields[j]);
  Vector v = solve_spd(S, b);
  double residual = (S * v - b).norm() / std::max(1.0, b.norm());
  PiecewiseFormD out = pw_zero<double>(cx, k);
  for (int j = 0; j < np; ++j) {
    if (v(j) != 0.0) out = pw_add(out, pw_scale(perp_fields[j], v(j)));
  }
  return {out, residual};
}

PiecewiseFormD potential_eta(FeStore& store, SimplexRef sigma, const PiecewiseFormD& z_prev,
                             ZLog& log, bool skip_meanzero_check) {
  const auto& cx = store.cx();
  const int n = cx.n();
  const int k = z_prev.k + 1;
  auto es_cells = cx.extended_star_cells(sigma);

  double zscale = std::max(1.0, pw_l2_norm(z_prev));
  if (k >= 2) {
    log.compat_residual = pw_l2_norm(pw_delta(z_prev)) / zscale;
  } else {
    PiecewiseFormD one = pw_zero<double>(cx, 0);
    for (int c : es_cells) {
      PolyFormD f = pf_zero<double>({n, c}, 0);
      f.comp[0u] = PolyD::constant(1.0);
      one.piece[c] = f;
    }
    log.compat_residual = std::abs(pw_l2_inner(z_prev, one)) / zscale;
  }
  if (!skip_meanzero_check && log.compat_residual > 1e-8) {
    throw Error("potential_eta: incompatible data (residual " +
                std::to_string(log.compat_residual) + ")");
  }

  if (pw_l2_norm(z_prev) == 0.0) {
    log.potential_degree = 0;
    return pw_zero<double>(cx, k);
  }

  int zdeg = 0;
  for (const auto& [c, f] : z_prev.piece) zdeg = std::max(zdeg, f.poly_degree());
  const int rprime = zdeg + 1;
  log.potential_degree = rprime;

  // g = (-1)^k star z_prev; solve d mu = g with mu in the trimmed space of
  // degree rprime on the patch, vanishing trace on the patch boundary
  PiecewiseFormD g = pw_star(z_prev);
  if (k % 2 != 0) g = pw_scale(g, -1.0);

  auto V = store.space(es_cells, rprime, n - k);
  auto W = store.space(es_cells, rprime, n - k + 1);
  auto vin = V->interior_member_indices();
  auto win = W->interior_member_indices();
  if (vin.empty()) throw Error("potential_eta: empty interior space");
  std::vector<PiecewiseFormD> vb, dvb, wb;
  for (int m : vin) {
    vb.push_back(V->basis()[m]);
    dvb.push_back(pw_d(V->basis()[m]));
  }
  for (int m : win) wb.push_back(W->basis()[m]);

  int qdeg = 2 * rprime + 2;
  Matrix A = pw_gram(cx, wb, dvb, es_cells, qdeg);
  Matrix M = pw_gram(cx, vb, vb, es_cells, qdeg);
  Vector b = pw_gram(cx, wb, {g}, es_cells, qdeg).col(0);

  // minimum-L2-norm representative through the Cholesky change of variables;
  // Euclidean fallback when the Gram is numerically semidefinite
  Vector c;
  Eigen::LLT<Matrix> llt(M);
  if (llt.info() == Eigen::Success) {
    Matrix L = llt.matrixL();
    Matrix AL = L.triangularView<Eigen::Lower>().solve(A.transpose()).transpose();
    Vector y = minnorm_least_squares(AL, b);
    c = L.transpose().triangularView<Eigen::Upper>().solve(y);
  } else {
    c = minnorm_least_squares(A, b);
  }

  PiecewiseFormD mu = pw_zero<double>(cx, n - k);
  for (std::size_t j = 0; j < vb.size(); ++j) {
    if (c(j) != 0.0) mu = pw_add(mu, pw_scale(vb[j], c(j)));
  }
  double gnorm = pw_l2_norm(g);
  log.potential_residual = pw_l2_norm(pw_sub(pw_d(mu), g)) / std::max(1.0, gnorm);
  if (log.potential_residual > 1e-7) {
    throw Error("potential_eta: potential residual " + std::to_string(log.potential_residual));
  }

  // eta = star^{-1} mu
  PiecewiseFormD eta = pw_star(mu);
  if (((k % 2) * ((n - k) % 2)) != 0) eta = pw_scale(eta, -1.0);
  log.eta_norm = pw_l2_norm(eta);
  return eta;
}

// ---------------------------------------------------------------------------
// WeightFamily
// ---------------------------------------------------------------------------

WeightFamily::WeightFamily(FeStore& store, int r, ZCorruption corruption)
    : store_(store), r_(r), corruption_(corruption) {}

const PiecewiseFormD& WeightFamily::z(SimplexRef sigma) const {
  std::lock_guard<std::mutex> lock(mtx_);
  auto it = z_.find(key(sigma));
  if (it == z_.end()) throw Error("WeightFamily: weight not built for this simplex");
  return it->second;
}

const ZLog& WeightFamily::log(SimplexRef sigma) const {
  std::lock_guard<std::mutex> lock(mtx_);
  return logs_.at(key(sigma));
}

double WeightFamily::pair(SimplexRef sigma, const PiecewiseFormD& u) const {
  return pw_l2_inner(z(sigma), u);
}

PiecewiseFormD WeightFamily::boundary_weight(SimplexRef sigma) const {
  const auto& cx = store_.cx();
  PiecewiseFormD acc = pw_zero<double>(cx, sigma.dim - 1);
  for (const auto& [f, sgn] : cx.faces(sigma.dim, sigma.idx)) {
    acc = pw_add(acc, pw_scale(z({sigma.dim - 1, f}), static_cast<double>(sgn)));
  }
  return acc;
}

PiecewiseFormD WeightFamily::lowest_order(SimplexRef sigma, ZLog& log) const {
  const auto& cx = store_.cx();
  auto es_cells = cx.extended_star_cells(sigma);
  double vol = 0.0;
  for (int c : es_cells) vol += cx.cell_volume(c);
  PiecewiseFormD eta = pw_zero<double>(cx, 0);
  for (int c : es_cells) {
    PolyFormD f = pf_zero<double>({cx.n(), c}, 0);
    f.comp[0u] = PolyD::constant(1.0 / vol);
    eta.piece[c] = f;
  }
  log.potential_degree = 0;
  log.eta_norm = pw_l2_norm(eta);

  const int p = cx.simplex(sigma).v[0];
  PiecewiseFormD bub = bubble_from_cells<double>(cx, es_cells);

  auto rhs = [&](const PiecewiseFormD& u) {
    // u(p) - <eta, u>
    double up = 0.0;
    for (int c : cx.star_cells({0, p})) {
      auto it = u.piece.find(c);
      if (it == u.piece.end()) continue;
      auto pos = cx.vertex_positions_in({0, p}, {cx.n(), c});
      std::vector<double> lam(cx.n() + 1, 0.0);
      lam[pos[0]] = 1.0;
      up = eval_form(it->second, cx.n(), lam)[0];
      break;
    }
    return up - pw_l2_inner(eta, u);
  };
  auto [v, res] = bubble_solve(store_, sigma, r_, 0, bub, rhs);
  log.bubble_residual = res;
  PiecewiseFormD correction = pw_delta(pw_mult(bub, pw_d(v)));
  return pw_add(eta, correction);
}

PiecewiseFormD WeightFamily::step(SimplexRef sigma, ZLog& log) const {
  const auto& cx = store_.cx();
  const int k = sigma.dim;
  auto es_cells = cx.extended_star_cells(sigma);

  PiecewiseFormD z_prev = boundary_weight(sigma);
  if (corruption_.kind == ZCorruption::Kind::SkipMeanZero && k == 1) {
    // negative control: shift the data off its compatibility condition
    PolyFormD junk = pf_zero<double>({cx.n(), es_cells[0]}, 0);
    junk.comp[0u] = PolyD::constant(1.0);
    PiecewiseFormD shift = pw_zero<double>(cx, 0);
    shift.piece[es_cells[0]] = junk;
    z_prev = pw_add(z_prev, shift);
  }
  PiecewiseFormD eta =
      potential_eta(store_, sigma, z_prev, log,
                    corruption_.kind == ZCorruption::Kind::SkipMeanZero);

  PiecewiseFormD bub = bubble_from_cells<double>(cx, es_cells);

  auto rhs = [&](const PiecewiseFormD& u) {
    return de_rham_value(cx, u, sigma) - pw_l2_inner(eta, u);
  };
  auto [v, res] = bubble_solve(store_, sigma, r_, k, bub, rhs);
  log.bubble_residual = res;
  PiecewiseFormD correction = pw_delta(pw_mult(bub, pw_d(v)));
  return pw_add(eta, correction);
}

void WeightFamily::build_one(SimplexRef sigma) {
  {
    std::lock_guard<std::mutex> lock(mtx_);
    if (z_.count(key(sigma))) return;
  }
  ZLog log;
  log.sigma = sigma;
  PiecewiseFormD Z =
      (sigma.dim == 0) ? lowest_order(sigma, log) : step(sigma, log);
  log.norm = pw_l2_norm(Z);

  // patch-space duality residual: <Z, u> = R u(sigma) over the local space
  {
    const auto& cx = store_.cx();
    auto es_cells = cx.extended_star_cells(sigma);
    auto space = store_.space(es_cells, r_, sigma.dim);
    double werr = 0.0;
    for (const auto& u : space->basis()) {
      double lhs = pw_l2_inner(Z, u);
      double rhs = de_rham_value(cx, u, sigma);
      double scale = 1.0 + pw_l2_norm_on(u, es_cells) * log.norm;
      werr = std::max(werr, std::abs(lhs - rhs) / scale);
    }
    log.patch_duality_err = werr;
  }

  std::lock_guard<std::mutex> lock(mtx_);
  z_[key(sigma)] = std::move(Z);
  logs_[key(sigma)] = log;
}

void WeightFamily::build_all(int kmax) {
  const auto& cx = store_.cx();
  for (int k = 0; k <= std::min(kmax, cx.n()); ++k) {
    std::vector<SimplexRef> level;
    for (int i = 0; i < cx.num(k); ++i) level.push_back({k, i});
    parallel_for(level.size(), [&](std::size_t i) { build_one(level[i]); });
  }
}

void WeightFamily::build_for(const std::vector<SimplexRef>& sigmas) {
  // close under faces, then build level by level
  std::set<std::pair<int, int>> need;
  std::function<void(SimplexRef)> close = [&](SimplexRef s) {
    if (!need.insert(key(s)).second) return;
    if (s.dim == 0) return;
    for (const auto& [f, sgn] : store_.cx().faces(s.dim, s.idx)) {
      (void)sgn;
      close({s.dim - 1, f});
    }
  };
  for (auto s : sigmas) close(s);
  for (int k = 0; k <= store_.cx().n(); ++k) {
    std::vector<SimplexRef> level;
    for (const auto& [d, i] : need) {
      if (d == k) level.push_back({d, i});
    }
    parallel_for(level.size(), [&](std::size_t i) { build_one(level[i]); });
  }
}

// ---------------------------------------------------------------------------
// Verification
// ---------------------------------------------------------------------------

std::vector<ZCheck> verify_weight_family(WeightFamily& family, int kmax, unsigned rng_seed) {
  auto& store = family.store();
  const auto& cx = store.cx();
  const int n = cx.n();
  const double tol = tolerances().suite;
  std::vector<ZCheck> checks;
  std::mt19937_64 rng(rng_seed);

  ZCheck zz0{"ZZ0r", 0.0, tol, true};
  ZCheck zz2{"ZZ2r", 0.0, tolerances().exact_identity, true};
  ZCheck zz3{"ZZ3r", 0.0, 0.5, true}; // flag-style: 0 pass / 1 fail
  ZCheck hdelta{"Z_hdelta", 0.0, tolerances().exact_identity, true};
  ZCheck compat{"Z_compat_meanzero", 0.0, 1e-8, true};
  ZCheck potres{"Z_potential_residual", 0.0, 1e-7, true};

  for (int k = 0; k <= std::min(kmax, n); ++k) {
    auto space = store.mesh_space(family.r(), k);
    for (int i = 0; i < cx.num(k); ++i) {
      SimplexRef sigma{k, i};
      if (!family.has(sigma)) continue;
      const auto& Z = family.z(sigma);
      const auto& lg = family.log(sigma);
      auto es = cx.extended_star_cells(sigma);

      // ZZ0r against every global basis member meeting the patch
      for (const auto& u : space->basis()) {
        bool meets = false;
        for (int c : u.support()) {
          if (std::binary_search(es.begin(), es.end(), c)) {
            meets = true;
            break;
          }
        }
        double rhs = de_rham_value(cx, u, sigma);
        if (!meets && rhs == 0.0) continue;
        double lhs = family.pair(sigma, u);
        double scale = 1.0 + pw_l2_norm(u) * lg.norm;
        zz0.max_err = std::max(zz0.max_err, std::abs(lhs - rhs) / scale);
      }

      // ZZ2r: delta Z(sigma) = Z(boundary sigma) in L2
      if (k >= 1) {
        PiecewiseFormD lhs = pw_delta(Z);
        PiecewiseFormD rhs = family.boundary_weight(sigma);
        double scale = 1.0 + pw_l2_norm(rhs);
        zz2.max_err = std::max(zz2.max_err, pw_l2_norm(pw_sub(lhs, rhs)) / scale);
      }

      // ZZ3r: support containment is exact (structural)
      for (int c : Z.support()) {
        if (!std::binary_search(es.begin(), es.end(), c)) {
          zz3.pass = false;
          zz3.max_err = 1.0;
        }
      }

      // membership in H-delta with vanishing star trace
      auto rep = hdelta_conformity(Z);
      double hscale = 1.0 + rep.scale;
      hdelta.max_err = std::max(hdelta.max_err,
                                std::max(rep.max_facet_jump, rep.max_boundary_trace) / hscale);

      compat.max_err = std::max(compat.max_err, lg.compat_residual);
      potres.max_err = std::max(potres.max_err, lg.potential_residual);
    }
  }

  // inverse estimate (dr0) and the bubble norm equivalence (bubble1) on
  // random finite element fields of the mesh space
  ZCheck dr0{"dr0_inverse_estimate", 0.0, 0.0, true};
  ZCheck bub1{"bubble1_equivalence", 0.0, 0.0, true};
  {
    std::uniform_real_distribution<double> unif(-1, 1);
    for (int k = 0; k <= std::min(kmax, n); ++k) {
      auto space = store.mesh_space(family.r(), k);
      for (int trial = 0; trial < 3; ++trial) {
        Vector coeff(space->dim());
        for (int i = 0; i < space->dim(); ++i) coeff(i) = unif(rng);
        PiecewiseFormD u = space->combine(coeff);
        int idx = std::min(cx.num(k) - 1, trial);
        SimplexRef sigma{k, idx};
        auto es = cx.extended_star_cells(sigma);
        double h = cx.h(sigma);
        double R = de_rham_value(cx, u, sigma);
        double un = pw_l2_norm_on(u, es);
        if (un > 0) {
          dr0.max_err =
              std::max(dr0.max_err, std::abs(R) / (std::pow(h, -0.5 * n + k) * un));
        }
        PiecewiseFormD bub = bubble<double>(cx, BubbleKind::ExtendedStar, sigma);
        PiecewiseFormD du = pw_d(u);
        if (k < n) {
          PiecewiseFormD bdu = pw_mult(bub, du);
          double denom = pw_l2_norm(bdu);
          // ||sqrt(bubble) du||^2 through the bubble-weighted Gram
          double num2 = pw_gram(cx, {du}, {du}, es, 4 * family.r() + 2 * n + 2, &bub)(0, 0);
          if (denom > 0) {
            bub1.max_err = std::max(bub1.max_err, std::sqrt(std::max(0.0, num2)) / denom);
          }
        }
      }
    }
  }

  zz0.pass = zz0.max_err <= zz0.tol;
  zz2.pass = zz2.max_err <= zz2.tol;
  hdelta.pass = hdelta.max_err <= hdelta.tol;
  compat.pass = compat.max_err <= compat.tol;
  potres.pass = potres.max_err <= potres.tol;
  dr0.tol = bub1.tol = -1.0; // reported constants, stability judged across levels
  checks = {zz0, zz2, zz3, hdelta, compat, potres, dr0, bub1};
  return checks;
}

} // namespace feec
