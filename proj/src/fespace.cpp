#include "feec/fespace.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace feec {

namespace {

long binom(long n, long k) {
  if (k < 0 || k > n) return 0;
  long r = 1;
  for (long i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// (mask, exponent) -> column index, grown on demand
struct CoordIndexer {
  std::map<std::pair<Mask, Expo>, int> index;
  int of(Mask m, Expo e) {
    auto [it, fresh] = index.try_emplace({m, e}, static_cast<int>(index.size()));
    (void)fresh;
    return it->second;
  }
};

// canonical coordinates: tangential part, homogenized to `target`. Entries at
// roundoff level relative to the raw coefficient scale of u are dropped so
// that identically-vanishing constraints do not masquerade as rank.
void canonical_rows(const Geom<double>& g, const PolyFormD& u, int target, CoordIndexer& ix,
                    std::vector<std::map<int, double>>& rows, int row) {
  double scale = 0.0;
  for (const auto& [m, p] : u.comp) {
    for (const auto& [e, c] : p.terms) scale = std::max(scale, std::abs(c));
  }
  const double floor = 1e-13 * std::max(scale, 1e-300);
  PolyFormD t = tangential_part(g, u);
  for (const auto& [m, p] : t.comp) {
    PolyD h = p.homogenized(target, g.dim + 1);
    for (const auto& [e, c] : h.terms) {
      if (std::abs(c) > floor) rows[row][ix.of(m, e)] += c;
    }
  }
}

Matrix densify(const std::vector<std::map<int, double>>& rows, int cols) {
  Matrix M = Matrix::Zero(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (const auto& [j, v] : rows[i]) M(i, j) = v;
  }
  return M;
}

std::vector<PolyFormD> combine_forms(const std::vector<PolyFormD>& basis, const Matrix& combos) {
  std::vector<PolyFormD> out;
  for (int j = 0; j < combos.cols(); ++j) {
    PolyFormD acc = pf_zero<double>(basis.empty() ? SimplexRef{} : basis[0].carrier,
                                    basis.empty() ? 0 : basis[0].k);
    for (int i = 0; i < combos.rows(); ++i) {
      if (combos(i, j) != 0.0) acc = pf_add(acc, pf_scale(basis[i], combos(i, j)));
    }
    out.push_back(acc);
  }
  return out;
}

// AFW index pairs (alpha, sigma) over local positions 0..d
struct AfwPair {
  Expo alpha;
  std::vector<int> sigma;
};

void enumerate_alphas(int nvars, int total, std::vector<Expo>& out) {
  std::function<void(Expo, int, int)> gen = [&](Expo e, int var, int left) {
    if (var == nvars - 1) {
      out.push_back(expo_set(e, var, left));
      return;
    }
    for (int p = 0; p <= left; ++p) gen(expo_set(e, var, p), var + 1, left - p);
  };
  if (nvars > 0) gen(0u, 0, total);
}

void enumerate_subsets(int d, int size, std::vector<std::vector<int>>& out) {
  std::vector<int> cur;
  std::function<void(int)> gen = [&](int from) {
    if (static_cast<int>(cur.size()) == size) {
      out.push_back(cur);
      return;
    }
    for (int v = from; v <= d; ++v) {
      cur.push_back(v);
      gen(v + 1);
      cur.pop_back();
    }
  };
  gen(0);
}

/// Spanning-pair rule of the local trimmed space: smallest index touched by
/// (alpha, sigma) must lie in sigma. With `covering`, additionally
/// supp(alpha) + sigma = all positions (the trace-free block rule).
std::vector<AfwPair> afw_pairs(int d, int r, int k, bool covering) {
  std::vector<AfwPair> pairs;
  if (k > d || r < 1) return pairs;
  std::vector<Expo> alphas;
  enumerate_alphas(d + 1, r - 1, alphas);
  std::vector<std::vector<int>> sigmas;
  enumerate_subsets(d, k + 1, sigmas);
  for (const auto& sig : sigmas) {
    for (Expo a : alphas) {
      int low = sig[0];
      bool covers = true;
      Mask touched = 0;
      for (int p = 0; p <= d; ++p) {
        if (expo_get(a, p) > 0) {
          low = std::min(low, p);
          touched |= 1u << p;
        }
      }
      for (int p : sig) touched |= 1u << p;
      if (covering) {
        covers = (touched == (1u << (d + 1)) - 1u);
        if (!covers) continue;
      }
      if (std::find(sig.begin(), sig.end(), low) == sig.end()) continue;
      pairs.push_back({a, sig});
    }
  }
  return pairs;
}

PolyFormD monomial_times_whitney(const Geom<double>& g, SimplexRef carrier, Expo alpha,
                                 const std::vector<int>& sigma_positions) {
  PolyFormD w = whitney_on(g, carrier, sigma_positions);
  PolyD mono;
  mono.terms.push_back({alpha, 1.0});
  PolyFormD out = pf_zero<double>(carrier, w.k);
  for (const auto& [m, p] : w.comp) out.comp[m] = p * mono;
  return out;
}

int needed_degree(const PolyFormD& a, const PolyFormD& b) {
  return a.poly_degree() + b.poly_degree() + 1;
}

} // namespace

long dim_p_lambda(int r, int j, int d) {
  if (r < 0 || j < 0 || j > d) return 0;
  return binom(r + d, d) * binom(d, j);
}

long dim_trimmed(int r, int k, int d) {
  if (r < 1 || k < 0 || k > d) return 0;
  return binom(r + d, r + k) * binom(r + k - 1, k);
}

long dim_trace_free(int r, int k, int d) { return dim_p_lambda(r + k - d - 1, d - k, d); }

// ---------------------------------------------------------------------------
// Patch
// ---------------------------------------------------------------------------

Patch make_patch(const SimplicialComplex& cx, std::vector<int> cells) {
  Patch p;
  p.cx = &cx;
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  p.cells = std::move(cells);
  const int n = cx.n();
  p.faces.assign(n + 1, {});
  p.sub_boundary.assign(n + 1, {});
  std::vector<std::set<int>> present(n + 1);
  for (int c : p.cells) present[n].insert(c);
  for (int d = n; d >= 1; --d) {
    for (int i : present[d]) {
      for (const auto& [f, sgn] : cx.faces(d, i)) {
        (void)sgn;
        present[d - 1].insert(f);
      }
    }
  }
  for (int d = 0; d <= n; ++d) p.faces[d] = {present[d].begin(), present[d].end()};

  // boundary facets: exactly one patch cell among the cofaces
  std::set<int> bfacets;
  for (int f : p.faces[n - 1]) {
    int owners = 0;
    for (int c : cx.cofaces(n - 1, f)) {
      if (p.contains_cell(c)) ++owners;
    }
    if (owners == 1) bfacets.insert(f);
  }
  p.sub_boundary[n - 1] = bfacets;
  for (int d = n - 1; d >= 1; --d) {
    for (int i : p.sub_boundary[d]) {
      for (const auto& [f, sgn] : cx.faces(d, i)) {
        (void)sgn;
        p.sub_boundary[d - 1].insert(f);
      }
    }
  }
  return p;
}

std::vector<int> Patch::star_in(SimplexRef tau) const {
  std::vector<int> out;
  for (int c : cx->star_cells(tau)) {
    if (contains_cell(c)) out.push_back(c);
  }
  return out;
}

std::optional<PolyFormD> pw_trace(const PiecewiseFormD& u, SimplexRef tau, const Patch* within) {
  const auto& cx = *u.cx;
  for (int c : cx.star_cells(tau)) {
    if (within && !within->contains_cell(c)) continue;
    auto it = u.piece.find(c);
    if (it == u.piece.end()) continue;
    return trace_to_face(cx, it->second, tau);
  }
  return std::nullopt;
}

Matrix pw_gram(const SimplicialComplex& cx, const std::vector<PiecewiseFormD>& A,
               const std::vector<PiecewiseFormD>& B, const std::vector<int>& cells, int rule_degree,
               const PiecewiseFormD* weight) {
  Matrix G = Matrix::Zero(A.size(), B.size());
  const int n = cx.n();
  auto masks = masks_of(n, A.empty() ? 0 : A[0].k);
  const auto& rule = rule_for(n, rule_degree);
  const int npts = static_cast<int>(rule.points.size());
  const int ncomp = static_cast<int>(masks.size());
  double fact = 1.0;
  for (int j = 2; j <= n; ++j) fact *= j;

  for (int c : cells) {
    std::vector<int> ia, ib;
    for (std::size_t i = 0; i < A.size(); ++i) {
      if (A[i].piece.count(c)) ia.push_back(static_cast<int>(i));
    }
    for (std::size_t i = 0; i < B.size(); ++i) {
      if (B[i].piece.count(c)) ib.push_back(static_cast<int>(i));
    }
    if (ia.empty() || ib.empty()) continue;
    Vector w(npts);
    for (int q = 0; q < npts; ++q) {
      double wq = rule.points[q].w * fact * cx.cell_volume(c);
      if (weight) {
        auto it = weight->piece.find(c);
        double s = 0.0;
        if (it != weight->piece.end() && it->second.comp.count(0u)) {
          s = it->second.comp.at(0u).eval(rule.points[q].lambda);
        }
        wq *= s;
      }
      w(q) = wq;
    }
    Matrix EA(npts * ncomp, ia.size()), EB(npts * ncomp, ib.size());
    for (std::size_t col = 0; col < ia.size(); ++col) {
      const auto& f = A[ia[col]].piece.at(c);
      for (int q = 0; q < npts; ++q) {
        auto vals = eval_form(f, n, rule.points[q].lambda);
        for (int m = 0; m < ncomp; ++m) EA(q * ncomp + m, col) = vals[m];
      }
    }
    for (std::size_t col = 0; col < ib.size(); ++col) {
      const auto& f = B[ib[col]].piece.at(c);
      for (int q = 0; q < npts; ++q) {
        auto vals = eval_form(f, n, rule.points[q].lambda);
        for (int m = 0; m < ncomp; ++m) EB(q * ncomp + m, col) = vals[m] * w(q);
      }
    }
    Matrix block = EA.transpose() * EB;
    for (std::size_t i = 0; i < ia.size(); ++i) {
      for (std::size_t j = 0; j < ib.size(); ++j) G(ia[i], ib[j]) += block(i, j);
    }
  }
  return G;
}

// ---------------------------------------------------------------------------
// FaceData
// ---------------------------------------------------------------------------


std::shared_ptr<FaceData> FeStore::build_face(SimplexRef s, int r, int k) {
  auto fd = std::make_shared<FaceData>();
  fd->s = s;
  fd->r = r;
  fd->k = k;
  const int d = s.dim;
  if (k > d || r < 1) return fd;
  Geom<double> g = make_geom<double>(cx_, s);

  // full trimmed space from the spanning-pair rule
  for (const auto& pr : afw_pairs(d, r, k, /*covering*/ false)) {
    fd->full.push_back(tangential_part(g, monomial_times_whitney(g, s, pr.alpha, pr.sigma)));
  }
  if (static_cast<long>(fd->full.size()) != dim_trimmed(r, k, d)) {
    throw Error("FaceData: trimmed-space dimension mismatch");
  }

  // trace-free subspace as the nullspace of the facet-trace sampling
  if (d == 0) {
    fd->ring = fd->full;
  } else {
    // one coordinate block per facet; rows indexed (facet, member)
    CoordIndexer ix;
    std::vector<std::map<int, double>> tracerows;
    int nfacets = 0;
    for (const auto& [f, sgn] : cx_.faces(d, s.idx)) {
      (void)sgn;
      SimplexRef face{d - 1, f};
      Geom<double> gf = make_geom<double>(cx_, face);
      for (std::size_t m = 0; m < fd->full.size(); ++m) {
        tracerows.emplace_back();
        canonical_rows(gf, trace_to_face(cx_, fd->full[m], face), r, ix, tracerows,
                       static_cast<int>(tracerows.size()) - 1);
      }
      ++nfacets;
    }
    const int ncoords = static_cast<int>(ix.index.size());
    Matrix C = Matrix::Zero(static_cast<long>(ncoords) * nfacets, fd->full.size());
    for (int fi = 0; fi < nfacets; ++fi) {
      for (std::size_t m = 0; m < fd->full.size(); ++m) {
        for (const auto& [j, v] : tracerows[fi * fd->full.size() + m]) {
          C(static_cast<long>(fi) * ncoords + j, m) = v;
        }
      }
    }
    fd->ring = combine_forms(fd->full, nullspace(C));
  }
  if (static_cast<long>(fd->ring.size()) != dim_trace_free(r, k, d)) {
    throw Error("FaceData: trace-free dimension does not match the identity (716)");
  }


  // breve: mean-free constraint in the top intrinsic degree
  if (k == d && !fd->ring.empty()) {
    Matrix row(1, fd->ring.size());
    for (std::size_t i = 0; i < fd->ring.size(); ++i) {
      row(0, i) = integrate_over_carrier(g, fd->ring[i]);
    }
    fd->breve = combine_forms(fd->ring, nullspace(row));
  } else {
    fd->breve = fd->ring;
  }

  // kernel of d inside the trace-free space
  Matrix K; // ring coordinates of zker
  if (!fd->ring.empty()) {
    CoordIndexer ix;
    std::vector<std::map<int, double>> rows(fd->ring.size());
    std::vector<PolyFormD> dring(fd->ring.size());
    for (std::size_t m = 0; m < fd->ring.size(); ++m) {
      dring[m] = exterior_derivative(g, fd->ring[m]);
      canonical_rows(g, dring[m], std::max(0, r - 1) + 1, ix, rows, static_cast<int>(m));
    }
    Matrix C = densify(rows, static_cast<int>(ix.index.size())).transpose();
    K = nullspace(C);
    fd->zker = combine_forms(fd->ring, K);

    // complement of the kernel in the L2 inner product, orthonormal in ddc
    int qdeg = 2 * r + 2;
    Matrix G = Matrix::Zero(fd->ring.size(), fd->ring.size());
    Matrix Gd = Matrix::Zero(fd->ring.size(), fd->ring.size());
    for (std::size_t i = 0; i < fd->ring.size(); ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        G(i, j) = G(j, i) = l2_inner_on(cx_, s, fd->ring[i], fd->ring[j], qdeg);
        Gd(i, j) = Gd(j, i) = l2_inner_on(cx_, s, dring[i], dring[j], qdeg);
      }
    }
    Matrix comp = nullspace(Matrix(K.transpose() * G));
    std::vector<Vector> raw;
    for (int j = 0; j < comp.cols(); ++j) raw.push_back(comp.col(j));
    auto inner = [&](const Vector& a, const Vector& b) { return a.dot(Gd * b); };
    auto on = orthonormalize(raw, inner);
    Matrix Z(fd->ring.size(), on.size());
    for (std::size_t j = 0; j < on.size(); ++j) Z.col(j) = on[j];
    fd->zperp = combine_forms(fd->ring, Z);
  }

  // exact part: d of the (k-1)-level complement (index aligned)
  if (k >= 1) {
    const FaceData& below = face(s, r, k - 1);
    for (const auto& p : below.zperp) {
      fd->zimage.push_back(tangential_part(g, exterior_derivative(g, p)));
    }
  }
  fd->pbasis = fd->zimage;
  fd->pbasis.insert(fd->pbasis.end(), fd->zperp.begin(), fd->zperp.end());
  if (fd->pbasis.size() != fd->breve.size()) {
    throw Error("FaceData: p-basis count disagrees with the breve dimension (exactness failure): "
                "simplex dim " + std::to_string(d) + " idx " + std::to_string(s.idx) +
                " r " + std::to_string(r) + " k " + std::to_string(k) +
                " breve " + std::to_string(fd->breve.size()) +
                " zker " + std::to_string(fd->zker.size()) +
                " zimage " + std::to_string(fd->zimage.size()) +
                " zperp " + std::to_string(fd->zperp.size()));
  }

  if (k == d) fd->vol = vol_form(cx_, s);

  // ddc machinery
  const int nz = static_cast<int>(fd->zker.size());
  fd->zker_gram = Matrix::Zero(nz, nz);
  int qdeg = 2 * r + 2;
  for (int i = 0; i < nz; ++i) {
    for (int j = 0; j <= i; ++j) {
      fd->zker_gram(i, j) = fd->zker_gram(j, i) =
          l2_inner_on(cx_, s, fd->zker[i], fd->zker[j], qdeg);
    }
  }
  if (nz > 0) fd->zker_llt = Eigen::LLT<Matrix>(fd->zker_gram);
  if (fd->nvol()) fd->ylist.push_back(fd->vol);
  for (const auto& p : fd->pbasis) fd->ylist.push_back(p);
  for (const auto& y : fd->ylist) {
    Vector py(nz);
    for (int i = 0; i < nz; ++i) py(i) = l2_inner_on(cx_, s, y, fd->zker[i], qdeg);
    fd->y_proj_coeff.push_back(nz > 0 ? Vector(fd->zker_llt.solve(py)) : py);
    fd->y_d.push_back(exterior_derivative(g, y));
  }
  return fd;
}

const FaceData& FeStore::face(SimplexRef s, int r, int k) {
  auto key = std::make_tuple(s.dim, s.idx, r, k);
  {
    std::lock_guard<std::mutex> lock(mtx_);
    auto it = faces_.find(key);
    if (it != faces_.end()) return *it->second;
  }
  auto built = build_face(s, r, k);
  std::lock_guard<std::mutex> lock(mtx_);
  auto [it, fresh] = faces_.try_emplace(key, built);
  (void)fresh;
  return *it->second;
}

std::shared_ptr<FeSpace> FeStore::space(const std::vector<int>& cells, int r, int k) {
  std::vector<int> sorted = cells;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  auto key = std::make_tuple(sorted, r, k);
  {
    std::lock_guard<std::mutex> lock(mtx_);
    auto it = spaces_.find(key);
    if (it != spaces_.end()) return it->second;
  }
  auto built = std::make_shared<FeSpace>(*this, make_patch(cx_, sorted), r, k);
  std::lock_guard<std::mutex> lock(mtx_);
  auto [it, fresh] = spaces_.try_emplace(key, built);
  (void)fresh;
  return it->second;
}

std::shared_ptr<FeSpace> FeStore::mesh_space(int r, int k) {
  std::vector<int> all(cx_.num_cells());
  std::iota(all.begin(), all.end(), 0);
  return space(all, r, k);
}

double ddc_inner(const SimplicialComplex& cx, const FaceData& fd, const PolyFormD& a,
                 const PolyFormD& b) {
  const int nz = static_cast<int>(fd.zker.size());
  int qdeg = needed_degree(a, b) + 2 * fd.r;
  double val = 0.0;
  if (nz > 0) {
    Vector pa(nz), pb(nz);
    for (int i = 0; i < nz; ++i) {
      pa(i) = l2_inner_on(cx, fd.s, a, fd.zker[i], qdeg);
      pb(i) = l2_inner_on(cx, fd.s, b, fd.zker[i], qdeg);
    }
    val += pa.dot(fd.zker_llt.solve(pb));
  }
  Geom<double> g = make_geom<double>(cx, fd.s);
  val += l2_inner_on(cx, fd.s, exterior_derivative(g, a), exterior_derivative(g, b), qdeg);
  return val;
}

// ---------------------------------------------------------------------------
// FeSpace
// ---------------------------------------------------------------------------

FeSpace::FeSpace(FeStore& store, Patch patch, int r, int k)
    : store_(store), patch_(std::move(patch)), r_(r), k_(k) {
  const auto& cx = store_.cx();
  const int n = cx.n();
  for (int d = k; d <= std::min(n, r + k - 1); ++d) {
    for (int idx : patch_.faces[d]) {
      SimplexRef tau{d, idx};
      const FaceData& fd = store_.face(tau, r_, k_);
      int count = fd.nvol() + static_cast<int>(fd.pbasis.size());
      if (count == 0) continue;
      Block b;
      b.tau = tau;
      b.offset = dim_;
      b.nvol = fd.nvol();
      b.count = count;
      blocks_.push_back(b);
      dim_ += count;

      // working members of this block: covering spanning pairs lifted to the
      // star through the global hats
      auto star = patch_.star_in(tau);
      auto pairs = afw_pairs(d, r_, k_, /*covering*/ true);
      if (static_cast<long>(pairs.size()) != dim_trace_free(r_, k_, d)) {
        throw Error("FeSpace: covering-pair count disagrees with (716)");
      }
      for (const auto& pr : pairs) {
        PiecewiseFormD w = pw_zero<double>(cx, k_);
        for (int c : star) {
          SimplexRef cell{n, c};
          Geom<double> gc = make_geom<double>(cx, cell);
          auto pos = cx.vertex_positions_in(tau, cell);
          std::vector<int> sig(pr.sigma.size());
          for (std::size_t i = 0; i < pr.sigma.size(); ++i) sig[i] = pos[pr.sigma[i]];
          Expo alpha = 0;
          for (int p = 0; p <= d; ++p) {
            int e = expo_get(pr.alpha, p);
            if (e > 0) alpha = expo_set(alpha, pos[p], e);
          }
          w.piece[c] = monomial_times_whitney(gc, cell, alpha, sig);
        }
        basis_.push_back(std::move(w));
        basis_block_.push_back(static_cast<int>(blocks_.size()) - 1);
      }
    }
  }
  if (static_cast<int>(basis_.size()) != dim_) {
    throw Error("FeSpace: working basis does not match the dof count (917)");
  }
}

int FeSpace::block_of_dof(int dof) const {
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    if (dof >= blocks_[b].offset && dof < blocks_[b].offset + blocks_[b].count) {
      return static_cast<int>(b);
    }
  }
  return -1;
}

int FeSpace::block_index(SimplexRef tau) const {
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    if (blocks_[b].tau == tau) return static_cast<int>(b);
  }
  return -1;
}

double FeSpace::dof_value(int dof, const PiecewiseFormD& u) const {
  int bi = block_of_dof(dof);
  const Block& b = blocks_[bi];
  const FaceData& fd = store_.face(b.tau, r_, k_);
  auto tr = pw_trace(u, b.tau, &patch_);
  if (!tr) return 0.0;
  int j = dof - b.offset;
  const int nz = static_cast<int>(fd.zker.size());
  int qdeg = needed_degree(*tr, fd.ylist[j]) + 2 * r_;
  double val = 0.0;
  if (nz > 0) {
    Vector pa(nz);
    for (int i = 0; i < nz; ++i) pa(i) = l2_inner_on(store_.cx(), b.tau, *tr, fd.zker[i], qdeg);
    val += pa.dot(fd.y_proj_coeff[j]);
  }
  Geom<double> g = make_geom<double>(store_.cx(), b.tau);
  val += l2_inner_on(store_.cx(), b.tau, exterior_derivative(g, *tr), fd.y_d[j], qdeg);
  return val;
}

Vector FeSpace::dof_vector(const PiecewiseFormD& u) const {
  Vector out = Vector::Zero(dim_);
  const auto& cx = store_.cx();
  for (const Block& b : blocks_) {
    const FaceData& fd = store_.face(b.tau, r_, k_);
    auto tr = pw_trace(u, b.tau, &patch_);
    if (!tr) continue;
    const int nz = static_cast<int>(fd.zker.size());
    Geom<double> g = make_geom<double>(cx, b.tau);
    PolyFormD dtr = exterior_derivative(g, *tr);
    Vector pa(nz);
    int qdeg0 = tr->poly_degree() + 2 * r_ + 2;
    for (int i = 0; i < nz; ++i) pa(i) = l2_inner_on(cx, b.tau, *tr, fd.zker[i], qdeg0);
    for (int j = 0; j < b.count; ++j) {
      double val = (nz > 0) ? pa.dot(fd.y_proj_coeff[j]) : 0.0;
      int qdeg = dtr.poly_degree() + fd.y_d[j].poly_degree() + 2;
      val += l2_inner_on(cx, b.tau, dtr, fd.y_d[j], qdeg);
      out(b.offset + j) = val;
    }
  }
  return out;
}

void FeSpace::ensure_dof_matrix() const {
  std::lock_guard<std::mutex> lock(mtx_);
  if (dofmat_) return;
  auto D = std::make_unique<Matrix>(dim_, dim_);
  for (int m = 0; m < dim_; ++m) D->col(m) = dof_vector(basis_[m]);
  doflu_ = std::make_unique<Eigen::PartialPivLU<Matrix>>(*D);
  dofmat_ = std::move(D);
}

const Matrix& FeSpace::dof_matrix() const {
  ensure_dof_matrix();
  return *dofmat_;
}

Vector FeSpace::coefficients_of(const PiecewiseFormD& u) const {
  ensure_dof_matrix();
  return doflu_->solve(dof_vector(u));
}

PiecewiseFormD FeSpace::combine(const Vector& coeff) const {
  PiecewiseFormD acc = pw_zero<double>(store_.cx(), k_);
  for (int m = 0; m < dim_; ++m) {
    if (coeff(m) != 0.0) acc = pw_add(acc, pw_scale(basis_[m], coeff(m)));
  }
  return acc;
}

std::vector<PiecewiseFormD> FeSpace::geometric_block(SimplexRef tau) const {
  int bi = block_index(tau);
  if (bi < 0) return {};
  {
    std::lock_guard<std::mutex> lock(mtx_);
    auto it = members_.find(bi);
    if (it != members_.end()) return it->second;
  }
  const Block& b = blocks_[bi];
  auto star = patch_.star_in(tau);
  auto sub = store_.space(star, r_, k_);
  int sbi = sub->block_index(tau);
  if (sbi < 0) throw Error("geometric_block: block missing in star subpatch");
  const Block& sb = sub->blocks()[sbi];
  sub->ensure_dof_matrix();
  std::vector<PiecewiseFormD> members;
  for (int j = 0; j < b.count; ++j) {
    Vector rhs = Vector::Zero(sub->dim());
    rhs(sb.offset + j) = 1.0;
    Vector c = sub->doflu_->solve(rhs);
    double res = ((*sub->dofmat_) * c - rhs).norm();
    if (res > 1e-7) {
      throw Error("geometric_block: unisolvence residual " + std::to_string(res));
    }
    members.push_back(sub->combine(c));
  }
  std::lock_guard<std::mutex> lock(mtx_);
  members_[bi] = members;
  return members;
}

PiecewiseFormD FeSpace::geometric_member(int dof) const {
  int bi = block_of_dof(dof);
  auto mem = geometric_block(blocks_[bi].tau);
  return mem[dof - blocks_[bi].offset];
}

std::vector<int> FeSpace::m_dofs() const {
  std::vector<int> out;
  for (const Block& b : blocks_) {
    for (int j = b.nvol; j < b.count; ++j) out.push_back(b.offset + j);
  }
  return out;
}

std::vector<int> FeSpace::interior_dofs() const {
  std::vector<int> out;
  for (const Block& b : blocks_) {
    if (patch_.on_boundary(b.tau)) continue;
    for (int j = 0; j < b.count; ++j) out.push_back(b.offset + j);
  }
  return out;
}

std::vector<int> FeSpace::interior_member_indices() const {
  std::vector<int> out;
  for (int m = 0; m < dim_; ++m) {
    if (!patch_.on_boundary(blocks_[basis_block_[m]].tau)) out.push_back(m);
  }
  return out;
}

std::vector<PiecewiseFormD> FeSpace::m_basis() const {
  std::vector<PiecewiseFormD> out;
  for (const Block& b : blocks_) {
    if (b.count - b.nvol == 0) continue;
    auto mem = geometric_block(b.tau);
    for (int j = b.nvol; j < b.count; ++j) out.push_back(mem[j]);
  }
  return out;
}

FeSpace::UnisolvenceCert FeSpace::unisolvence_certificate() const {
  ensure_dof_matrix();
  UnisolvenceCert cert;
  cert.dim = dim_;
  Eigen::JacobiSVD<Matrix> svd(*dofmat_, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  double smin = sv(sv.size() - 1), smax = sv(0);
  cert.nonsingular = smin > tolerances().rank_rel * smax && smin > 0.0;
  cert.condition = (smin > 0) ? smax / smin : std::numeric_limits<double>::infinity();
  if (!cert.nonsingular) {
    Vector null = svd.matrixV().col(dim_ - 1);
    int worst = 0;
    null.cwiseAbs().maxCoeff(&worst);
    cert.offending = blocks_[block_of_dof(worst)].tau;
  }
  return cert;
}

// ---------------------------------------------------------------------------
// Module operations
// ---------------------------------------------------------------------------

PiecewiseFormD extend(FeSpace& space, SimplexRef sigma, const PolyFormD& rho) {
  int bi = space.block_index(sigma);
  if (bi < 0) return pw_zero<double>(space.store().cx(), space.k());
  const FaceData& fd = space.store().face(sigma, space.r(), space.k());
  auto members = space.geometric_block(sigma);
  PiecewiseFormD acc = pw_zero<double>(space.store().cx(), space.k());
  for (std::size_t j = 0; j < members.size(); ++j) {
    double c = ddc_inner(space.store().cx(), fd, rho, fd.ylist[j]);
    if (c != 0.0) acc = pw_add(acc, pw_scale(members[j], c));
  }
  return acc;
}

std::vector<PiecewiseFormD> g_basis(FeSpace& space, SimplexRef sigma) {
  return space.geometric_block(sigma);
}

std::map<std::pair<SimplexRef, int>, double> m_decompose(FeSpace& space, const PiecewiseFormD& u,
                                                         double tol) {
  const auto& cx = space.store().cx();
  // membership gate: all k-face integrals vanish
  double scale = std::max(1.0, pw_l2_norm(u));
  for (int i : space.patch().faces[space.k()]) {
    SimplexRef sig{space.k(), i};
    auto tr = pw_trace(u, sig, &space.patch());
    if (!tr) continue;
    Geom<double> g = make_geom<double>(cx, sig);
    double integral = integrate_over_carrier(g, *tr);
    if (std::abs(integral) > tol * scale) {
      throw Error("m_decompose: input has a nonvanishing face integral (" +
                  std::to_string(integral) + ")");
    }
  }
  std::map<std::pair<SimplexRef, int>, double> out;
  for (const auto& b : space.blocks()) {
    const FaceData& fd = space.store().face(b.tau, space.r(), space.k());
    auto tr = pw_trace(u, b.tau, &space.patch());
    if (!tr) continue;
    for (int j = b.nvol; j < b.count; ++j) {
      out[{b.tau, j - b.nvol}] = ddc_inner(cx, fd, *tr, fd.ylist[j]);
    }
  }
  return out;
}

ExactnessReport check_local_exactness(FeStore& store, SimplexRef tau, int r) {
  ExactnessReport rep;
  const int d = tau.dim;
  std::vector<const FaceData*> fds;
  for (int k = 0; k <= d; ++k) fds.push_back(&store.face(tau, r, k));
  // trace-free complex: 0 -> ring^0 -> ... -> ring^d -> R -> 0
  for (int k = 0; k <= d; ++k) {
    long dimk = static_cast<long>(fds[k]->ring.size());
    long kerk = static_cast<long>(fds[k]->zker.size());
    long rank_prev = (k == 0) ? 0 : static_cast<long>(fds[k - 1]->ring.size() - fds[k - 1]->zker.size());
    if (k < d) {
      rep.require(kerk == rank_prev, "ring exactness at degree " + std::to_string(k));
    } else {
      // at the top: the image of d is the mean-free subspace
      long target = (dimk > 0) ? dimk - 1 : 0;
      rep.require(rank_prev == target, "ring exactness at top degree");
    }
  }
  // breve complex: 0 -> breve^0 -> ... -> breve^d -> 0 via the p-basis counts
  for (int k = 0; k <= d; ++k) {
    long nb = static_cast<long>(fds[k]->breve.size());
    long nz = static_cast<long>(fds[k]->zimage.size());
    long np = static_cast<long>(fds[k]->zperp.size());
    rep.require(nb == nz + np, "breve exactness at degree " + std::to_string(k));
  }
  return rep;
}

ExactnessReport check_patch_exactness(FeStore& store, const std::vector<int>& cells, int r) {
  ExactnessReport rep;
  const int n = store.cx().n();
  std::vector<std::shared_ptr<FeSpace>> spaces;
  for (int k = 0; k <= n; ++k) spaces.push_back(store.space(cells, r, k));
  long rank_prev = 0;
  for (int k = 0; k < n; ++k) {
    // matrix of d: level k -> level k+1 in working coordinates
    Matrix Dk(spaces[k + 1]->dim(), spaces[k]->dim());
    double maxres = 0.0;
    for (int m = 0; m < spaces[k]->dim(); ++m) {
      PiecewiseFormD db = pw_d(spaces[k]->basis()[m]);
      Vector c = spaces[k + 1]->coefficients_of(db);
      double rel = pw_l2_norm(pw_sub(spaces[k + 1]->combine(c), db)) / (1.0 + pw_l2_norm(db));
      maxres = std::max(maxres, rel);
      Dk.col(m) = c;
    }
    rep.require(maxres < 1e-8, "d maps level " + std::to_string(k) + " into level " +
                                   std::to_string(k + 1));
    long rank = rank_of(Dk);
    long kerdim = spaces[k]->dim() - rank;
    long expect = (k == 0) ? 1 + rank_prev : rank_prev; // constants at level 0
    rep.require(kerdim == expect, "patch exactness at degree " + std::to_string(k));
    rank_prev = rank;
  }
  rep.require(rank_prev == spaces[n]->dim(), "d onto the top level");
  return rep;
}

double discrete_poincare_constant(FeStore& store, const std::vector<int>& cells, int r, int ell,
                                  double h) {
  auto space = store.space(cells, r, ell);
  const auto& cx = store.cx();
  int qdeg = 2 * r + 2 * cx.n();
  Matrix G = pw_gram(cx, space->basis(), space->basis(), space->patch().cells, qdeg);
  std::vector<PiecewiseFormD> dbasis;
  for (const auto& b : space->basis()) dbasis.push_back(pw_d(b));
  Matrix Gd = pw_gram(cx, dbasis, dbasis, space->patch().cells, qdeg);
  // the kernel dimension of d is read off the rank of the Gram of d-images,
  // with the declared rank tolerance; the first pencil eigenvalue above the
  // kernel block gives the constant
  Eigen::SelfAdjointEigenSolver<Matrix> esd(Gd);
  double lmax = esd.eigenvalues()(esd.eigenvalues().size() - 1);
  int kerdim = 0;
  for (int i = 0; i < esd.eigenvalues().size(); ++i) {
    if (esd.eigenvalues()(i) <= tolerances().rank_rel * std::max(lmax, 0.0)) ++kerdim;
  }
  auto [vals, vecs] = smallest_generalized_eigs(Gd, G, std::min(space->dim(), kerdim + 1));
  if (kerdim >= vals.size()) return 0.0;
  return 1.0 / (h * std::sqrt(std::max(vals(kerdim), 1e-300)));
}

} // namespace feec
