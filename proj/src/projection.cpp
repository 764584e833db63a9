#include "feec/projection.hpp"

namespace feec {

Cochain de_rham(const SimplicialComplex& cx, const PiecewiseFormD& u, int k) {
  if (u.k != k) throw Error("de_rham: degree mismatch");
  Cochain X;
  X.degree = k;
  for (int i = 0; i < cx.num(k); ++i) {
    double v = de_rham_value(cx, u, {k, i});
    if (v != 0.0) X.coeff[i] = v;
  }
  return X;
}

Cochain de_rham(const SimplicialComplex& cx, const InputForm& u) {
  if (u.exact()) return de_rham(cx, *u.field, u.k);
  if (u.k < cx.n()) {
    throw Error("de_rham: callback inputs have no trace on lower-dimensional simplices");
  }
  // top degree: integrate the volume component cellwise
  Cochain X;
  X.degree = u.k;
  const int n = cx.n();
  int qdeg = u.quad_degree > 0 ? u.quad_degree : 2 * (n + 2);
  for (int c = 0; c < cx.num_cells(); ++c) {
    Geom<double> g = make_geom<double>(cx, {n, c});
    // integral of the pullback: pair against the edge minor of the full mask
    double minor = g.edge_minor((1u << n) - 1u);
    double val = integrate_callback(
        cx, c,
        [&](const std::vector<double>& lam) { return u.callback(c, lam)[0]; }, qdeg);
    // integrate_callback applies the measure; the orientation factor is the
    // sign of the chart determinant
    X.coeff[c] = (minor < 0 ? -1.0 : 1.0) * val;
  }
  return X;
}

PiecewiseFormD whitney_interpolant(const SimplicialComplex& cx, const Cochain& X) {
  PiecewiseFormD acc = pw_zero<double>(cx, X.degree);
  for (const auto& [i, c] : X.coeff) {
    if (c == 0.0) continue;
    acc = pw_add(acc, pw_scale(whitney_form<double>(cx, {X.degree, i}), c));
  }
  return acc;
}

double callback_pairing(const SimplicialComplex& cx, const PiecewiseFormD& w, const InputForm& u) {
  int qdeg = u.quad_degree > 0 ? u.quad_degree : 4 * (cx.n() + 2);
  auto masks = masks_of(cx.n(), w.k);
  double acc = 0.0;
  for (const auto& [c, f] : w.piece) {
    const auto& rule = rule_for(cx.n(), qdeg + f.poly_degree());
    double fact = 1.0;
    for (int j = 2; j <= cx.n(); ++j) fact *= j;
    double scale = cx.cell_volume(c) * fact;
    for (const auto& qp : rule.points) {
      auto a = eval_form(f, cx.n(), qp.lambda);
      auto b = u.callback(c, qp.lambda);
      double dot = 0.0;
      for (std::size_t m = 0; m < masks.size(); ++m) dot += a[m] * b[m];
      acc += qp.w * scale * dot;
    }
  }
  return acc;
}

// ---------------------------------------------------------------------------
// UTable
// ---------------------------------------------------------------------------

const std::vector<PiecewiseFormD>& UTable::level(SimplexRef tau, int k) {
  auto key = std::make_tuple(tau.dim, tau.idx, k);
  {
    std::lock_guard<std::mutex> lock(mtx_);
    auto it = table_.find(key);
    if (it != table_.end()) return it->second;
  }
  const auto& cx = store_.cx();
  const FaceData& fd = store_.face(tau, r_, k);
  std::vector<PiecewiseFormD> fields;
  const int nz = static_cast<int>(fd.zimage.size());
  const int np = static_cast<int>(fd.pbasis.size());
  if (np > 0) {
    auto st_cells = cx.star_cells(tau);
    auto stspace = store_.space(st_cells, r_, k);
    auto mbasis = stspace->m_basis();
    PiecewiseFormD bub = bubble_from_cells<double>(cx, st_cells);
    int qdeg = 2 * r_ + cx.n() + 3;

    Matrix A;
    std::unique_ptr<Eigen::LLT<Matrix>> allt;
    if (!mbasis.empty() && nz > 0) {
      A = pw_gram(cx, mbasis, mbasis, st_cells, qdeg, &bub);
      allt = std::make_unique<Eigen::LLT<Matrix>>(A);
      if (allt->info() != Eigen::Success) {
        throw Error("UTable: bubble-weighted Gram not SPD");
      }
    }
    for (int j = 0; j < np; ++j) {
      if (j < nz) {
        // exact part: bubble-weighted dual solve in M(st(tau))
        Vector rhs(mbasis.size());
        for (std::size_t i = 0; i < mbasis.size(); ++i) {
          auto tr = pw_trace(mbasis[i], tau);
          rhs(i) = tr ? l2_inner_on(cx, tau, fd.pbasis[j], *tr,
                                    fd.pbasis[j].poly_degree() + tr->poly_degree() + 2)
                      : 0.0;
        }
        Vector beta = allt ? Vector(allt->solve(rhs)) : Vector();
        PiecewiseFormD field = pw_zero<double>(cx, k);
        for (std::size_t i = 0; i < mbasis.size(); ++i) {
          if (beta.size() && beta(i) != 0.0) {
            field = pw_add(field, pw_scale(mbasis[i], beta(i)));
          }
        }
        fields.push_back(pw_mult(bub, field));
      } else {
        // complement part through the next level: U(tau, g) = delta U(tau, dg)
        const auto& up = level(tau, k + 1);
        int idx = j - nz; // zimage alignment at level k+1
        fields.push_back(pw_delta(up.at(idx)));
      }
    }
  }
  std::lock_guard<std::mutex> lock(mtx_);
  auto [it, fresh] = table_.try_emplace(key, std::move(fields));
  (void)fresh;
  return it->second;
}

const PiecewiseFormD& UTable::field(SimplexRef tau, int k, int j) {
  const auto& fields = level(tau, k);
  return fields.at(j);
}

int UTable::count(SimplexRef tau, int k) { return static_cast<int>(level(tau, k).size()); }

// ---------------------------------------------------------------------------
// ProjectionOperator
// ---------------------------------------------------------------------------

ProjectionOperator::ProjectionOperator(FeStore& store, WeightFamily& weights, UTable& utable,
                                       int r, int k)
    : store_(store), weights_(weights), utable_(utable), r_(r), k_(k) {
  if (weights.r() != r || utable.r() != r) {
    throw Error("ProjectionOperator: mismatched degrees between the tables");
  }
  const auto& cx = store_.cx();
  whitney_.reserve(cx.num(k));
  for (int i = 0; i < cx.num(k); ++i) whitney_.push_back(whitney_form<double>(cx, {k, i}));
}

double ProjectionOperator::weight_pairing(SimplexRef sigma, const InputForm& u) const {
  const auto& Z = weights_.z(sigma);
  if (u.exact()) return pw_l2_inner(Z, *u.field);
  return callback_pairing(store_.cx(), Z, u);
}

double ProjectionOperator::u_pairing(SimplexRef tau, int j, const InputForm& u) const {
  const auto& U = utable_.field(tau, k_, j);
  if (u.exact()) return pw_l2_inner(U, *u.field);
  return callback_pairing(store_.cx(), U, u);
}

PiecewiseFormD ProjectionOperator::pi_low(const InputForm& u) const {
  const auto& cx = store_.cx();
  PiecewiseFormD acc = pw_zero<double>(cx, k_);
  for (int i = 0; i < cx.num(k_); ++i) {
    double c = weight_pairing({k_, i}, u);
    if (c != 0.0) acc = pw_add(acc, pw_scale(whitney_[i], c));
  }
  return acc;
}

PiecewiseFormD ProjectionOperator::q_op(const InputForm& u) const {
  const auto& cx = store_.cx();
  auto space = store_.mesh_space(r_, k_);
  PiecewiseFormD acc = pw_zero<double>(cx, k_);
  for (const auto& b : space->blocks()) {
    int np = b.count - b.nvol;
    if (np == 0) continue;
    auto members = space->geometric_block(b.tau);
    for (int j = 0; j < np; ++j) {
      double c = u_pairing(b.tau, j, u);
      if (c != 0.0) acc = pw_add(acc, pw_scale(members[b.nvol + j], c));
    }
  }
  return acc;
}

PiecewiseFormD ProjectionOperator::project(const InputForm& u) const {
  PiecewiseFormD low = pi_low(u);
  // pi u = low + Q(u) - Q(low) by linearity of the correction
  PiecewiseFormD qu = q_op(u);
  InputForm lowin;
  lowin.k = k_;
  lowin.field = &low;
  PiecewiseFormD qlow = q_op(lowin);
  return pw_add(low, pw_sub(qu, qlow));
}

PiecewiseFormD ProjectionOperator::pi_low(const PiecewiseFormD& u) const {
  InputForm in;
  in.k = k_;
  in.field = &u;
  return pi_low(in);
}
PiecewiseFormD ProjectionOperator::q_op(const PiecewiseFormD& u) const {
  InputForm in;
  in.k = k_;
  in.field = &u;
  return q_op(in);
}
PiecewiseFormD ProjectionOperator::project(const PiecewiseFormD& u) const {
  InputForm in;
  in.k = k_;
  in.field = &u;
  return project(in);
}

Matrix ProjectionOperator::matrix() const {
  auto space = store_.mesh_space(r_, k_);
  Matrix P(space->dim(), space->dim());
  for (int m = 0; m < space->dim(); ++m) {
    PiecewiseFormD img = project(space->basis()[m]);
    P.col(m) = space->coefficients_of(img);
  }
  return P;
}

namespace {
std::vector<SimplexRef> faces_of_cell(const SimplicialComplex& cx, int cell, int dim) {
  const auto& v = cx.simplex({cx.n(), cell}).v;
  std::vector<SimplexRef> out;
  std::vector<int> pick;
  std::function<void(std::size_t)> gen = [&](std::size_t from) {
    if (static_cast<int>(pick.size()) == dim + 1) {
      auto idx = cx.find(dim, pick);
      if (idx) out.push_back({dim, *idx});
      return;
    }
    for (std::size_t i = from; i < v.size(); ++i) {
      pick.push_back(v[i]);
      gen(i + 1);
      pick.pop_back();
    }
  };
  gen(0);
  return out;
}
} // namespace

PolyFormD ProjectionOperator::project_on_cell(const InputForm& u, int cell) const {
  const auto& cx = store_.cx();
  const int n = cx.n();
  SimplexRef T{n, cell};
  auto es = cx.extended_star_cells(T);

  // weights of every k-face of the extended star
  std::set<std::pair<int, int>> sig_set;
  std::vector<SimplexRef> sigmas;
  for (int c : es) {
    for (const auto& s : faces_of_cell(cx, c, k_)) {
      if (sig_set.insert({s.dim, s.idx}).second) sigmas.push_back(s);
    }
  }
  weights_.build_for(sigmas);

  // lowest-order part, valid on all of es(T)
  PiecewiseFormD low = pw_zero<double>(cx, k_);
  for (const auto& s : sigmas) {
    double c = weight_pairing(s, u);
    if (c == 0.0) continue;
    for (int cc : cx.star_cells(s)) {
      if (!std::binary_search(es.begin(), es.end(), cc)) continue;
      auto it = whitney_[s.idx].piece.find(cc);
      if (it == whitney_[s.idx].piece.end()) continue;
      PolyFormD scaled = pf_scale(it->second, c);
      auto [pit, fresh] = low.piece.try_emplace(cc, scaled);
      if (!fresh) pit->second = pf_add(pit->second, scaled);
    }
  }

  PolyFormD out = low.piece.count(cell) ? low.piece.at(cell) : pf_zero<double>(T, k_);
  // correction from the blocks of the cell itself
  auto space = store_.mesh_space(r_, k_);
  InputForm lowin;
  lowin.k = k_;
  lowin.field = &low;
  for (int d = k_; d <= std::min(n, r_ + k_ - 1); ++d) {
    for (const auto& tau : faces_of_cell(cx, cell, d)) {
      int bi = space->block_index(tau);
      if (bi < 0) continue;
      const auto& blk = space->blocks()[bi];
      int np = blk.count - blk.nvol;
      if (np == 0) continue;
      auto members = space->geometric_block(tau);
      for (int j = 0; j < np; ++j) {
        double c = u_pairing(tau, j, u) - u_pairing(tau, j, lowin);
        if (c == 0.0) continue;
        auto it = members[blk.nvol + j].piece.find(cell);
        if (it != members[blk.nvol + j].piece.end()) {
          out = pf_add(out, pf_scale(it->second, c));
        }
      }
    }
  }
  return out;
}

} // namespace feec
