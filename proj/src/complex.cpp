#include "feec/complex.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace feec {

double simplex_measure(const Eigen::MatrixXd& pts) {
  const int d = static_cast<int>(pts.cols()) - 1;
  if (d == 0) return 1.0;
  Eigen::MatrixXd B(pts.rows(), d);
  for (int j = 0; j < d; ++j) B.col(j) = pts.col(j + 1) - pts.col(0);
  Eigen::MatrixXd G = B.transpose() * B;
  double det = G.determinant();
  if (det <= 0.0) return 0.0;
  double fact = 1.0;
  for (int j = 2; j <= d; ++j) fact *= j;
  return std::sqrt(det) / fact;
}

namespace {

int sort_with_sign(std::vector<int>& v) {
  // parity of the permutation that sorts v ascending
  int sign = 1;
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = i + 1; j < v.size(); ++j) {
      if (v[j] < v[i]) {
        std::swap(v[i], v[j]);
        sign = -sign;
      }
    }
  }
  return sign;
}

} // namespace

SimplicialComplex::SimplicialComplex(const Eigen::MatrixXd& vertices,
                                     const std::vector<std::vector<int>>& cells) {
  n_ = 0;
  if (cells.empty()) throw Error("build_complex: no cells");
  n_ = static_cast<int>(cells.front().size()) - 1;
  if (vertices.rows() != n_) {
    throw Error("build_complex: ambient dimension of vertices does not match cell arity");
  }
  X_ = vertices;
  const int nv = static_cast<int>(X_.cols());

  skel_.assign(n_ + 1, {});
  lookup_.assign(n_ + 1, {});
  cell_sign_.reserve(cells.size());

  // vertices 0..nv-1 are always present
  for (int i = 0; i < nv; ++i) {
    skel_[0].push_back(Simplex{{i}});
    lookup_[0][{i}] = i;
  }

  std::vector<std::vector<int>> sorted_cells;
  sorted_cells.reserve(cells.size());
  for (const auto& c : cells) {
    if (static_cast<int>(c.size()) != n_ + 1) throw Error("build_complex: inconsistent cell dimension");
    std::vector<int> s = c;
    int sign = sort_with_sign(s);
    for (int vi : s) {
      if (vi < 0 || vi >= nv) throw Error("build_complex: cell references invalid vertex");
    }
    for (std::size_t i = 1; i < s.size(); ++i) {
      if (s[i] == s[i - 1]) throw Error("build_complex: degenerate cell (repeated vertex)");
    }
    if (lookup_[n_].count(s)) throw Error("build_complex: duplicate cell");
    Eigen::MatrixXd pts(n_, n_ + 1);
    for (int j = 0; j <= n_; ++j) pts.col(j) = X_.col(s[j]);
    if (simplex_measure(pts) <= 1e-14) throw Error("build_complex: degenerate cell (zero volume)");
    lookup_[n_][s] = static_cast<int>(skel_[n_].size());
    skel_[n_].push_back(Simplex{s});
    cell_sign_.push_back(sign);
    sorted_cells.push_back(s);
  }

  // enumerate all subsimplices of each cell, dimension by dimension
  for (int k = 1; k < n_; ++k) {
    std::set<std::vector<int>> found;
    for (const auto& c : sorted_cells) {
      std::vector<int> pick(k + 1);
      std::vector<int> comb(k + 1);
      std::iota(comb.begin(), comb.end(), 0);
      while (true) {
        for (int i = 0; i <= k; ++i) pick[i] = c[comb[i]];
        found.insert(pick);
        int pos = k;
        while (pos >= 0 && comb[pos] == n_ - k + pos) --pos;
        if (pos < 0) break;
        ++comb[pos];
        for (int i = pos + 1; i <= k; ++i) comb[i] = comb[i - 1] + 1;
      }
    }
    for (const auto& s : found) {
      lookup_[k][s] = static_cast<int>(skel_[k].size());
      skel_[k].push_back(Simplex{s});
    }
  }

  // faces with alternating signs, cofaces
  faces_.assign(n_ + 1, {});
  cofaces_.assign(n_ + 1, {});
  for (int k = 0; k <= n_; ++k) {
    faces_[k].resize(skel_[k].size());
    cofaces_[k].resize(skel_[k].size());
  }
  for (int k = 1; k <= n_; ++k) {
    for (int i = 0; i < num(k); ++i) {
      const auto& v = skel_[k][i].v;
      std::vector<int> f(v.size() - 1);
      for (int j = 0; j <= k; ++j) {
        int pos = 0;
        for (int t = 0; t <= k; ++t) {
          if (t != j) f[pos++] = v[t];
        }
        int fi = lookup_[k - 1].at(f);
        faces_[k][i].push_back({fi, (j % 2 == 0) ? 1 : -1});
        cofaces_[k - 1][fi].push_back(i);
      }
    }
  }

  vertex_cells_.assign(nv, {});
  for (int c = 0; c < num(n_); ++c) {
    for (int vi : skel_[n_][c].v) vertex_cells_[vi].push_back(c);
  }

  // boundary-of-boundary must vanish exactly
  for (int k = 2; k <= n_; ++k) {
    if (!boundary_squares_to_zero(faces_[k - 1], faces_[k], num(k - 2))) {
      throw Error("build_complex: boundary matrices do not satisfy dd = 0");
    }
  }

  // geometry: measures, diameters, inradii
  measure_.assign(n_ + 1, {});
  h_.assign(n_ + 1, {});
  cell_volume_.resize(num(n_));
  cell_rho_.resize(num(n_));
  for (int k = 0; k <= n_; ++k) {
    measure_[k].resize(num(k));
    h_[k].resize(num(k));
    for (int i = 0; i < num(k); ++i) {
      const auto& v = skel_[k][i].v;
      Eigen::MatrixXd pts(n_, k + 1);
      for (int j = 0; j <= k; ++j) pts.col(j) = X_.col(v[j]);
      measure_[k][i] = simplex_measure(pts);
      double diam = 0.0;
      for (int a = 0; a <= k; ++a) {
        for (int b = a + 1; b <= k; ++b) diam = std::max(diam, (pts.col(a) - pts.col(b)).norm());
      }
      h_[k][i] = diam;
    }
  }
  for (int c = 0; c < num(n_); ++c) {
    cell_volume_[c] = measure_[n_][c];
    // inradius r = n |T| / (sum of facet measures); rho = 2 r
    double area = 0.0;
    for (const auto& [f, sgn] : faces_[n_][c]) {
      (void)sgn;
      area += measure_[n_ - 1][f];
    }
    cell_rho_[c] = (area > 0) ? 2.0 * n_ * cell_volume_[c] / area : 0.0;
  }
  // h of a vertex is the diameter of its star
  for (int i = 0; i < nv; ++i) {
    double diam = 0.0;
    std::set<int> pts;
    for (int c : vertex_cells_[i]) {
      for (int vi : skel_[n_][c].v) pts.insert(vi);
    }
    for (auto a = pts.begin(); a != pts.end(); ++a) {
      for (auto b = std::next(a); b != pts.end(); ++b) {
        diam = std::max(diam, (X_.col(*a) - X_.col(*b)).norm());
      }
    }
    h_[0][i] = diam;
  }
}

std::optional<int> SimplicialComplex::find(int k, const std::vector<int>& sorted_vertices) const {
  auto it = lookup_[k].find(sorted_vertices);
  if (it == lookup_[k].end()) return std::nullopt;
  return it->second;
}

Chain SimplicialComplex::boundary(const Chain& c) const {
  if (c.degree < 1 || c.degree > n_) throw Error("boundary: degree must be in 1..n");
  Chain out;
  out.degree = c.degree - 1;
  for (const auto& [i, a] : c.coeff) {
    for (const auto& [f, sgn] : faces_[c.degree][i]) out.coeff[f] += sgn * a;
  }
  for (auto it = out.coeff.begin(); it != out.coeff.end();) {
    it = (it->second == 0.0) ? out.coeff.erase(it) : std::next(it);
  }
  return out;
}

Cochain SimplicialComplex::coboundary(const Cochain& X) const {
  if (X.degree < 0 || X.degree >= n_) throw Error("coboundary: degree must be in 0..n-1");
  Cochain out;
  out.degree = X.degree + 1;
  // (dX)(tau) = X(d tau)
  for (int t = 0; t < num(X.degree + 1); ++t) {
    double val = 0.0;
    for (const auto& [f, sgn] : faces_[X.degree + 1][t]) {
      auto it = X.coeff.find(f);
      if (it != X.coeff.end()) val += sgn * it->second;
    }
    if (val != 0.0) out.coeff[t] = val;
  }
  return out;
}

std::vector<int> SimplicialComplex::star_cells(SimplexRef s) const {
  const auto& v = skel_[s.dim][s.idx].v;
  std::vector<int> out;
  for (int c : vertex_cells_[v[0]]) {
    const auto& cv = skel_[n_][c].v;
    if (std::includes(cv.begin(), cv.end(), v.begin(), v.end())) out.push_back(c);
  }
  return out;
}

std::vector<int> SimplicialComplex::extended_star_cells(SimplexRef s) const {
  const auto& v = skel_[s.dim][s.idx].v;
  std::set<int> out;
  for (int vi : v) out.insert(vertex_cells_[vi].begin(), vertex_cells_[vi].end());
  return {out.begin(), out.end()};
}

std::vector<int> SimplicialComplex::extended_star2_cells(SimplexRef s) const {
  std::set<int> out;
  for (int c : extended_star_cells(s)) {
    auto es = extended_star_cells({n_, c});
    out.insert(es.begin(), es.end());
  }
  return {out.begin(), out.end()};
}

ShapeReport SimplicialComplex::shape_report() const {
  ShapeReport rep;
  rep.h_min = 1e300;
  for (int c = 0; c < num(n_); ++c) {
    rep.shape_regularity_constant =
        std::max(rep.shape_regularity_constant, h_[n_][c] / cell_rho_[c]);
    rep.h_min = std::min(rep.h_min, h_[n_][c]);
    rep.h_max = std::max(rep.h_max, h_[n_][c]);
  }
  rep.star_sizes.resize(num(0));
  for (int i = 0; i < num(0); ++i) {
    rep.star_sizes[i] = static_cast<int>(vertex_cells_[i].size());
  }
  return rep;
}

std::vector<int> SimplicialComplex::vertex_positions_in(SimplexRef s, SimplexRef t) const {
  const auto& sv = skel_[s.dim][s.idx].v;
  const auto& tv = skel_[t.dim][t.idx].v;
  std::vector<int> pos(sv.size());
  for (std::size_t i = 0; i < sv.size(); ++i) {
    auto it = std::lower_bound(tv.begin(), tv.end(), sv[i]);
    if (it == tv.end() || *it != sv[i]) throw Error("vertex_positions_in: not a subsimplex");
    pos[i] = static_cast<int>(it - tv.begin());
  }
  return pos;
}

bool SimplicialComplex::contains(SimplexRef small, SimplexRef big) const {
  const auto& sv = skel_[small.dim][small.idx].v;
  const auto& bv = skel_[big.dim][big.idx].v;
  return std::includes(bv.begin(), bv.end(), sv.begin(), sv.end());
}

std::pair<bool, long> SimplicialComplex::patch_connected_euler(const std::vector<int>& cells) const {
  std::set<int> cellset(cells.begin(), cells.end());
  // facet-connectivity
  std::map<int, std::vector<int>> facet_owner;
  for (int c : cells) {
    for (const auto& [f, sgn] : faces_[n_][c]) {
      (void)sgn;
      facet_owner[f].push_back(c);
    }
  }
  std::map<int, int> comp;
  int ncomp = 0;
  for (int c : cells) {
    if (comp.count(c)) continue;
    ++ncomp;
    std::vector<int> stack{c};
    comp[c] = ncomp;
    while (!stack.empty()) {
      int cur = stack.back();
      stack.pop_back();
      for (const auto& [f, sgn] : faces_[n_][cur]) {
        (void)sgn;
        for (int other : facet_owner[f]) {
          if (!comp.count(other)) {
            comp[other] = ncomp;
            stack.push_back(other);
          }
        }
      }
    }
  }
  // Euler characteristic of the closed subcomplex
  std::vector<std::set<int>> present(n_ + 1);
  for (int c : cells) present[n_].insert(c);
  for (int k = n_; k >= 1; --k) {
    for (int i : present[k]) {
      for (const auto& [f, sgn] : faces_[k][i]) {
        (void)sgn;
        present[k - 1].insert(f);
      }
    }
  }
  long chi = 0;
  for (int k = 0; k <= n_; ++k) chi += (k % 2 == 0 ? 1 : -1) * static_cast<long>(present[k].size());
  return {ncomp <= 1, chi};
}

bool boundary_squares_to_zero(const std::vector<SignedFaces>& bnd_k,
                              const std::vector<SignedFaces>& bnd_kp1, int rows_km1) {
  for (const auto& col : bnd_kp1) {
    std::map<int, long> acc;
    for (const auto& [mid, s1] : col) {
      for (const auto& [row, s2] : bnd_k[mid]) acc[row] += static_cast<long>(s1) * s2;
    }
    for (const auto& [row, v] : acc) {
      if (row < 0 || row >= rows_km1) return false;
      if (v != 0) return false;
    }
  }
  return true;
}

} // namespace feec
