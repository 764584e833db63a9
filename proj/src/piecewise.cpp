#include "feec/piecewise.hpp"

namespace feec {

namespace {
int default_degree(const PiecewiseFormD& a, const PiecewiseFormD& b) {
  int da = 0, db = 0;
  for (const auto& [c, f] : a.piece) da = std::max(da, f.poly_degree());
  for (const auto& [c, f] : b.piece) db = std::max(db, f.poly_degree());
  return da + db + 1;
}
} // namespace

double pw_l2_inner(const PiecewiseFormD& a, const PiecewiseFormD& b, int rule_degree) {
  if (rule_degree < 0) rule_degree = default_degree(a, b);
  double acc = 0.0;
  for (const auto& [c, fa] : a.piece) {
    auto it = b.piece.find(c);
    if (it == b.piece.end()) continue;
    acc += l2_inner_on(*a.cx, {a.cx->n(), c}, fa, it->second, rule_degree);
  }
  return acc;
}

double pw_l2_inner_on(const PiecewiseFormD& a, const PiecewiseFormD& b,
                      const std::vector<int>& cells, int rule_degree) {
  if (rule_degree < 0) rule_degree = default_degree(a, b);
  double acc = 0.0;
  for (int c : cells) {
    auto ia = a.piece.find(c);
    auto ib = b.piece.find(c);
    if (ia == a.piece.end() || ib == b.piece.end()) continue;
    acc += l2_inner_on(*a.cx, {a.cx->n(), c}, ia->second, ib->second, rule_degree);
  }
  return acc;
}

double pw_l2_norm(const PiecewiseFormD& a, int rule_degree) {
  return std::sqrt(std::max(0.0, pw_l2_inner(a, a, rule_degree)));
}

double pw_l2_norm_on(const PiecewiseFormD& a, const std::vector<int>& cells, int rule_degree) {
  return std::sqrt(std::max(0.0, pw_l2_inner_on(a, a, cells, rule_degree)));
}

Rational pw_l2_inner_exact(const PiecewiseFormQ& a, const PiecewiseFormQ& b) {
  Rational acc(0);
  for (const auto& [c, fa] : a.piece) {
    auto it = b.piece.find(c);
    if (it == b.piece.end()) continue;
    auto g = make_geom<Rational>(*a.cx, {a.cx->n(), c});
    acc += l2_inner_exact(*a.cx, g, fa, it->second);
  }
  return acc;
}

PiecewiseFormD random_global_poly_form(const SimplicialComplex& cx, int k, int deg,
                                       std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  // one coefficient per (mask, ambient monomial)
  std::vector<std::vector<int>> betas;
  std::function<void(std::vector<int>&, int, int)> gen = [&](std::vector<int>& cur, int axis,
                                                             int left) {
    if (axis == cx.n()) {
      betas.push_back(cur);
      return;
    }
    for (int p = 0; p <= left; ++p) {
      cur.push_back(p);
      gen(cur, axis + 1, left - p);
      cur.pop_back();
    }
  };
  std::vector<int> cur;
  gen(cur, 0, deg);
  auto masks = masks_of(cx.n(), k);
  std::vector<std::vector<double>> coef(masks.size(), std::vector<double>(betas.size()));
  for (auto& row : coef) {
    for (auto& c : row) c = unif(rng);
  }
  PiecewiseFormD out = pw_zero<double>(cx, k);
  for (int cell = 0; cell < cx.num_cells(); ++cell) {
    PolyFormD f = pf_zero<double>({cx.n(), cell}, k);
    for (std::size_t mi = 0; mi < masks.size(); ++mi) {
      PolyD p;
      for (std::size_t bi = 0; bi < betas.size(); ++bi) {
        if (coef[mi][bi] == 0.0) continue;
        p = p + ambient_monomial<double>(cx, cell, betas[bi]).scaled(coef[mi][bi]);
      }
      if (!p.empty()) f.comp[masks[mi]] = p;
    }
    out.piece[cell] = f;
  }
  return out;
}

PiecewiseFormD random_broken_form(const SimplicialComplex& cx, int k, int deg,
                                  std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  auto masks = masks_of(cx.n(), k);
  PiecewiseFormD out = pw_zero<double>(cx, k);
  for (int cell = 0; cell < cx.num_cells(); ++cell) {
    PolyFormD f = pf_zero<double>({cx.n(), cell}, k);
    for (Mask m : masks) {
      PolyD p;
      std::function<void(Expo, int, int)> gen = [&](Expo e, int var, int left) {
        if (var == cx.n()) {
          p.terms.push_back({expo_set(e, var, left), unif(rng)});
          return;
        }
        for (int q = 0; q <= left; ++q) gen(expo_set(e, var, q), var + 1, left - q);
      };
      gen(0u, 0, deg);
      p.normalize();
      f.comp[m] = p;
    }
    out.piece[cell] = f;
  }
  return out;
}

} // namespace feec
