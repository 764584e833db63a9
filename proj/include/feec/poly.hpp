#ifndef FEEC_POLY_HPP
#define FEEC_POLY_HPP

#include <algorithm>
#include <cstdint>
#include <vector>

#include "feec/densela.hpp"
#include "feec/rational.hpp"

namespace feec {

/// Packed barycentric exponent tuple: 5 bits per variable, up to 6 variables.
/// Variable a of a d-simplex is the barycentric coordinate lambda_a, a=0..d.
using Expo = std::uint32_t;

inline int expo_get(Expo e, int a) { return static_cast<int>((e >> (5 * a)) & 31u); }
inline Expo expo_set(Expo e, int a, int val) {
  return (e & ~(31u << (5 * a))) | (static_cast<Expo>(val) << (5 * a));
}
inline Expo expo_unit(int a) { return 1u << (5 * a); }
inline int expo_degree(Expo e) {
  int d = 0;
  while (e) {
    d += static_cast<int>(e & 31u);
    e >>= 5;
  }
  return d;
}

/// Polynomial in the barycentric coordinates of one simplex. The
/// representation is not unique (sum of barycentrics is 1); comparisons go
/// through homogenization, which is a canonical form per total degree.
template <class S> struct Poly {
  // sorted by exponent key, zero coefficients stripped
  std::vector<std::pair<Expo, S>> terms;

  bool empty() const { return terms.empty(); }
  int degree() const {
    int d = 0;
    for (const auto& [e, c] : terms) d = std::max(d, expo_degree(e));
    return d;
  }

  void normalize() {
    std::sort(terms.begin(), terms.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::pair<Expo, S>> out;
    for (auto& [e, c] : terms) {
      if (!out.empty() && out.back().first == e) {
        out.back().second += c;
      } else {
        out.push_back({e, c});
      }
    }
    out.erase(std::remove_if(out.begin(), out.end(),
                             [](const auto& t) { return ScalarOps<S>::is_zero(t.second); }),
              out.end());
    terms = std::move(out);
  }

  static Poly constant(const S& c) {
    Poly p;
    if (!ScalarOps<S>::is_zero(c)) p.terms.push_back({0u, c});
    return p;
  }
  static Poly hat(int a) {
    Poly p;
    p.terms.push_back({expo_unit(a), ScalarOps<S>::one()});
    return p;
  }

  Poly operator+(const Poly& o) const {
    Poly r = *this;
    r.terms.insert(r.terms.end(), o.terms.begin(), o.terms.end());
    r.normalize();
    return r;
  }
  Poly operator-(const Poly& o) const {
    Poly r = *this;
    for (const auto& [e, c] : o.terms) r.terms.push_back({e, -c});
    r.normalize();
    return r;
  }
  Poly operator*(const Poly& o) const {
    Poly r;
    r.terms.reserve(terms.size() * o.terms.size());
    for (const auto& [e1, c1] : terms) {
      for (const auto& [e2, c2] : o.terms) r.terms.push_back({e1 + e2, c1 * c2});
    }
    r.normalize();
    return r;
  }
  Poly scaled(const S& c) const {
    if (ScalarOps<S>::is_zero(c)) return Poly();
    Poly r = *this;
    for (auto& [e, cc] : r.terms) cc = cc * c;
    return r;
  }

  Poly derivative(int a) const {
    Poly r;
    for (const auto& [e, c] : terms) {
      int p = expo_get(e, a);
      if (p > 0) r.terms.push_back({expo_set(e, a, p - 1), c * ScalarOps<S>::from_long(p)});
    }
    r.normalize();
    return r;
  }

  S eval(const std::vector<S>& lambda) const {
    S acc = ScalarOps<S>::zero();
    for (const auto& [e, c] : terms) {
      S t = c;
      for (int a = 0; a < static_cast<int>(lambda.size()); ++a) {
        for (int p = 0; p < expo_get(e, a); ++p) t = t * lambda[a];
      }
      acc += t;
    }
    return acc;
  }

  /// Substitution lambda_a -> lambda_{map[a]} of a smaller variable set,
  /// map[a] = -1 meaning the variable restricts to zero (used for traces).
  Poly substitute(const std::vector<int>& map) const {
    Poly r;
    for (const auto& [e, c] : terms) {
      Expo ne = 0;
      bool dead = false;
      for (int a = 0; a < static_cast<int>(map.size()); ++a) {
        int p = expo_get(e, a);
        if (p == 0) continue;
        if (map[a] < 0) {
          dead = true;
          break;
        }
        ne = expo_set(ne, map[a], expo_get(ne, map[a]) + p);
      }
      if (!dead) r.terms.push_back({ne, c});
    }
    r.normalize();
    return r;
  }

  /// Canonical representative: every term multiplied out to total degree
  /// `target` with powers of (sum of the nvars barycentrics) = 1.
  Poly homogenized(int target, int nvars) const {
    Poly r;
    for (const auto& [e, c] : terms) {
      int missing = target - expo_degree(e);
      if (missing < 0) throw Error("homogenized: target below term degree");
      // expand (lambda_0+...+lambda_{nvars-1})^missing term by term
      std::vector<std::pair<Expo, S>> cur{{e, c}};
      for (int step = 0; step < missing; ++step) {
        std::vector<std::pair<Expo, S>> next;
        next.reserve(cur.size() * nvars);
        for (const auto& [ee, cc] : cur) {
          for (int a = 0; a < nvars; ++a) next.push_back({ee + expo_unit(a), cc});
        }
        cur = std::move(next);
      }
      r.terms.insert(r.terms.end(), cur.begin(), cur.end());
    }
    r.normalize();
    return r;
  }
};

using PolyD = Poly<double>;
using PolyQ = Poly<Rational>;

/// Tiny dense matrix over an exact or floating scalar, for the per-simplex
/// charts (all sizes here are at most (n+1) x (n+1)).
template <class S> struct SmallMat {
  int rows = 0, cols = 0;
  std::vector<S> a; // row-major

  SmallMat() = default;
  SmallMat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, ScalarOps<S>::zero()) {}
  S& at(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
  const S& at(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

  SmallMat transposed() const {
    SmallMat t(cols, rows);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) t.at(j, i) = at(i, j);
    return t;
  }
  SmallMat operator*(const SmallMat& o) const {
    SmallMat r(rows, o.cols);
    for (int i = 0; i < rows; ++i)
      for (int k = 0; k < cols; ++k)
        for (int j = 0; j < o.cols; ++j) r.at(i, j) += at(i, k) * o.at(k, j);
    return r;
  }

  /// Gauss-Jordan solve A X = B (A square, full pivoting by magnitude).
  SmallMat solve(const SmallMat& B) const {
    SmallMat A = *this, X = B;
    int nn = rows;
    std::vector<int> perm(nn);
    for (int i = 0; i < nn; ++i) perm[i] = i;
    for (int col = 0; col < nn; ++col) {
      int piv = -1;
      for (int i = col; i < nn; ++i) {
        if (!ScalarOps<S>::is_zero(A.at(i, col))) {
          if (piv < 0 ||
              ScalarOps<S>::to_double(ScalarOps<S>::abs(A.at(i, col))) >
                  ScalarOps<S>::to_double(ScalarOps<S>::abs(A.at(piv, col)))) {
            piv = i;
          }
        }
      }
      if (piv < 0) throw Error("SmallMat::solve: singular");
      if (piv != col) {
        for (int j = 0; j < nn; ++j) std::swap(A.at(piv, j), A.at(col, j));
        for (int j = 0; j < X.cols; ++j) std::swap(X.at(piv, j), X.at(col, j));
      }
      S inv = ScalarOps<S>::one() / A.at(col, col);
      for (int j = 0; j < nn; ++j) A.at(col, j) = A.at(col, j) * inv;
      for (int j = 0; j < X.cols; ++j) X.at(col, j) = X.at(col, j) * inv;
      for (int i = 0; i < nn; ++i) {
        if (i == col || ScalarOps<S>::is_zero(A.at(i, col))) continue;
        S f = A.at(i, col);
        for (int j = 0; j < nn; ++j) A.at(i, j) = A.at(i, j) - f * A.at(col, j);
        for (int j = 0; j < X.cols; ++j) X.at(i, j) = X.at(i, j) - f * X.at(col, j);
      }
    }
    return X;
  }

  S determinant() const {
    SmallMat A = *this;
    int nn = rows;
    S det = ScalarOps<S>::one();
    for (int col = 0; col < nn; ++col) {
      int piv = -1;
      for (int i = col; i < nn; ++i) {
        if (!ScalarOps<S>::is_zero(A.at(i, col))) {
          if (piv < 0 ||
              ScalarOps<S>::to_double(ScalarOps<S>::abs(A.at(i, col))) >
                  ScalarOps<S>::to_double(ScalarOps<S>::abs(A.at(piv, col)))) {
            piv = i;
          }
        }
      }
      if (piv < 0) return ScalarOps<S>::zero();
      if (piv != col) {
        for (int j = 0; j < nn; ++j) std::swap(A.at(piv, j), A.at(col, j));
        det = -det;
      }
      det = det * A.at(col, col);
      for (int i = col + 1; i < nn; ++i) {
        if (ScalarOps<S>::is_zero(A.at(i, col))) continue;
        S f = A.at(i, col) / A.at(col, col);
        for (int j = col; j < nn; ++j) A.at(i, j) = A.at(i, j) - f * A.at(col, j);
      }
    }
    return det;
  }
};

} // namespace feec

#endif
