#include "feec/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <map>
#include <mutex>

namespace feec {

namespace {

// Gauss-Jacobi rule on [0,1] with weight (1-x)^alpha, beta = 0, via
// Golub-Welsch on the symmetric Jacobi recurrence.
void gauss_jacobi01(int m, int alpha, std::vector<double>& x, std::vector<double>& w) {
  const double a = alpha, b = 0.0;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(m, m);
  for (int k = 0; k < m; ++k) {
    double denom = (2 * k + a + b) * (2 * k + a + b + 2);
    double ak = (k == 0) ? (b - a) / (a + b + 2) : (b * b - a * a) / denom;
    J(k, k) = ak;
    if (k + 1 < m) {
      double bk;
      if (k == 0) {
        bk = 4 * (1 + a) * (1 + b) / ((2 + a + b) * (2 + a + b) * (3 + a + b));
      } else {
        double kk = k + 1; // b_{k+1} with 1-based index k+1
        bk = 4 * kk * (kk + a) * (kk + b) * (kk + a + b) /
             ((2 * kk + a + b) * (2 * kk + a + b) * (2 * kk + a + b + 1) * (2 * kk + a + b - 1));
      }
      J(k, k + 1) = J(k + 1, k) = std::sqrt(bk);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  // mu0 = int_{-1}^{1} (1-t)^a dt = 2^{a+1}/(a+1)  (beta = 0)
  double mu0 = std::pow(2.0, a + 1.0) / (a + 1.0);
  x.resize(m);
  w.resize(m);
  for (int i = 0; i < m; ++i) {
    double t = es.eigenvalues()(i);
    double v0 = es.eigenvectors()(0, i);
    x[i] = 0.5 * (1.0 + t);
    w[i] = mu0 * v0 * v0 / std::pow(2.0, a + 1.0);
  }
}

QuadratureRule build_rule(int dim, int degree) {
  QuadratureRule rule;
  rule.dim = dim;
  rule.degree = degree;
  if (dim == 0) {
    rule.points.push_back({{1.0}, 1.0});
    return rule;
  }
  const int m = degree / 2 + 1; // 2m-1 >= degree
  std::vector<std::vector<double>> xs(dim), ws(dim);
  for (int i = 0; i < dim; ++i) gauss_jacobi01(m, dim - 1 - i, xs[i], ws[i]);
  std::vector<int> idx(dim, 0);
  while (true) {
    double w = 1.0;
    std::vector<double> t(dim);
    double shrink = 1.0;
    for (int i = 0; i < dim; ++i) {
      double xi = xs[i][idx[i]];
      w *= ws[i][idx[i]];
      t[i] = xi * shrink;
      shrink *= (1.0 - xi);
    }
    QuadPoint qp;
    qp.lambda.resize(dim + 1);
    double l0 = 1.0;
    for (int i = 0; i < dim; ++i) {
      qp.lambda[i + 1] = t[i];
      l0 -= t[i];
    }
    qp.lambda[0] = l0;
    qp.w = w;
    rule.points.push_back(qp);
    int pos = dim - 1;
    while (pos >= 0 && ++idx[pos] == m) idx[pos--] = 0;
    if (pos < 0) break;
  }
  return rule;
}

void audit_rule(const QuadratureRule& rule) {
  // every barycentric monomial of total degree <= q must match the factorial
  // moment identity; checking the full-degree monomials suffices because the
  // rule is positive and lower degrees embed via homogenization
  const int d = rule.dim;
  std::vector<Expo> probes;
  std::function<void(Expo, int, int)> gen = [&](Expo e, int var, int left) {
    if (var == d) {
      probes.push_back(expo_set(e, var, left));
      return;
    }
    for (int p = 0; p <= left; ++p) gen(expo_set(e, var, p), var + 1, left - p);
  };
  int deg = std::min(rule.degree, 31);
  if (d > 0) gen(0u, 0, deg);
  for (Expo e : probes) {
    double want = ref_moment<double>(e, d);
    double got = 0.0;
    for (const auto& qp : rule.points) {
      double t = qp.w;
      for (int a = 0; a <= d; ++a) {
        for (int p = 0; p < expo_get(e, a); ++p) t *= qp.lambda[a];
      }
      got += t;
    }
    if (std::fabs(got - want) > 1e-13 * std::max(1.0, std::fabs(want)) + 1e-16) {
      throw Error("quadrature audit failed at dim " + std::to_string(d) + " degree " +
                  std::to_string(rule.degree));
    }
  }
}

} // namespace

const QuadratureRule& rule_for(int dim, int degree) {
  static std::map<std::pair<int, int>, std::unique_ptr<QuadratureRule>> cache;
  static std::mutex mtx;
  degree = std::max(degree, 1);
  std::lock_guard<std::mutex> lock(mtx);
  auto key = std::make_pair(dim, degree);
  auto it = cache.find(key);
  if (it == cache.end()) {
    auto rule = std::make_unique<QuadratureRule>(build_rule(dim, degree));
    if (degree <= 31) audit_rule(*rule);
    it = cache.emplace(key, std::move(rule)).first;
  }
  return *it->second;
}

double integrate(const SimplicialComplex& cx, SimplexRef s, const PolyD& p, int rule_degree,
                 bool exact_mode) {
  double fact = 1.0;
  for (int j = 2; j <= s.dim; ++j) fact *= j;
  double scale = cx.measure(s) * fact;
  if (exact_mode) {
    return integrate_poly_reference(p, s.dim) * scale;
  }
  if (p.degree() > rule_degree) throw Error("integrate: polynomial degree exceeds rule");
  const auto& rule = rule_for(s.dim, rule_degree);
  double acc = 0.0;
  std::vector<double> lam;
  for (const auto& qp : rule.points) acc += qp.w * p.eval(qp.lambda);
  return acc * scale;
}

double integrate(const SimplicialComplex& cx, const PolyFormD& u) {
  Geom<double> g = make_geom<double>(cx, u.carrier);
  return integrate_over_carrier(g, u);
}

double l2_inner_on(const SimplicialComplex& cx, SimplexRef s, const PolyFormD& u,
                   const PolyFormD& v, int rule_degree) {
  if (u.k != v.k) throw Error("l2_inner_on: mismatched degrees");
  Geom<double> g = make_geom<double>(cx, s);
  const auto& rule = rule_for(s.dim, rule_degree);
  const bool full = (s.dim == cx.n());
  auto masks = masks_of(cx.n(), u.k);
  Eigen::MatrixXd pair = Eigen::MatrixXd::Identity(masks.size(), masks.size());
  if (!full) {
    for (std::size_t i = 0; i < masks.size(); ++i) {
      for (std::size_t j = 0; j < masks.size(); ++j) pair(i, j) = g.proj_minor(masks[i], masks[j]);
    }
  }
  double fact = 1.0;
  for (int j = 2; j <= s.dim; ++j) fact *= j;
  double scale = cx.measure(s) * fact;
  double acc = 0.0;
  for (const auto& qp : rule.points) {
    auto a = eval_form(u, cx.n(), qp.lambda);
    auto b = eval_form(v, cx.n(), qp.lambda);
    double val = 0.0;
    for (std::size_t i = 0; i < masks.size(); ++i) {
      for (std::size_t j = 0; j < masks.size(); ++j) {
        if (pair(i, j) != 0.0) val += a[i] * pair(i, j) * b[j];
      }
    }
    acc += qp.w * val;
  }
  return acc * scale;
}

double integrate_callback(const SimplicialComplex& cx, int cell,
                          const std::function<double(const std::vector<double>&)>& f,
                          int rule_degree) {
  const auto& rule = rule_for(cx.n(), rule_degree);
  double fact = 1.0;
  for (int j = 2; j <= cx.n(); ++j) fact *= j;
  double scale = cx.cell_volume(cell) * fact;
  double acc = 0.0;
  for (const auto& qp : rule.points) acc += qp.w * f(qp.lambda);
  return acc * scale;
}

} // namespace feec
