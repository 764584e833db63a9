#include "feec/densela.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>

namespace feec {

namespace {

// Unblocked Cholesky so the failing pivot index can be reported.
Eigen::MatrixXd cholesky_lower(const Matrix& A) {
  const int n = static_cast<int>(A.rows());
  Matrix L = Matrix::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    double diag = A(j, j) - L.row(j).head(j).squaredNorm();
    if (!(diag > 0.0) || !std::isfinite(diag)) {
      throw SpdError("solve_spd: non-positive pivot at index " + std::to_string(j), j);
    }
    L(j, j) = std::sqrt(diag);
    for (int i = j + 1; i < n; ++i) {
      double s = A(i, j) - (L.row(i).head(j).cwiseProduct(L.row(j).head(j))).sum();
      L(i, j) = s / L(j, j);
    }
  }
  return L;
}

void check_symmetric(const Matrix& A) {
  if (A.rows() != A.cols()) throw Error("solve_spd: matrix not square");
  double scale = A.cwiseAbs().maxCoeff();
  if (scale == 0.0) return;
  double asym = (A - A.transpose()).cwiseAbs().maxCoeff();
  if (asym > tolerances().spd_symmetry * scale * 10.0 && asym > 1e-10 * scale) {
    throw Error("solve_spd: matrix not symmetric (asymmetry " + std::to_string(asym / scale) + ")");
  }
}

} // namespace

Vector solve_spd(const Matrix& A, const Vector& b) {
  check_symmetric(A);
  Matrix L = cholesky_lower(A);
  Vector y = L.triangularView<Eigen::Lower>().solve(b);
  Vector x = L.transpose().triangularView<Eigen::Upper>().solve(y);
  double nb = b.norm();
  double res = (A * x - b).norm();
  if (nb > 0 && res > 1e-8 * nb) {
    throw Error("solve_spd: residual " + std::to_string(res / nb) + " exceeds gate");
  }
  return x;
}

Matrix solve_spd(const Matrix& A, const Matrix& B) {
  check_symmetric(A);
  Matrix L = cholesky_lower(A);
  Matrix Y = L.triangularView<Eigen::Lower>().solve(B);
  return L.transpose().triangularView<Eigen::Upper>().solve(Y);
}

Matrix nullspace(const Matrix& A, double tol_rel) {
  if (A.rows() == 0 || A.cols() == 0) {
    return Matrix::Identity(A.cols(), A.cols());
  }
  Eigen::JacobiSVD<Matrix> svd(A, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  double smax = sv.size() ? sv(0) : 0.0;
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i) {
    if (sv(i) > tol_rel * smax && sv(i) > 0.0) ++rank;
  }
  return svd.matrixV().rightCols(A.cols() - rank);
}

int rank_of(const Matrix& A, double tol_rel) {
  if (A.rows() == 0 || A.cols() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(A);
  const auto& sv = svd.singularValues();
  double smax = sv.size() ? sv(0) : 0.0;
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i) {
    if (sv(i) > tol_rel * smax && sv(i) > 0.0) ++rank;
  }
  return rank;
}

std::vector<Vector> orthonormalize(const std::vector<Vector>& vecs,
                                   const std::function<double(const Vector&, const Vector&)>& inner,
                                   std::vector<int>* dropped) {
  std::vector<Vector> out;
  double scale = 0.0;
  for (const auto& v : vecs) scale = std::max(scale, inner(v, v));
  for (int idx = 0; idx < static_cast<int>(vecs.size()); ++idx) {
    Vector w = vecs[idx];
    // two MGS sweeps for numerical stability
    for (int sweep = 0; sweep < 2; ++sweep) {
      for (const auto& q : out) w -= inner(q, w) * q;
    }
    double nn = inner(w, w);
    if (!(nn > 0.0) || nn < tolerances().rank_rel * tolerances().rank_rel * scale) {
      if (dropped) dropped->push_back(idx);
      continue;
    }
    out.push_back(w / std::sqrt(nn));
  }
  // verify the Gram identity
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double g = inner(out[i], out[j]);
      double want = (i == j) ? 1.0 : 0.0;
      if (std::fabs(g - want) > tolerances().ortho * 10.0) {
        throw Error("orthonormalize: Gram deviation " + std::to_string(std::fabs(g - want)));
      }
    }
  }
  return out;
}

Vector minnorm_least_squares(const Matrix& A, const Vector& b, double* residual) {
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(A);
  cod.setThreshold(tolerances().rank_rel);
  Vector x = cod.solve(b);
  if (residual) *residual = (A * x - b).norm();
  return x;
}

std::pair<Vector, Matrix> smallest_generalized_eigs(const Matrix& A, const Matrix& B, int count) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(A, B);
  if (es.info() != Eigen::Success) throw Error("smallest_generalized_eigs: solver failed");
  count = std::min<int>(count, static_cast<int>(A.rows()));
  Vector vals = es.eigenvalues().head(count);
  Matrix vecs = es.eigenvectors().leftCols(count);
  return {vals, vecs};
}

} // namespace feec
