#ifndef FEEC_DENSELA_HPP
#define FEEC_DENSELA_HPP

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "feec/config.hpp"

namespace feec {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct SpdError : Error {
  int pivot; // first non-positive pivot encountered
  SpdError(const std::string& msg, int pivot_index) : Error(msg), pivot(pivot_index) {}
};

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Cholesky solve with an explicit symmetry gate and a verified residual.
/// Throws SpdError with the offending pivot index if A is not SPD.
Vector solve_spd(const Matrix& A, const Vector& b);

/// Multiple right-hand sides variant.
Matrix solve_spd(const Matrix& A, const Matrix& B);

/// Orthonormal basis of the (numerical) kernel of A, columns of the result.
/// Singular values below tol_rel * sigma_max are treated as zero.
Matrix nullspace(const Matrix& A, double tol_rel = tolerances().rank_rel);

/// Numerical rank with the same cutoff convention.
int rank_of(const Matrix& A, double tol_rel = tolerances().rank_rel);

/// Gram-Schmidt against an arbitrary SPD bilinear form given as a callback on
/// coefficient vectors. Numerically dependent inputs are dropped; the indices
/// of the dropped vectors are reported through `dropped` when provided.
std::vector<Vector> orthonormalize(const std::vector<Vector>& vecs,
                                   const std::function<double(const Vector&, const Vector&)>& inner,
                                   std::vector<int>* dropped = nullptr);

/// Minimum-norm least-squares solution of A x = b (complete orthogonal
/// decomposition). `residual` receives ||A x - b||.
Vector minnorm_least_squares(const Matrix& A, const Vector& b, double* residual = nullptr);

/// Smallest `count` eigenpairs of the pencil (A, B) with B SPD. Eigenvectors
/// are B-orthonormal, ascending eigenvalues.
std::pair<Vector, Matrix> smallest_generalized_eigs(const Matrix& A, const Matrix& B, int count);

} // namespace feec

#endif
