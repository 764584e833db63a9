#ifndef FEEC_PROJECTION_HPP
#define FEEC_PROJECTION_HPP

#include "feec/weights.hpp"

namespace feec {

/// Input to a projection: either an exact piecewise polynomial field or a
/// pointwise callback (cell, barycentric point) -> coefficient array over the
/// ambient masks, integrated at a declared quadrature degree.
struct InputForm {
  int k = 0;
  const PiecewiseFormD* field = nullptr;
  std::function<std::vector<double>(int, const std::vector<double>&)> callback;
  int quad_degree = -1;

  bool exact() const { return field != nullptr; }
};

/// de Rham map on fields with well-defined traces (exact path; callbacks are
/// only integrable against full-dimensional simplices).
Cochain de_rham(const SimplicialComplex& cx, const PiecewiseFormD& u, int k);
Cochain de_rham(const SimplicialComplex& cx, const InputForm& u);

/// Whitney interpolant W X = sum X(sigma) phi_sigma.
PiecewiseFormD whitney_interpolant(const SimplicialComplex& cx, const Cochain& X);

/// Table of the patch fields U_r^k(tau, g) for g in the p-basis of tau:
/// bubble-weighted dual solves for the exact part, coderivatives of the next
/// level for the complement part. Built lazily per (tau, k), cached.
class UTable {
public:
  UTable(FeStore& store, int r) : store_(store), r_(r) {}

  int r() const { return r_; }
  FeStore& store() const { return store_; }

  /// U(tau, p-basis[j]) at level k; throws when j is out of range.
  const PiecewiseFormD& field(SimplexRef tau, int k, int j);
  int count(SimplexRef tau, int k);

private:
  FeStore& store_;
  int r_;
  std::mutex mtx_;
  std::map<std::tuple<int, int, int>, std::vector<PiecewiseFormD>> table_;

  const std::vector<PiecewiseFormD>& level(SimplexRef tau, int k);
};

/// The composed projection pi_r^k together with its ingredients.
class ProjectionOperator {
public:
  ProjectionOperator(FeStore& store, WeightFamily& weights, UTable& utable, int r, int k);

  int r() const { return r_; }
  int k() const { return k_; }

  PiecewiseFormD pi_low(const InputForm& u) const;  // lowest-order projection
  PiecewiseFormD q_op(const InputForm& u) const;    // correction onto M_r^k
  PiecewiseFormD project(const InputForm& u) const; // final projection

  PiecewiseFormD pi_low(const PiecewiseFormD& u) const;
  PiecewiseFormD q_op(const PiecewiseFormD& u) const;
  PiecewiseFormD project(const PiecewiseFormD& u) const;

  /// Materialized operator on the finite element space (exact path):
  /// coefficients-to-coefficients in the working basis.
  Matrix matrix() const;

  /// The projection restricted to one cell. Only the weights and patch fields
  /// whose supports meet es(cell) are touched (they are built on demand), so
  /// this scales to fine meshes without building the whole family.
  PolyFormD project_on_cell(const InputForm& u, int cell) const;

  /// <Z(sigma), u> and <u, U(tau,j)> pairings with callback support.
  double weight_pairing(SimplexRef sigma, const InputForm& u) const;
  double u_pairing(SimplexRef tau, int j, const InputForm& u) const;

  FeStore& store() const { return store_; }
  WeightFamily& weights() const { return weights_; }
  UTable& utable() const { return utable_; }

private:
  FeStore& store_;
  WeightFamily& weights_;
  UTable& utable_;
  int r_, k_;
  std::vector<PiecewiseFormD> whitney_; // per sigma in Delta_k
};

/// Pairing of an exact piecewise field with a callback input over the support
/// of the field, at the callback's declared quadrature degree.
double callback_pairing(const SimplicialComplex& cx, const PiecewiseFormD& w, const InputForm& u);

} // namespace feec

#endif
