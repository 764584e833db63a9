#ifndef FEEC_WEIGHTS_HPP
#define FEEC_WEIGHTS_HPP

#include "feec/fespace.hpp"

namespace feec {

/// Test-only corruption hook for the negative controls of the suite.
struct ZCorruption {
  enum class Kind { None, SkipMeanZero };
  Kind kind = Kind::None;
};

/// Per-sigma construction log of the weight family.
struct ZLog {
  SimplexRef sigma;
  int potential_degree = 0;      // polynomial degree of the patch potential solve
  double compat_residual = 0.0;  // closedness / mean-zero residual of the data
  double potential_residual = 0.0; // relative ||d mu - g|| of the potential
  double bubble_residual = 0.0;  // relative residual of the SPD bubble solve
  double patch_duality_err = 0.0; // patch-space version of the duality identity
  double norm = 0.0;             // L2 norm over the extended star
  double eta_norm = 0.0;         // L2 norm of the potential part
};

/// The weight operators Z_r^k: one piecewise polynomial representative per
/// simplex, built by induction on the dimension. Within a level the
/// constructions are independent; levels are sequential.
class WeightFamily {
public:
  WeightFamily(FeStore& store, int r, ZCorruption corruption = {});

  int r() const { return r_; }
  FeStore& store() const { return store_; }

  /// Build Z for every simplex of dimension <= kmax.
  void build_all(int kmax);
  /// Build Z for the given simplices (prerequisite faces are built
  /// recursively).
  void build_for(const std::vector<SimplexRef>& sigmas);

  bool has(SimplexRef sigma) const { return z_.count(key(sigma)) > 0; }
  const PiecewiseFormD& z(SimplexRef sigma) const;
  const ZLog& log(SimplexRef sigma) const;

  /// <Z(sigma), u> over the extended star.
  double pair(SimplexRef sigma, const PiecewiseFormD& u) const;

  /// Weight field of the boundary chain of sigma (signed sum over faces).
  PiecewiseFormD boundary_weight(SimplexRef sigma) const;

private:
  static std::pair<int, int> key(SimplexRef s) { return {s.dim, s.idx}; }

  FeStore& store_;
  int r_;
  ZCorruption corruption_;
  std::map<std::pair<int, int>, PiecewiseFormD> z_;
  std::map<std::pair<int, int>, ZLog> logs_;
  mutable std::mutex mtx_;

  void build_one(SimplexRef sigma);
  PiecewiseFormD lowest_order(SimplexRef sigma, ZLog& log) const;
  PiecewiseFormD step(SimplexRef sigma, ZLog& log) const;
};

/// Unique solution v in the complement of the kernel of d on the patch space
/// of the extended star, solving <bubble d v, d u> = rhs(u). The rhs callback
/// receives each complement basis field. Returns the solution field and the
/// relative solve residual.
std::pair<PiecewiseFormD, double> bubble_solve(
    FeStore& store, SimplexRef sigma, int r, int k, const PiecewiseFormD& bubble_field,
    const std::function<double(const PiecewiseFormD&)>& rhs);

/// Discrete potential: eta with delta eta = z_prev on es(sigma), vanishing
/// star trace on the patch boundary, via the star-conjugated constrained
/// minimum-norm solve on the essential-boundary-condition trimmed complex.
PiecewiseFormD potential_eta(FeStore& store, SimplexRef sigma, const PiecewiseFormD& z_prev,
                             ZLog& log, bool skip_meanzero_check = false);

/// de Rham pairing R^k u(sigma) of a (patch) finite element field.
double de_rham_value(const SimplicialComplex& cx, const PiecewiseFormD& u, SimplexRef sigma);

/// Named verification results.
struct ZCheck {
  std::string id;
  double max_err = 0.0;
  double tol = 0.0;
  bool pass = true;
};

/// Full verification of a built family on its mesh: duality against the
/// global space (ZZ0r), the coderivative chain rule (ZZ2r), exact support
/// containment (ZZ3r), H-delta conformity, and the inverse/bubble estimates.
std::vector<ZCheck> verify_weight_family(WeightFamily& family, int kmax,
                                         unsigned rng_seed = 1234);

} // namespace feec

#endif
