#ifndef FEEC_FESPACE_HPP
#define FEEC_FESPACE_HPP

#include <Eigen/Dense>

#include <memory>
#include <mutex>
#include <set>

#include "feec/piecewise.hpp"

namespace feec {

// ---------------------------------------------------------------------------
// Patches (sub-triangulations given by a cell list)
// ---------------------------------------------------------------------------

struct Patch {
  const SimplicialComplex* cx = nullptr;
  std::vector<int> cells;                  // sorted n-simplex ids
  std::vector<std::vector<int>> faces;     // faces[d]: sorted simplex ids present
  std::vector<std::set<int>> sub_boundary; // per dim: simplices lying on the patch boundary

  std::vector<int> star_in(SimplexRef tau) const; // patch cells containing tau
  bool contains_cell(int c) const { return std::binary_search(cells.begin(), cells.end(), c); }
  bool on_boundary(SimplexRef s) const { return sub_boundary[s.dim].count(s.idx) > 0; }
};

Patch make_patch(const SimplicialComplex& cx, std::vector<int> cells);

/// Trace of a piecewise form onto a simplex, taken from the first containing
/// cell that both carries a piece and lies in `within` (if given). Empty when
/// the support does not meet the star of tau.
std::optional<PolyFormD> pw_trace(const PiecewiseFormD& u, SimplexRef tau,
                                  const Patch* within = nullptr);

/// Blocked Gram matrix <w_i, v_j>_{cells} of two families of piecewise forms,
/// optionally weighted by a scalar piecewise field. Quadrature-based; the rule
/// degree must cover the products.
Matrix pw_gram(const SimplicialComplex& cx, const std::vector<PiecewiseFormD>& A,
               const std::vector<PiecewiseFormD>& B, const std::vector<int>& cells, int rule_degree,
               const PiecewiseFormD* weight = nullptr);

// ---------------------------------------------------------------------------
// Local spaces on one simplex
// ---------------------------------------------------------------------------

enum class SpaceVariant { Full, TraceFree, Breve, Kernel, KernelPerp };

/// All local data of the trimmed space family on one simplex: the full basis,
/// the trace-free and breve subspaces, the kernel split of d, and the
/// orthonormal p-basis of the paper's alternative degrees of freedom.
struct FaceData {
  SimplexRef s;
  int r = 0, k = 0;
  std::vector<PolyFormD> full;   // P_r^-
  std::vector<PolyFormD> ring;   // trace-free subspace
  std::vector<PolyFormD> breve;  // additionally mean-free in top intrinsic degree
  std::vector<PolyFormD> zker;   // kernel of d inside the trace-free space
  std::vector<PolyFormD> zperp;  // complement, orthonormal in the ddc inner product
  std::vector<PolyFormD> zimage; // d of the (k-1)-level zperp, index aligned
  std::vector<PolyFormD> pbasis; // zimage followed by zperp
  PolyFormD vol;                 // distinguished integral dof form when dim s == k

  // ddc machinery: L2 Gram of zker and per-y data (y list = [vol] + pbasis)
  Matrix zker_gram;
  Eigen::LLT<Matrix> zker_llt;
  std::vector<PolyFormD> ylist;
  std::vector<Vector> y_proj_coeff; // G^{-1} [<y, zker_i>]
  std::vector<PolyFormD> y_d;       // exterior derivative of each y

  int nvol() const { return (s.dim == k) ? 1 : 0; }
  const std::vector<PolyFormD>& variant(SpaceVariant v) const {
    switch (v) {
      case SpaceVariant::Full: return full;
      case SpaceVariant::TraceFree: return ring;
      case SpaceVariant::Breve: return breve;
      case SpaceVariant::Kernel: return zker;
      case SpaceVariant::KernelPerp:
      default: return zperp;
    }
  }
};

/// Closed-form dimension of P_r Lambda^j on a d-simplex.
long dim_p_lambda(int r, int j, int d);
/// Closed-form dimension of the trimmed space on a d-simplex.
long dim_trimmed(int r, int k, int d);
/// Right-hand side of the trace-free dimension identity.
long dim_trace_free(int r, int k, int d);

class FeStore;

/// ddc inner product of two polynomial k-forms on fd.s.
double ddc_inner(const SimplicialComplex& cx, const FaceData& fd, const PolyFormD& a,
                 const PolyFormD& b);

// ---------------------------------------------------------------------------
// Conforming spaces on patches
// ---------------------------------------------------------------------------

/// Trimmed finite element space on a patch with the paper's alternative
/// degrees of freedom: one block per simplex tau with k <= dim tau < r+k,
/// y-list = [volume form (dim tau = k)] + p-basis. The working basis is the
/// explicit Bernstein-Whitney spanning basis (conforming by construction,
/// grouped by block); geometric dof-dual members are built on demand by local
/// star solves.
class FeSpace {
public:
  struct Block {
    SimplexRef tau;
    int offset = 0; // first dof index
    int nvol = 0;
    int count = 0; // nvol + |pbasis|
  };

  FeSpace(FeStore& store, Patch patch, int r, int k);

  const Patch& patch() const { return patch_; }
  int r() const { return r_; }
  int k() const { return k_; }
  int dim() const { return dim_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  int block_of_dof(int dof) const;
  int block_index(SimplexRef tau) const; // -1 if tau carries no dofs
  const std::vector<PiecewiseFormD>& basis() const { return basis_; }

  double dof_value(int dof, const PiecewiseFormD& u) const;
  Vector dof_vector(const PiecewiseFormD& u) const;

  /// Coefficients of u in the working basis (valid for u in the space);
  /// `residual` reports the dof mismatch of the reconstruction.
  Vector coefficients_of(const PiecewiseFormD& u) const;
  PiecewiseFormD combine(const Vector& coeff) const;

  /// Geometric member dual to one dof (unisolvent local star solve).
  PiecewiseFormD geometric_member(int dof) const;
  /// All geometric members of the block of tau (built together).
  std::vector<PiecewiseFormD> geometric_block(SimplexRef tau) const;

  /// Dof indices of the M-part (y in the p-basis) and of interior blocks.
  std::vector<int> m_dofs() const;
  std::vector<int> interior_dofs() const;
  /// Basis of the essential-boundary-condition subspace: working-basis members
  /// of the interior blocks.
  std::vector<int> interior_member_indices() const;

  /// Geometric members for all M-part dofs: basis of M_r^k(patch).
  std::vector<PiecewiseFormD> m_basis() const;

  const Matrix& dof_matrix() const;

  struct UnisolvenceCert {
    bool nonsingular = false;
    double condition = 0.0;
    int dim = 0;
    SimplexRef offending; // block of the worst null direction when singular
  };
  UnisolvenceCert unisolvence_certificate() const;

  FeStore& store() const { return store_; }

private:
  FeStore& store_;
  Patch patch_;
  int r_, k_;
  std::vector<Block> blocks_;
  int dim_ = 0;
  std::vector<PiecewiseFormD> basis_;
  std::vector<int> basis_block_;

  mutable std::mutex mtx_;
  mutable std::unique_ptr<Matrix> dofmat_;
  mutable std::unique_ptr<Eigen::PartialPivLU<Matrix>> doflu_;
  mutable std::map<int, std::vector<PiecewiseFormD>> members_; // block index -> members

  void ensure_dof_matrix() const;
};

/// Shared cache of local face data and patch spaces for one complex.
class FeStore {
public:
  explicit FeStore(const SimplicialComplex& cx) : cx_(cx) {}
  const SimplicialComplex& cx() const { return cx_; }

  const FaceData& face(SimplexRef s, int r, int k);
  std::shared_ptr<FeSpace> space(const std::vector<int>& cells, int r, int k);
  std::shared_ptr<FeSpace> mesh_space(int r, int k);

private:
  const SimplicialComplex& cx_;
  std::mutex mtx_;
  std::map<std::tuple<int, int, int, int>, std::shared_ptr<FaceData>> faces_;
  std::map<std::tuple<std::vector<int>, int, int>, std::shared_ptr<FeSpace>> spaces_;

  std::shared_ptr<FaceData> build_face(SimplexRef s, int r, int k);
};

// ---------------------------------------------------------------------------
// Operations of the module interface
// ---------------------------------------------------------------------------

/// E_sigma: dof-duality extension of a polynomial k-form on sigma into
/// G_r^k(sigma), the star-supported space with only sigma-block dofs.
PiecewiseFormD extend(FeSpace& space, SimplexRef sigma, const PolyFormD& rho);

/// Basis of G_r^k(sigma) (the geometric block of sigma).
std::vector<PiecewiseFormD> g_basis(FeSpace& space, SimplexRef sigma);

/// Unique decomposition of u in M_r^k over (sigma, g in p-basis) blocks;
/// throws if u has a nonvanishing k-face integral beyond tol.
std::map<std::pair<SimplexRef, int>, double> m_decompose(FeSpace& space, const PiecewiseFormD& u,
                                                         double tol = 1e-8);

struct ExactnessReport {
  bool pass = true;
  std::vector<std::string> failures;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      failures.push_back(what);
    }
  }
};

/// Exactness of the trace-free and breve complexes on one simplex.
ExactnessReport check_local_exactness(FeStore& store, SimplexRef tau, int r);

/// Exactness of the patch complex R -> P^0 -> ... -> P^n -> 0 (no boundary
/// conditions) on a contractible patch.
ExactnessReport check_patch_exactness(FeStore& store, const std::vector<int>& cells, int r);

/// Empirical constant of the discrete Poincare inequality on a patch:
/// 1 / (h * sqrt(smallest nonzero generalized eigenvalue)) on the complement
/// of the kernel of d.
double discrete_poincare_constant(FeStore& store, const std::vector<int>& cells, int r, int ell,
                                  double h);

} // namespace feec

#endif
