#ifndef FEEC_COMPLEX_HPP
#define FEEC_COMPLEX_HPP

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <vector>

#include "feec/densela.hpp"

namespace feec {

/// Oriented simplex: strictly increasing global vertex ids. The default
/// orientation of every simplex is the one induced by the global vertex order.
struct Simplex {
  std::vector<int> v;
  int dim() const { return static_cast<int>(v.size()) - 1; }
};

/// (dimension, index into the skeleton of that dimension)
struct SimplexRef {
  int dim = -1;
  int idx = -1;
  bool operator==(const SimplexRef& o) const { return dim == o.dim && idx == o.idx; }
  bool operator<(const SimplexRef& o) const { return dim != o.dim ? dim < o.dim : idx < o.idx; }
};

/// Integer sparse column: (row index, sign) entries of one boundary column.
using SignedFaces = std::vector<std::pair<int, int>>;

struct Chain {
  int degree = 0;
  std::map<int, double> coeff; // simplex index -> coefficient
};

struct Cochain {
  int degree = 0;
  std::map<int, double> coeff;
  double operator()(int idx) const {
    auto it = coeff.find(idx);
    return it == coeff.end() ? 0.0 : it->second;
  }
};

struct ShapeReport {
  double shape_regularity_constant = 0.0; // max h_T / rho_T over cells
  double h_min = 0.0, h_max = 0.0;
  std::vector<int> star_sizes; // |st_h(v)| per vertex
};

class SimplicialComplex {
public:
  /// Builds the full skeleton of the triangulation given by `cells`
  /// (n-simplex vertex tuples into `vertices`). Cells need not be sorted;
  /// the per-cell orientation sign relative to the sorted order is recorded.
  /// Throws on degenerate or duplicate cells and dimension mismatch.
  SimplicialComplex(const Eigen::MatrixXd& vertices, const std::vector<std::vector<int>>& cells);

  int n() const { return n_; }
  int num(int k) const { return static_cast<int>(skel_[k].size()); }
  int num_cells() const { return num(n_); }
  const Simplex& simplex(SimplexRef s) const { return skel_[s.dim][s.idx]; }
  const Eigen::MatrixXd& vertex_coords() const { return X_; }
  Eigen::VectorXd vertex(int i) const { return X_.col(i); }
  std::optional<int> find(int k, const std::vector<int>& sorted_vertices) const;
  int input_cell_sign(int cell) const { return cell_sign_[cell]; }

  /// Signed faces of simplex (k, i): entries (face index in skel[k-1], sign),
  /// signs from the alternating-sum boundary formula.
  const SignedFaces& faces(int k, int i) const { return faces_[k][i]; }
  /// Cofaces one dimension up (unsigned).
  const std::vector<int>& cofaces(int k, int i) const { return cofaces_[k][i]; }

  /// Boundary matrix of degree k as raw columns (one per k-simplex).
  const std::vector<SignedFaces>& boundary_columns(int k) const { return faces_[k]; }

  Chain boundary(const Chain& c) const;      // degree k >= 1, else throws
  Cochain coboundary(const Cochain& X) const; // degree k <= n-1, else throws

  /// st_h / es_h / es2_h as sorted lists of n-simplex indices.
  std::vector<int> star_cells(SimplexRef s) const;
  std::vector<int> extended_star_cells(SimplexRef s) const;
  std::vector<int> extended_star2_cells(SimplexRef s) const;

  double h(SimplexRef s) const { return h_[s.dim][s.idx]; }
  double cell_volume(int cell) const { return cell_volume_[cell]; }
  double cell_inradius_diameter(int cell) const { return cell_rho_[cell]; }
  double measure(SimplexRef s) const { return measure_[s.dim][s.idx]; } // d-volume, 1 for vertices

  ShapeReport shape_report() const;

  /// Local index positions of the (sub)simplex vertices inside cell `t`
  /// (t given as SimplexRef of any dim containing s).
  std::vector<int> vertex_positions_in(SimplexRef s, SimplexRef t) const;
  bool contains(SimplexRef small, SimplexRef big) const;

  /// Connectedness (through shared facets) and Euler characteristic of the
  /// subcomplex spanned by `cells`; proxy check for patch contractibility.
  std::pair<bool, long> patch_connected_euler(const std::vector<int>& cells) const;

private:
  int n_ = 0;
  Eigen::MatrixXd X_; // n x #vertices
  std::vector<std::vector<Simplex>> skel_;
  std::vector<std::map<std::vector<int>, int>> lookup_;
  std::vector<std::vector<SignedFaces>> faces_;
  std::vector<std::vector<std::vector<int>>> cofaces_;
  std::vector<std::vector<int>> vertex_cells_; // vertex -> containing n-simplices
  std::vector<int> cell_sign_;
  std::vector<std::vector<double>> h_;
  std::vector<std::vector<double>> measure_;
  std::vector<double> cell_volume_;
  std::vector<double> cell_rho_;
};

/// d_k d_{k+1} = 0 as an exact integer statement on the given boundary data
/// (exposed so corrupted data can be fed by the negative-control tests).
bool boundary_squares_to_zero(const std::vector<SignedFaces>& bnd_k,
                              const std::vector<SignedFaces>& bnd_kp1, int rows_km1);

double simplex_measure(const Eigen::MatrixXd& pts); // d-volume of a d-simplex given n x (d+1) coords

} // namespace feec

#endif
