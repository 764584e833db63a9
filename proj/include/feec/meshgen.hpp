#ifndef FEEC_MESHGEN_HPP
#define FEEC_MESHGEN_HPP

#include <memory>
#include <string>

#include "feec/complex.hpp"

namespace feec {

struct MeshData {
  int n = 0;
  Eigen::MatrixXd vertices;             // n x #vertices
  std::vector<std::vector<int>> cells;  // as given (orientation recorded on load)
};

/// Freudenthal/Kuhn triangulation of [0,1]^n with m divisions per axis,
/// n in {1,2,3}. The family obtained by doubling m is shape-regular.
MeshData structured_mesh(int n, int m);

MeshData load_mesh_json(const std::string& path);
void save_mesh_json(const MeshData& mesh, const std::string& path);

std::shared_ptr<SimplicialComplex> build_complex(const MeshData& mesh);

} // namespace feec

#endif
