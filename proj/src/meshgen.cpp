#include "feec/meshgen.hpp"

#include <fstream>

#include <json.hpp>

namespace feec {

MeshData structured_mesh(int n, int m) {
  if (n < 1 || n > 3) throw Error("structured_mesh: n must be 1, 2 or 3");
  if (m < 1) throw Error("structured_mesh: m must be >= 1");
  MeshData mesh;
  mesh.n = n;
  const int s = m + 1;
  auto vid = [&](int i, int j, int k) { return (k * s + j) * s + i; };

  if (n == 1) {
    mesh.vertices.resize(1, s);
    for (int i = 0; i < s; ++i) mesh.vertices(0, i) = double(i) / m;
    for (int i = 0; i < m; ++i) mesh.cells.push_back({i, i + 1});
    return mesh;
  }
  if (n == 2) {
    mesh.vertices.resize(2, s * s);
    for (int j = 0; j < s; ++j) {
      for (int i = 0; i < s; ++i) {
        mesh.vertices(0, vid(i, j, 0)) = double(i) / m;
        mesh.vertices(1, vid(i, j, 0)) = double(j) / m;
      }
    }
    for (int j = 0; j < m; ++j) {
      for (int i = 0; i < m; ++i) {
        int a = vid(i, j, 0), b = vid(i + 1, j, 0), c = vid(i, j + 1, 0), d = vid(i + 1, j + 1, 0);
        mesh.cells.push_back({a, b, d});
        mesh.cells.push_back({a, d, c});
      }
    }
    return mesh;
  }
  // n == 3: Kuhn subdivision, 6 tetrahedra per cube along vertex-order paths
  mesh.vertices.resize(3, s * s * s);
  for (int k = 0; k < s; ++k) {
    for (int j = 0; j < s; ++j) {
      for (int i = 0; i < s; ++i) {
        int id = vid(i, j, k);
        mesh.vertices(0, id) = double(i) / m;
        mesh.vertices(1, id) = double(j) / m;
        mesh.vertices(2, id) = double(k) / m;
      }
    }
  }
  const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (int k = 0; k < m; ++k) {
    for (int j = 0; j < m; ++j) {
      for (int i = 0; i < m; ++i) {
        for (const auto& p : perms) {
          int at[3] = {i, j, k};
          std::vector<int> tet;
          tet.push_back(vid(at[0], at[1], at[2]));
          for (int step = 0; step < 3; ++step) {
            ++at[p[step]];
            tet.push_back(vid(at[0], at[1], at[2]));
          }
          mesh.cells.push_back(tet);
        }
      }
    }
  }
  return mesh;
}

MeshData load_mesh_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("load_mesh_json: cannot open " + path);
  nlohmann::json j;
  in >> j;
  MeshData mesh;
  mesh.n = j.at("dim").get<int>();
  const auto& verts = j.at("vertices");
  mesh.vertices.resize(mesh.n, verts.size());
  for (std::size_t i = 0; i < verts.size(); ++i) {
    if (static_cast<int>(verts[i].size()) != mesh.n) throw Error("load_mesh_json: bad vertex arity");
    for (int d = 0; d < mesh.n; ++d) mesh.vertices(d, i) = verts[i][d].get<double>();
  }
  for (const auto& c : j.at("cells")) mesh.cells.push_back(c.get<std::vector<int>>());
  return mesh;
}

void save_mesh_json(const MeshData& mesh, const std::string& path) {
  nlohmann::ordered_json j;
  j["dim"] = mesh.n;
  auto& verts = j["vertices"] = nlohmann::ordered_json::array();
  for (int i = 0; i < mesh.vertices.cols(); ++i) {
    std::vector<double> row(mesh.n);
    for (int d = 0; d < mesh.n; ++d) row[d] = mesh.vertices(d, i);
    verts.push_back(row);
  }
  j["cells"] = mesh.cells;
  std::ofstream out(path);
  if (!out) throw Error("save_mesh_json: cannot open " + path);
  out << j.dump(1) << "\n";
}

std::shared_ptr<SimplicialComplex> build_complex(const MeshData& mesh) {
  return std::make_shared<SimplicialComplex>(mesh.vertices, mesh.cells);
}

} // namespace feec
