#include "hdgch/mesh.hpp"

#include "hdgch/error.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>
#include <unordered_map>

namespace hdgch {

namespace {

constexpr int kMaxLevel = 12;
constexpr int kMaxSubdivisions = 1 << kMaxLevel;

}  // namespace

double Mesh::cell_area(int cell) const {
  const auto& c = cells.at(cell);
  const Point2 e1 = vertices[c[1]] - vertices[c[0]];
  const Point2 e2 = vertices[c[2]] - vertices[c[0]];
  return 0.5 * (e1.x() * e2.y() - e1.y() * e2.x());
}

Point2 Mesh::outward_normal(int cell, int local_face) const {
  return cell_face_signs.at(cell)[local_face] * face_normals[cell_faces[cell][local_face]];
}

std::optional<int> Mesh::locate(const Point2& x) const {
  if (!(x.x() >= 0.0 && x.x() <= 1.0 && x.y() >= 0.0 && x.y() <= 1.0)) return std::nullopt;
  const int n = subdivisions;
  const int i = std::min(static_cast<int>(std::floor(x.x() * n)), n - 1);
  const int j = std::min(static_cast<int>(std::floor(x.y() * n)), n - 1);
  const double lx = x.x() * n - i;
  const double ly = x.y() * n - j;
  // cells are created square by square: lower-right triangle first
  const int base = 2 * (j * n + i);
  return lx >= ly ? base : base + 1;
}

Mesh build_structured_mesh(int level) {
  if (level < 0) throw ParameterError("mesh level must be nonnegative, got " + std::to_string(level));
  if (level > kMaxLevel)
    throw ResourceError("mesh level " + std::to_string(level) + " exceeds the maximum of " +
                        std::to_string(kMaxLevel));
  return build_structured_mesh_n(1 << level);
}

Mesh build_structured_mesh_n(int n) {
  if (n < 1) throw ParameterError("mesh subdivisions must be positive, got " + std::to_string(n));
  if (n > kMaxSubdivisions)
    throw ResourceError("mesh with " + std::to_string(n) + " subdivisions exceeds the maximum of " +
                        std::to_string(kMaxSubdivisions));

  Mesh mesh;
  mesh.subdivisions = n;
  const auto vid = [n](int i, int j) { return j * (n + 1) + i; };
  mesh.vertices.reserve(static_cast<std::size_t>((n + 1) * (n + 1)));
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i)
      mesh.vertices.emplace_back(static_cast<double>(i) / n, static_cast<double>(j) / n);

  const std::size_t ncells = 2 * static_cast<std::size_t>(n) * n;
  mesh.cells.reserve(ncells);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int v00 = vid(i, j), v10 = vid(i + 1, j), v01 = vid(i, j + 1), v11 = vid(i + 1, j + 1);
      mesh.cells.push_back({v00, v10, v11});
      mesh.cells.push_back({v00, v11, v01});
    }
  }

  std::unordered_map<long long, int> edge_index;
  edge_index.reserve(3 * ncells);
  const long long stride = static_cast<long long>(mesh.vertices.size());
  mesh.cell_faces.resize(ncells);
  mesh.cell_face_signs.resize(ncells);
  for (std::size_t c = 0; c < ncells; ++c) {
    const auto& tri = mesh.cells[c];
    for (int lf = 0; lf < 3; ++lf) {
      const int a = tri[lf];
      const int b = tri[(lf + 1) % 3];
      const int lo = std::min(a, b), hi = std::max(a, b);
      const long long key = lo * stride + hi;
      auto [it, inserted] = edge_index.try_emplace(key, mesh.num_faces());
      if (inserted) {
        mesh.faces.push_back({lo, hi});
        const Point2 t = mesh.vertices[hi] - mesh.vertices[lo];
        mesh.face_normals.emplace_back(Point2(t.y(), -t.x()).normalized());
        mesh.face_cells.push_back({static_cast<int>(c), -1});
      } else {
        mesh.face_cells[it->second][1] = static_cast<int>(c);
      }
      const int f = it->second;
      mesh.cell_faces[c][lf] = f;
      // counterclockwise traversal a->b has outward normal (t_y, -t_x)
      const Point2 t = mesh.vertices[b] - mesh.vertices[a];
      const Point2 out(t.y(), -t.x());
      mesh.cell_face_signs[c][lf] = out.dot(mesh.face_normals[f]) > 0.0 ? 1 : -1;
    }
  }
  mesh.boundary.resize(mesh.faces.size());
  for (int f = 0; f < mesh.num_faces(); ++f) mesh.boundary[f] = mesh.face_cells[f][1] < 0;
  return mesh;
}

FaceGeometry face_geometry(const Mesh& mesh, int face) {
  if (face < 0 || face >= mesh.num_faces())
    throw IndexError("face id " + std::to_string(face) + " out of range [0, " +
                     std::to_string(mesh.num_faces()) + ")");
  const Point2& a = mesh.vertices[mesh.faces[face][0]];
  const Point2& b = mesh.vertices[mesh.faces[face][1]];
  return {(b - a).norm(), mesh.face_normals[face], 0.5 * (a + b)};
}

void write_mesh_dump(const Mesh& mesh, std::ostream& os) {
  os.precision(17);
  for (const auto& v : mesh.vertices) os << "v " << v.x() << ' ' << v.y() << '\n';
  for (const auto& c : mesh.cells) os << "c " << c[0] << ' ' << c[1] << ' ' << c[2] << '\n';
  for (int f = 0; f < mesh.num_faces(); ++f)
    os << "f " << mesh.faces[f][0] << ' ' << mesh.faces[f][1] << ' ' << mesh.face_normals[f].x() << ' '
       << mesh.face_normals[f].y() << ' ' << (mesh.boundary[f] ? 1 : 0) << '\n';
}

}  // namespace hdgch
