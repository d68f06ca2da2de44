#pragma once

#include <Eigen/Core>

#include <array>
#include <iosfwd>
#include <optional>
#include <vector>

namespace hdgch {

using Point2 = Eigen::Vector2d;

/// Triangulation of the unit square built from n x n squares, each cut along
/// its (0,0)-(1,1) diagonal. Immutable after construction.
///
/// Local face i of a cell joins cell vertices i and (i+1)%3. Every face stores
/// one canonical unit normal; `cell_face_sign` is +1 where the cell's outward
/// normal equals it and -1 otherwise.
struct Mesh {
  int subdivisions = 0;
  std::vector<Point2> vertices;
  std::vector<std::array<int, 3>> cells;
  std::vector<std::array<int, 2>> faces;
  std::vector<Point2> face_normals;
  std::vector<std::array<int, 3>> cell_faces;
  std::vector<std::array<int, 3>> cell_face_signs;
  /// Adjacent cells of each face; the second entry is -1 on the boundary.
  std::vector<std::array<int, 2>> face_cells;
  std::vector<bool> boundary;

  int num_cells() const { return static_cast<int>(cells.size()); }
  int num_faces() const { return static_cast<int>(faces.size()); }
  int num_vertices() const { return static_cast<int>(vertices.size()); }

  double cell_area(int cell) const;
  /// Outward unit normal of `cell` on its local face `local_face`.
  Point2 outward_normal(int cell, int local_face) const;
  /// Square side length 1/n; h/sqrt(2) in the usual diameter convention.
  double square_side() const { return 1.0 / subdivisions; }

  /// Cell containing `x` (points on shared edges resolve deterministically).
  std::optional<int> locate(const Point2& x) const;
};

struct FaceGeometry {
  double length;
  Point2 normal;
  Point2 midpoint;
};

/// Level L gives 2^L x 2^L squares (2 * 4^L cells, h/sqrt(2) = 2^-L).
Mesh build_structured_mesh(int level);
/// Uniform mesh with n x n squares.
Mesh build_structured_mesh_n(int n);

FaceGeometry face_geometry(const Mesh& mesh, int face);

/// Debug dump: "v x y", "c a b c", "f a b nx ny boundary" records, one per line.
void write_mesh_dump(const Mesh& mesh, std::ostream& os);

}  // namespace hdgch
