#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "paro/geometry.hpp"

namespace paro {

/// Simplex of a mesh generation. Vertices are stored in the ordering used by
/// the recursive bisection scheme: the refinement edge always runs between
/// the first and last listed vertices, and `type` cycles through 0..dim-1 as
/// generations descend.
struct Element {
  std::array<std::uint32_t, 4> v{};  // dim+1 entries used
  std::uint8_t type = 0;
  std::uint32_t generation = 0;
  std::uint32_t parent = kNoParent;  // element index in the parent mesh

  static constexpr std::uint32_t kNoParent = 0xffffffffu;
};

/// Interior face shared by exactly two elements (edge in 2D, triangle in 3D).
struct InteriorFace {
  std::array<std::uint32_t, 3> v{};  // dim entries used, sorted
  std::uint32_t elem[2] = {0, 0};
};

/// Conforming simplicial mesh, one generation of a nested refinement family.
///
/// Meshes are immutable: bisect() returns the next generation. Vertex storage
/// is append-only along a lineage, so a descendant mesh shares the vertex
/// indices of all its ancestors; each appended vertex records the edge
/// midpoint it came from, which makes exact P1 transfer between generations
/// a local average.
class Mesh {
 public:
  /// Builds a mesh from raw data and validates conformity. `vertex_parents`
  /// may be empty for a root mesh (each vertex is then its own parent).
  static Mesh from_raw(int dim, Box box, std::vector<Vec3> vertices, std::vector<Element> elements,
                       std::vector<std::pair<std::uint32_t, std::uint32_t>> vertex_parents = {});

  int dimension() const { return dim_; }
  const Box& domain_box() const { return box_; }
  std::size_t vertex_count() const { return vertices_.size(); }
  std::size_t element_count() const { return elements_.size(); }
  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Element>& elements() const { return elements_; }
  const std::vector<InteriorFace>& interior_faces() const { return interior_faces_; }
  const std::vector<bool>& boundary_vertex_mask() const { return boundary_vertex_; }
  const std::vector<std::pair<std::uint32_t, std::uint32_t>>& vertex_parents() const {
    return vertex_parents_;
  }

  std::uint64_t id() const { return id_; }
  /// Ancestor mesh ids, oldest first; the last entry is this mesh's own id.
  const std::vector<std::uint64_t>& ancestry() const { return ancestry_; }
  std::size_t generation_index() const { return ancestry_.size() - 1; }
  bool is_descendant_of(const Mesh& other) const;

  Vec3 element_vertex(std::size_t e, int local) const { return vertices_[elements_[e].v[local]]; }
  double element_volume(std::size_t e) const { return volumes_[e]; }
  double element_diameter(std::size_t e) const;
  /// Diameter of the largest inscribed ball.
  double element_inball_diameter(std::size_t e) const;
  Vec3 element_barycenter(std::size_t e) const;

  /// Barycentric coordinates of x with respect to element e (dim+1 entries).
  std::array<double, 4> barycentric(std::size_t e, const Vec3& x) const;

  /// Bisects every marked element at least once, plus whatever closure needs;
  /// returns the refined generation. The receiver is unchanged.
  Mesh bisect(const std::vector<std::size_t>& marked) const;

  /// Largest h_tau / rho_tau over all elements.
  double shape_regularity() const;

  /// Element containing x, lowest index on ties; nullopt outside the box.
  std::optional<std::size_t> locate_point(const Vec3& x) const;

  /// Plain-text dump: "dim nv ne" header, vertex lines, element lines.
  void dump(std::ostream& os) const;
  std::string dump_string() const;

  double total_volume() const;

 private:
  Mesh() = default;
  void finalize();  // volumes, faces, conformity check

  int dim_ = 2;
  Box box_;
  std::vector<Vec3> vertices_;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> vertex_parents_;
  std::vector<Element> elements_;
  std::vector<InteriorFace> interior_faces_;
  std::vector<bool> boundary_vertex_;
  std::vector<double> volumes_;
  std::uint64_t id_ = 0;
  std::vector<std::uint64_t> ancestry_;
};

/// Uniform simplicial mesh of an axis-aligned box: each grid cell splits into
/// 2 triangles (2D) or 6 tetrahedra (3D, Kuhn decomposition), with refinement
/// edges on the cell diagonal so that later bisection terminates.
Mesh create_box_mesh(const Box& box, int subdivisions);

}  // namespace paro
