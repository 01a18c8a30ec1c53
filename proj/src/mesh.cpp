#include "paro/mesh.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "paro/errors.hpp"

namespace paro {

namespace {

std::uint64_t next_mesh_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1);
}

std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

double simplex_volume(int dim, const Vec3& p0, const Vec3& p1, const Vec3& p2, const Vec3& p3) {
  if (dim == 2) {
    const Vec3 u = p1 - p0, v = p2 - p0;
    return 0.5 * std::abs(u.x * v.y - u.y * v.x);
  }
  const Vec3 u = p1 - p0, v = p2 - p0, w = p3 - p0;
  return std::abs(dot(u, cross(v, w))) / 6.0;
}

double triangle_area3d(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * norm(cross(b - a, c - a));
}

}  // namespace

Mesh Mesh::from_raw(int dim, Box box, std::vector<Vec3> vertices, std::vector<Element> elements,
                    std::vector<std::pair<std::uint32_t, std::uint32_t>> vertex_parents) {
  if (dim != 2 && dim != 3) throw InvalidArgumentError("mesh dimension must be 2 or 3");
  Mesh m;
  m.dim_ = dim;
  m.box_ = box;
  m.box_.dim = dim;
  m.vertices_ = std::move(vertices);
  m.elements_ = std::move(elements);
  if (vertex_parents.empty()) {
    m.vertex_parents_.resize(m.vertices_.size());
    for (std::uint32_t i = 0; i < m.vertices_.size(); ++i) m.vertex_parents_[i] = {i, i};
  } else {
    m.vertex_parents_ = std::move(vertex_parents);
  }
  m.id_ = next_mesh_id();
  m.ancestry_ = {m.id_};
  m.finalize();
  return m;
}

void Mesh::finalize() {
  const int nv_local = dim_ + 1;
  volumes_.resize(elements_.size());
  for (std::size_t e = 0; e < elements_.size(); ++e) {
    const auto& el = elements_[e];
    const Vec3& p3 = dim_ == 3 ? vertices_[el.v[3]] : Vec3{};
    volumes_[e] = simplex_volume(dim_, vertices_[el.v[0]], vertices_[el.v[1]], vertices_[el.v[2]], p3);
    if (!(volumes_[e] > 0.0)) throw Error("mesh: element with non-positive volume");
  }

  // Face ownership map doubles as the conformity check: every face has one
  // owner (boundary) or two (interior).
  std::map<std::array<std::uint32_t, 3>, std::vector<std::uint32_t>> owners;
  for (std::size_t e = 0; e < elements_.size(); ++e) {
    const auto& el = elements_[e];
    for (int skip = 0; skip < nv_local; ++skip) {
      std::array<std::uint32_t, 3> face{0, 0, 0};
      int k = 0;
      for (int i = 0; i < nv_local; ++i) {
        if (i != skip) face[k++] = el.v[i];
      }
      std::sort(face.begin(), face.begin() + dim_);
      owners[face].push_back(static_cast<std::uint32_t>(e));
    }
  }
  interior_faces_.clear();
  boundary_vertex_.assign(vertices_.size(), false);
  for (const auto& [face, own] : owners) {
    if (own.size() == 2) {
      InteriorFace f;
      f.v = face;
      f.elem[0] = own[0];
      f.elem[1] = own[1];
      interior_faces_.push_back(f);
    } else if (own.size() == 1) {
      for (int i = 0; i < dim_; ++i) boundary_vertex_[face[i]] = true;
    } else {
      throw Error("mesh: conformity violated, face with " + std::to_string(own.size()) + " owners");
    }
  }
}

bool Mesh::is_descendant_of(const Mesh& other) const {
  return std::find(ancestry_.begin(), ancestry_.end(), other.id_) != ancestry_.end();
}

double Mesh::element_diameter(std::size_t e) const {
  const auto& el = elements_[e];
  double h = 0.0;
  for (int i = 0; i <= dim_; ++i) {
    for (int j = i + 1; j <= dim_; ++j) {
      h = std::max(h, distance(vertices_[el.v[i]], vertices_[el.v[j]]));
    }
  }
  return h;
}

double Mesh::element_inball_diameter(std::size_t e) const {
  const auto& el = elements_[e];
  if (dim_ == 2) {
    const double per = distance(vertices_[el.v[0]], vertices_[el.v[1]]) +
                       distance(vertices_[el.v[1]], vertices_[el.v[2]]) +
                       distance(vertices_[el.v[2]], vertices_[el.v[0]]);
    return 4.0 * volumes_[e] / per;  // 2 * (2A / perimeter)
  }
  double area = 0.0;
  for (int skip = 0; skip < 4; ++skip) {
    const Vec3& a = vertices_[el.v[(skip + 1) % 4]];
    const Vec3& b = vertices_[el.v[(skip + 2) % 4]];
    const Vec3& c = vertices_[el.v[(skip + 3) % 4]];
    area += triangle_area3d(a, b, c);
  }
  return 6.0 * volumes_[e] / area;  // 2 * (3V / total face area)
}

Vec3 Mesh::element_barycenter(std::size_t e) const {
  Vec3 c;
  const auto& el = elements_[e];
  for (int i = 0; i <= dim_; ++i) c = c + vertices_[el.v[i]];
  return (1.0 / (dim_ + 1)) * c;
}

std::array<double, 4> Mesh::barycentric(std::size_t e, const Vec3& x) const {
  const auto& el = elements_[e];
  std::array<double, 4> lam{0, 0, 0, 0};
  const Vec3& p0 = vertices_[el.v[0]];
  if (dim_ == 2) {
    const Vec3 a = vertices_[el.v[1]] - p0, b = vertices_[el.v[2]] - p0, r = x - p0;
    const double det = a.x * b.y - a.y * b.x;
    lam[1] = (r.x * b.y - r.y * b.x) / det;
    lam[2] = (a.x * r.y - a.y * r.x) / det;
    lam[0] = 1.0 - lam[1] - lam[2];
  } else {
    const Vec3 a = vertices_[el.v[1]] - p0, b = vertices_[el.v[2]] - p0, c = vertices_[el.v[3]] - p0;
    const Vec3 r = x - p0;
    const double det = dot(a, cross(b, c));
    lam[1] = dot(r, cross(b, c)) / det;
    lam[2] = dot(a, cross(r, c)) / det;
    lam[3] = dot(a, cross(b, r)) / det;
    lam[0] = 1.0 - lam[1] - lam[2] - lam[3];
  }
  return lam;
}

double Mesh::shape_regularity() const {
  double worst = 0.0;
  for (std::size_t e = 0; e < elements_.size(); ++e) {
    worst = std::max(worst, element_diameter(e) / element_inball_diameter(e));
  }
  return worst;
}

std::optional<std::size_t> Mesh::locate_point(const Vec3& x) const {
  if (!box_.contains(x, 1e-12)) return std::nullopt;
  for (std::size_t e = 0; e < elements_.size(); ++e) {
    const auto lam = barycentric(e, x);
    const double tol = -1e-12;
    bool inside = true;
    for (int i = 0; i <= dim_; ++i) {
      if (lam[i] < tol) {
        inside = false;
        break;
      }
    }
    if (inside) return e;
  }
  return std::nullopt;
}

double Mesh::total_volume() const {
  double v = 0.0;
  for (double w : volumes_) v += w;
  return v;
}

void Mesh::dump(std::ostream& os) const {
  char buf[128];
  os << dim_ << ' ' << vertices_.size() << ' ' << elements_.size() << '\n';
  for (const auto& p : vertices_) {
    if (dim_ == 2) {
      std::snprintf(buf, sizeof buf, "%.17g %.17g\n", p.x, p.y);
    } else {
      std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", p.x, p.y, p.z);
    }
    os << buf;
  }
  // Element line: vertex indices, local refinement-edge index, bisection type.
  // The refinement edge joins the first and last listed vertices, which is
  // local edge 1 in 2D and local edge 2 in 3D under lexicographic numbering.
  const int ref_edge_index = dim_ == 2 ? 1 : 2;
  for (const auto& el : elements_) {
    for (int i = 0; i <= dim_; ++i) os << el.v[i] << ' ';
    os << ref_edge_index << ' ' << static_cast<int>(el.type) << '\n';
  }
}

std::string Mesh::dump_string() const {
  std::ostringstream os;
  dump(os);
  return os.str();
}

// ---------------------------------------------------------------------------
// Bisection
// ---------------------------------------------------------------------------

namespace {

/// Children of a tagged simplex (x0..xd)_t with refinement edge (x0, xd) and
/// new midpoint m. Both children are tagged (t+1) mod d; the second child
/// reverses the tail of the middle vertices when t == 0 style ordering asks
/// for it. This is the standard d-dimensional tagged bisection rule.
void tagged_children(int dim, const Element& parent, std::uint32_t mid, std::uint32_t parent_index,
                     Element& child_a, Element& child_b) {
  const int d = dim;
  const int t = parent.type;
  child_a = Element{};
  child_b = Element{};
  child_a.type = child_b.type = static_cast<std::uint8_t>((t + 1) % d);
  child_a.generation = child_b.generation = parent.generation + 1;
  child_a.parent = child_b.parent = parent_index;

  // child A: (x0, m, x1, ..., x_{d-1})
  child_a.v[0] = parent.v[0];
  child_a.v[1] = mid;
  for (int i = 1; i <= d - 1; ++i) child_a.v[i + 1] = parent.v[i];

  // child B: (xd, m, x1, ..., x_t, x_{d-1}, ..., x_{t+1})
  child_b.v[0] = parent.v[d];
  child_b.v[1] = mid;
  int k = 2;
  for (int i = 1; i <= t; ++i) child_b.v[k++] = parent.v[i];
  for (int i = d - 1; i >= t + 1; --i) child_b.v[k++] = parent.v[i];
}

struct RefineWorkspace {
  int dim;
  std::vector<Vec3> vertices;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> vertex_parents;
  std::vector<Element> elements;  // grows; dead entries flagged
  std::vector<std::uint32_t> root;  // containing element index in the input mesh
  std::vector<bool> alive;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> edge_elems;  // lazy, filter by alive
  std::unordered_map<std::uint64_t, std::uint32_t> midpoints;
  std::size_t bisections = 0;
  std::size_t bisection_cap = 0;

  void register_element(std::uint32_t e) {
    const auto& el = elements[e];
    for (int i = 0; i <= dim; ++i) {
      for (int j = i + 1; j <= dim; ++j) {
        edge_elems[edge_key(el.v[i], el.v[j])].push_back(e);
      }
    }
  }

  /// Alive elements containing edge (a, b), ascending index.
  std::vector<std::uint32_t> elements_on_edge(std::uint32_t a, std::uint32_t b) {
    std::vector<std::uint32_t> out;
    auto it = edge_elems.find(edge_key(a, b));
    if (it == edge_elems.end()) return out;
    auto& list = it->second;
    list.erase(std::remove_if(list.begin(), list.end(), [&](std::uint32_t e) { return !alive[e]; }),
               list.end());
    out = list;
    std::sort(out.begin(), out.end());
    return out;
  }

  std::uint32_t midpoint(std::uint32_t a, std::uint32_t b) {
    const auto key = edge_key(a, b);
    auto it = midpoints.find(key);
    if (it != midpoints.end()) return it->second;
    const std::uint32_t idx = static_cast<std::uint32_t>(vertices.size());
    vertices.push_back(0.5 * (vertices[a] + vertices[b]));
    vertex_parents.push_back({std::min(a, b), std::max(a, b)});
    midpoints.emplace(key, idx);
    return idx;
  }

  /// Bisects all alive elements whose refinement edge is (a, b). Callers must
  /// ensure no alive element contains (a, b) with a different refinement edge,
  /// so this patch operation keeps the mesh conforming.
  void bisect_patch(std::uint32_t a, std::uint32_t b) {
    const auto patch = elements_on_edge(a, b);
    const std::uint32_t mid = midpoint(a, b);
    for (std::uint32_t e : patch) {
      Element ca, cb;
      tagged_children(dim, elements[e], mid, e, ca, cb);
      ca.parent = cb.parent = root[e];
      alive[e] = false;
      const auto ia = static_cast<std::uint32_t>(elements.size());
      elements.push_back(ca);
      root.push_back(root[e]);
      alive.push_back(true);
      register_element(ia);
      const auto ib = static_cast<std::uint32_t>(elements.size());
      elements.push_back(cb);
      root.push_back(root[e]);
      alive.push_back(true);
      register_element(ib);
      ++bisections;
    }
    if (bisections > bisection_cap) {
      throw Error("mesh: bisection closure exceeded its work cap (non-terminating closure?)");
    }
  }

  /// Recursive closure: make every element sharing the refinement edge of
  /// `target` compatible, then bisect the whole edge patch at once.
  void refine_element(std::uint32_t target) {
    std::vector<std::uint32_t> stack{target};
    while (!stack.empty()) {
      const std::uint32_t t = stack.back();
      if (!alive[t]) {
        stack.pop_back();
        continue;
      }
      const auto& el = elements[t];
      const std::uint32_t a = el.v[0], b = el.v[dim];
      std::uint32_t incompatible = Element::kNoParent;
      for (std::uint32_t e : elements_on_edge(a, b)) {
        const auto& other = elements[e];
        if (edge_key(other.v[0], other.v[dim]) != edge_key(a, b)) {
          incompatible = e;
          break;
        }
      }
      if (incompatible != Element::kNoParent) {
        if (stack.size() > elements.size() + 16) {
          throw Error("mesh: bisection closure recursion failed to make progress");
        }
        stack.push_back(incompatible);
        continue;
      }
      bisect_patch(a, b);
      stack.pop_back();
    }
  }
};

}  // namespace

Mesh Mesh::bisect(const std::vector<std::size_t>& marked) const {
  for (std::size_t m : marked) {
    if (m >= elements_.size()) throw InvalidArgumentError("bisect: marked element index out of range");
  }

  RefineWorkspace ws;
  ws.dim = dim_;
  ws.vertices = vertices_;
  ws.vertex_parents = vertex_parents_;
  ws.elements = elements_;
  ws.root.resize(elements_.size());
  for (std::uint32_t e = 0; e < elements_.size(); ++e) ws.root[e] = e;
  ws.alive.assign(elements_.size(), true);
  ws.bisection_cap = 100 * std::max<std::size_t>(marked.size(), 1) + elements_.size();
  for (std::uint32_t e = 0; e < elements_.size(); ++e) ws.register_element(e);

  for (std::size_t m : marked) {
    if (ws.alive[m]) ws.refine_element(static_cast<std::uint32_t>(m));
  }

  Mesh out;
  out.dim_ = dim_;
  out.box_ = box_;
  out.vertices_ = std::move(ws.vertices);
  out.vertex_parents_ = std::move(ws.vertex_parents);
  out.elements_.reserve(ws.elements.size());
  // Surviving originals keep their relative order, children follow in birth
  // order: deterministic regardless of marking order duplicates.
  for (std::size_t e = 0; e < ws.elements.size(); ++e) {
    if (!ws.alive[e]) continue;
    Element el = ws.elements[e];
    el.parent = ws.root[e];  // containing element of the input generation
    out.elements_.push_back(el);
  }
  out.id_ = next_mesh_id();
  out.ancestry_ = ancestry_;
  out.ancestry_.push_back(out.id_);
  out.finalize();
  return out;
}

// ---------------------------------------------------------------------------
// Box meshes
// ---------------------------------------------------------------------------

Mesh create_box_mesh(const Box& box, int subdivisions) {
  if (subdivisions < 1) throw InvalidArgumentError("create_box_mesh: subdivisions must be >= 1");
  const int d = box.dim;
  if (d != 2 && d != 3) throw InvalidArgumentError("create_box_mesh: dimension must be 2 or 3");
  for (int k = 0; k < d; ++k) {
    if (!(box.hi[k] - box.lo[k] > 0.0)) {
      throw InvalidArgumentError("create_box_mesh: box has non-positive edge length");
    }
  }

  const int n = subdivisions;
  const int nzv = d == 3 ? n + 1 : 1;
  std::vector<Vec3> vertices;
  vertices.reserve(static_cast<std::size_t>(n + 1) * (n + 1) * nzv);
  auto vid = [&](int i, int j, int k) {
    return static_cast<std::uint32_t>((k * (n + 1) + j) * (n + 1) + i);
  };
  for (int k = 0; k < nzv; ++k) {
    for (int j = 0; j <= n; ++j) {
      for (int i = 0; i <= n; ++i) {
        Vec3 p;
        p.x = box.lo.x + (box.hi.x - box.lo.x) * i / n;
        p.y = box.lo.y + (box.hi.y - box.lo.y) * j / n;
        if (d == 3) p.z = box.lo.z + (box.hi.z - box.lo.z) * k / n;
        vertices.push_back(p);
      }
    }
  }

  std::vector<Element> elements;
  if (d == 2) {
    // Two triangles per cell, refinement edge on the cell diagonal (the
    // longest edge of both).
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        Element a, b;
        a.v = {vid(i, j, 0), vid(i + 1, j, 0), vid(i + 1, j + 1, 0)};
        b.v = {vid(i, j, 0), vid(i, j + 1, 0), vid(i + 1, j + 1, 0)};
        a.type = b.type = 0;
        elements.push_back(a);
        elements.push_back(b);
      }
    }
  } else {
    // Kuhn decomposition: one tetrahedron per monotone corner-to-corner path,
    // all sharing the cell diagonal as refinement edge.
    constexpr int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (int k = 0; k < n; ++k) {
      for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
          for (const auto& perm : perms) {
            Element t;
            int c[3] = {i, j, k};
            t.v[0] = vid(c[0], c[1], c[2]);
            for (int step = 0; step < 3; ++step) {
              c[perm[step]] += 1;
              t.v[step + 1] = vid(c[0], c[1], c[2]);
            }
            t.type = 0;
            elements.push_back(t);
          }
        }
      }
    }
  }

  return Mesh::from_raw(d, box, std::move(vertices), std::move(elements));
}

}  // namespace paro
