#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "paro/errors.hpp"
#include "paro/mesh.hpp"

using namespace paro;

namespace {

Box unit_box(int dim) {
  Box b;
  b.dim = dim;
  b.lo = {0, 0, 0};
  b.hi = {1, 1, 1};
  return b;
}

Mesh single_triangle(Vec3 a, Vec3 b, Vec3 c) {
  Box box;
  box.dim = 2;
  box.lo = {std::min({a.x, b.x, c.x}), std::min({a.y, b.y, c.y}), 0};
  box.hi = {std::max({a.x, b.x, c.x}), std::max({a.y, b.y, c.y}), 0};
  Element el;
  el.v = {0, 1, 2};
  return Mesh::from_raw(2, box, {a, b, c}, {el});
}

void check_conforming(const Mesh& m) {
  // from_raw/bisect already face-count; re-derive the counts here as an
  // explicit assertion independent of the constructor.
  std::map<std::vector<std::uint32_t>, int> owners;
  for (std::size_t e = 0; e < m.element_count(); ++e) {
    const auto& el = m.elements()[e];
    for (int skip = 0; skip <= m.dimension(); ++skip) {
      std::vector<std::uint32_t> f;
      for (int i = 0; i <= m.dimension(); ++i) {
        if (i != skip) f.push_back(el.v[i]);
      }
      std::sort(f.begin(), f.end());
      owners[f] += 1;
    }
  }
  for (const auto& [f, count] : owners) {
    CHECK(count >= 1);
    CHECK(count <= 2);
  }
}

}  // namespace

TEST_CASE("box mesh: unit square with 2 subdivisions") {
  const Mesh m = create_box_mesh(unit_box(2), 2);
  CHECK(m.vertex_count() == 9);
  CHECK(m.element_count() == 8);
  CHECK(m.total_volume() == doctest::Approx(1.0).epsilon(1e-14));
  check_conforming(m);
}

TEST_CASE("box mesh: unit cube Kuhn decomposition") {
  const Mesh m = create_box_mesh(unit_box(3), 1);
  CHECK(m.vertex_count() == 8);
  CHECK(m.element_count() == 6);
  CHECK(m.total_volume() == doctest::Approx(1.0).epsilon(1e-14));
  check_conforming(m);
}

TEST_CASE("box mesh: invalid arguments") {
  CHECK_THROWS_AS(create_box_mesh(unit_box(2), 0), InvalidArgumentError);
  Box degenerate = unit_box(2);
  degenerate.hi.x = degenerate.lo.x;
  CHECK_THROWS_AS(create_box_mesh(degenerate, 2), InvalidArgumentError);
}

TEST_CASE("bisect: empty marking returns an identical mesh") {
  const Mesh m = create_box_mesh(unit_box(2), 2);
  const Mesh r = m.bisect({});
  CHECK(r.vertex_count() == m.vertex_count());
  CHECK(r.element_count() == m.element_count());
  for (std::size_t e = 0; e < m.element_count(); ++e) {
    for (int i = 0; i < 3; ++i) CHECK(r.elements()[e].v[i] == m.elements()[e].v[i]);
  }
  CHECK(r.is_descendant_of(m));
}

TEST_CASE("bisect: single triangle splits into two children at the edge midpoint") {
  const Mesh m = single_triangle({1, 0, 0}, {0, 0, 0}, {0, 1, 0});
  const Mesh r = m.bisect({0});
  CHECK(r.element_count() == 2);
  CHECK(r.vertex_count() == 4);
  const Vec3 mid = r.vertices()[3];
  CHECK(mid.x == doctest::Approx(0.5));  // midpoint of (1,0)-(0,1)
  CHECK(mid.y == doctest::Approx(0.5));
  // both children contain the new vertex
  for (int e = 0; e < 2; ++e) {
    bool has_mid = false;
    for (int i = 0; i < 3; ++i) has_mid |= r.elements()[e].v[i] == 3;
    CHECK(has_mid);
  }
  CHECK(r.total_volume() == doctest::Approx(m.total_volume()).epsilon(1e-14));
}

TEST_CASE("bisect: out-of-range mark is rejected") {
  const Mesh m = create_box_mesh(unit_box(2), 2);
  CHECK_THROWS_AS(m.bisect({99}), InvalidArgumentError);
}

TEST_CASE("shape regularity: closed forms") {
  const Mesh eq = single_triangle({0, 0, 0}, {1, 0, 0}, {0.5, std::sqrt(3.0) / 2.0, 0});
  CHECK(eq.shape_regularity() == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));

  // right isoceles legs 1: h = sqrt(2), rho = 2 - sqrt(2), ratio = 1 + sqrt(2)
  const Mesh ri = single_triangle({0, 0, 0}, {1, 0, 0}, {0, 1, 0});
  CHECK(ri.shape_regularity() == doctest::Approx(1.0 + std::sqrt(2.0)).epsilon(1e-12));
  CHECK(ri.shape_regularity() == doctest::Approx(2.4142).epsilon(1e-4));
}

TEST_CASE("shape regularity: Kuhn tetrahedra are congruent") {
  const Mesh m = create_box_mesh(unit_box(3), 1);
  const double r0 = m.element_diameter(0) / m.element_inball_diameter(0);
  CHECK(std::isfinite(r0));
  for (std::size_t e = 1; e < m.element_count(); ++e) {
    CHECK(m.element_diameter(e) / m.element_inball_diameter(e) == doctest::Approx(r0).epsilon(1e-12));
  }
}

TEST_CASE("uniform refinement keeps shape regularity bounded (2D and 3D)") {
  for (int dim : {2, 3}) {
    Mesh m = create_box_mesh(unit_box(dim), 2);
    const double initial = m.shape_regularity();
    std::set<long long> distinct;
    for (int round = 0; round < 10; ++round) {
      std::vector<std::size_t> all(m.element_count());
      for (std::size_t e = 0; e < all.size(); ++e) all[e] = e;
      m = m.bisect(all);
      const double ratio = m.shape_regularity();
      CHECK(ratio <= 2.0 * initial);
      for (std::size_t e = 0; e < m.element_count(); ++e) {
        const double r = m.element_diameter(e) / m.element_inball_diameter(e);
        distinct.insert(llround(r * 1e9));
      }
      CHECK(m.total_volume() == doctest::Approx(1.0).epsilon(1e-12));
    }
    // bisection produces finitely many similarity classes
    CHECK(distinct.size() <= 64);
  }
}

TEST_CASE("adaptive refinement: conformity, nestedness, volume, termination") {
  std::mt19937_64 rng(42);
  for (int dim : {2, 3}) {
    Mesh m = create_box_mesh(unit_box(dim), 2);
    for (int round = 0; round < 8; ++round) {
      std::vector<std::size_t> marked;
      for (std::size_t e = 0; e < m.element_count(); ++e) {
        if (rng() % 4 == 0) marked.push_back(e);
      }
      if (marked.empty()) marked.push_back(rng() % m.element_count());
      const Mesh fine = m.bisect(marked);  // throws if the closure cap trips
      check_conforming(fine);
      CHECK(fine.total_volume() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(fine.is_descendant_of(m));
      // nestedness: every element sits inside its recorded parent
      for (std::size_t e = 0; e < fine.element_count(); ++e) {
        const auto parent = fine.elements()[e].parent;
        REQUIRE(parent < m.element_count());
        const auto lam = m.barycentric(parent, fine.element_barycenter(e));
        for (int i = 0; i <= dim; ++i) CHECK(lam[i] >= -1e-12);
      }
      // marked elements were bisected at least once
      std::set<std::uint32_t> surviving;
      for (const auto& el : fine.elements()) {
        if (el.generation == m.elements()[el.parent].generation) surviving.insert(el.parent);
      }
      for (std::size_t mk : marked) CHECK(surviving.count(static_cast<std::uint32_t>(mk)) == 0);
      m = fine;
    }
  }
}

TEST_CASE("locate_point: barycenter, outside, tie-break") {
  const Mesh m = create_box_mesh(unit_box(2), 2);
  for (std::size_t e = 0; e < m.element_count(); ++e) {
    const auto hit = m.locate_point(m.element_barycenter(e));
    REQUIRE(hit.has_value());
    CHECK(*hit == e);
  }
  CHECK(!m.locate_point({2.0, 0.5, 0}).has_value());
  CHECK(!m.locate_point({0.5, -0.1, 0}).has_value());

  // point on a shared face: lowest element index wins
  const auto& face = m.interior_faces().front();
  const Vec3 mid = 0.5 * (m.vertices()[face.v[0]] + m.vertices()[face.v[1]]);
  const auto hit = m.locate_point(mid);
  REQUIRE(hit.has_value());
  CHECK(*hit == std::min(face.elem[0], face.elem[1]));
}

TEST_CASE("interior faces have exactly two owners, boundary vertices flagged") {
  const Mesh m = create_box_mesh(unit_box(2), 3);
  // 3x3 grid: interior vertices are the 4 strictly inside
  std::size_t interior = 0;
  for (std::size_t v = 0; v < m.vertex_count(); ++v) {
    if (!m.boundary_vertex_mask()[v]) ++interior;
  }
  CHECK(interior == 4);
  for (const auto& f : m.interior_faces()) CHECK(f.elem[0] != f.elem[1]);
}

TEST_CASE("mesh dump format") {
  const Mesh m = create_box_mesh(unit_box(2), 1);
  std::istringstream is(m.dump_string());
  int dim;
  std::size_t nv, ne;
  is >> dim >> nv >> ne;
  CHECK(dim == 2);
  CHECK(nv == m.vertex_count());
  CHECK(ne == m.element_count());
  // dumps are deterministic
  CHECK(m.dump_string() == m.dump_string());
}
