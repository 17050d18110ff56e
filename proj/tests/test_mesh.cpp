#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "sa/mesh.hpp"
#include "sa/rng.hpp"

using namespace sa;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "sa_mesh_tests";
  fs::create_directories(dir);
  return dir / name;
}

TriangleMesh tetrahedron() {
  TriangleMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  m.faces = {{0, 2, 1}, {0, 1, 3}, {0, 3, 2}, {1, 2, 3}};
  return m;
}

}  // namespace

TEST_CASE("mirror_point is an involution") {
  MirrorPlane plane{Axis::Y, 1.25};
  Vec3 p(0.3, -2.7, 5.1);
  Vec3 q = mirror_point(p, plane);
  CHECK(q[1] == doctest::Approx(2 * 1.25 - (-2.7)));
  CHECK(q[0] == p[0]);
  CHECK(q[2] == p[2]);
  Vec3 r = mirror_point(q, plane);
  CHECK(r[0] == p[0]);
  CHECK(r[1] == p[1]);
  CHECK(r[2] == p[2]);
}

TEST_CASE("signed volume of the unit tetrahedron") {
  TriangleMesh m = tetrahedron();
  normalize_orientation(m);
  CHECK(mesh_volume(m) == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("normalize_orientation flips an inverted mesh") {
  TriangleMesh m = tetrahedron();
  for (auto& f : m.faces) std::swap(f[1], f[2]);
  CHECK(signed_volume(m) < 0.0);
  normalize_orientation(m);
  CHECK(m.outward_oriented);
  CHECK(signed_volume(m) > 0.0);
}

TEST_CASE("ply round trip ascii and binary") {
  TriangleMesh m = tetrahedron();
  normalize_orientation(m);
  for (bool binary : {false, true}) {
    CAPTURE(binary);
    fs::path p = temp_file(binary ? "tet_bin.ply" : "tet_ascii.ply");
    save_ply(m, p.string(), binary);
    TriangleMesh r = load_mesh(p.string());
    REQUIRE(r.vertex_count() == m.vertex_count());
    REQUIRE(r.face_count() == m.face_count());
    for (std::size_t i = 0; i < m.vertices.size(); ++i)
      CHECK((r.vertices[i] - m.vertices[i]).norm() == doctest::Approx(0.0));
    CHECK(mesh_volume(r) == doctest::Approx(mesh_volume(m)));
  }
}

TEST_CASE("binary round trip preserves bits") {
  TriangleMesh m = tetrahedron();
  Rng rng(7);
  for (auto& v : m.vertices)
    v += Vec3(rng.normal(), rng.normal(), rng.normal()) * 1e-3;
  normalize_orientation(m);
  fs::path p = temp_file("tet_bits.ply");
  save_ply(m, p.string(), true);
  TriangleMesh r = load_mesh(p.string());
  for (std::size_t i = 0; i < m.vertices.size(); ++i)
    for (int k = 0; k < 3; ++k) CHECK(r.vertices[i][k] == m.vertices[i][k]);
}

TEST_CASE("malformed ply is rejected with a position") {
  fs::path p = temp_file("bad.ply");
  std::ofstream(p) << "ply\nformat ascii 1.0\nelement vertex nonsense\n";
  CHECK_THROWS_AS(load_mesh(p.string()), FormatError);
}

TEST_CASE("open mesh is rejected") {
  TriangleMesh m = tetrahedron();
  m.faces.pop_back();
  CHECK_THROWS_AS(validate_topology(m), TopologyError);
}

TEST_CASE("non-manifold edge is rejected") {
  TriangleMesh m = tetrahedron();
  m.vertices.push_back(Vec3(1, 1, 1));
  m.faces.push_back({0, 1, 4});
  CHECK_THROWS_AS(validate_topology(m), TopologyError);
}

TEST_CASE("out of range face index is rejected") {
  TriangleMesh m = tetrahedron();
  m.faces[0][0] = 9;
  CHECK_THROWS_AS(validate_topology(m), MeshError);
}

TEST_CASE("flip_sagittal is a bit-exact involution and keeps orientation") {
  TriangleMesh m = tetrahedron();
  normalize_orientation(m);
  MirrorPlane plane{Axis::X, 0.4};
  TriangleMesh f = flip_sagittal(m, plane);
  CHECK(signed_volume(f) > 0.0);
  TriangleMesh ff = flip_sagittal(f, plane);
  REQUIRE(ff.vertex_count() == m.vertex_count());
  for (std::size_t i = 0; i < m.vertices.size(); ++i)
    for (int k = 0; k < 3; ++k) CHECK(ff.vertices[i][k] == m.vertices[i][k]);
  CHECK(ff.faces == m.faces);
}

TEST_CASE("vertex normals of a tetrahedron point outward") {
  TriangleMesh m = tetrahedron();
  normalize_orientation(m);
  auto normals = vertex_normals(m);
  Vec3 c = mesh_centroid(m);
  REQUIRE(normals.size() == m.vertex_count());
  for (std::size_t i = 0; i < normals.size(); ++i) {
    CHECK(normals[i].norm() == doctest::Approx(1.0));
    CHECK(normals[i].dot(m.vertices[i] - c) > 0.0);
  }
}
