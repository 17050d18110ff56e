#include <doctest.h>

#include <cmath>

#include "sa/rng.hpp"
#include "sa/surface.hpp"
#include "sa/synth.hpp"

using namespace sa;

namespace {

// brute-force closest point over every face, the oracle for the AABB tree
SurfacePoint brute_project(const TriangleMesh& m, const Vec3& p) {
  SurfacePoint best;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < m.faces.size(); ++f) {
    Vec3 bary;
    Vec3 q = closest_point_triangle(p, m.vertices[m.faces[f][0]],
                                    m.vertices[m.faces[f][1]],
                                    m.vertices[m.faces[f][2]], &bary);
    double d2 = (q - p).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = {q, static_cast<int>(f), bary};
    }
  }
  return best;
}

}  // namespace

TEST_CASE("closest point on a triangle: interior, edge, vertex regions") {
  Vec3 a(0, 0, 0), b(2, 0, 0), c(0, 2, 0);
  Vec3 bary;

  Vec3 q = closest_point_triangle(Vec3(0.5, 0.5, 3.0), a, b, c, &bary);
  CHECK((q - Vec3(0.5, 0.5, 0.0)).norm() == doctest::Approx(0.0));
  CHECK(bary.sum() == doctest::Approx(1.0));

  q = closest_point_triangle(Vec3(1.0, -5.0, 0.0), a, b, c, &bary);
  CHECK((q - Vec3(1.0, 0.0, 0.0)).norm() == doctest::Approx(0.0));

  q = closest_point_triangle(Vec3(-3.0, -3.0, 1.0), a, b, c, &bary);
  CHECK((q - a).norm() == doctest::Approx(0.0));
  CHECK(bary[0] == doctest::Approx(1.0));

  // diagonal edge
  q = closest_point_triangle(Vec3(2.0, 2.0, 0.0), a, b, c, &bary);
  CHECK((q - Vec3(1.0, 1.0, 0.0)).norm() == doctest::Approx(0.0));
}

TEST_CASE("projection matches the brute-force oracle") {
  TriangleMesh m = icosphere(2);
  for (auto& v : m.vertices) v = v.cwiseProduct(Vec3(3.0, 2.0, 1.5));
  normalize_orientation(m);
  Surface s(m);
  Rng rng(99);
  for (int i = 0; i < 200; ++i) {
    Vec3 p(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5));
    SurfacePoint got = s.project(p);
    SurfacePoint want = brute_project(m, p);
    CHECK((got.position - p).norm() ==
          doctest::Approx((want.position - p).norm()).epsilon(1e-12));
    // barycentric reconstruction stays on the face
    const auto& f = m.faces[got.face_id];
    Vec3 rec = got.barycentric[0] * m.vertices[f[0]] +
               got.barycentric[1] * m.vertices[f[1]] +
               got.barycentric[2] * m.vertices[f[2]];
    CHECK((rec - got.position).norm() < 1e-9);
  }
}

TEST_CASE("projection of an on-surface point is (near) identity") {
  TriangleMesh m = icosphere(2);
  normalize_orientation(m);
  Surface s(m);
  for (int i = 0; i < 20; ++i) {
    const auto& f = m.faces[i * 7 % m.faces.size()];
    Vec3 p = (m.vertices[f[0]] + m.vertices[f[1]] + m.vertices[f[2]]) / 3.0;
    CHECK((s.project(p).position - p).norm() < 1e-12);
  }
}

TEST_CASE("area and bbox of the unit icosphere approach the sphere") {
  TriangleMesh m = icosphere(4);
  normalize_orientation(m);
  Surface s(m);
  CHECK(s.area() == doctest::Approx(4.0 * M_PI).epsilon(0.01));
  CHECK(s.bbox_diagonal() == doctest::Approx(2.0 * std::sqrt(3.0)).epsilon(0.01));
  CHECK(s.centroid().norm() < 1e-9);
}
