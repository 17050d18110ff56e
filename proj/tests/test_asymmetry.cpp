#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "sa/asymmetry.hpp"
#include "sa/synth.hpp"

using namespace sa;

namespace {

// particles placed exactly on icosphere vertices give back the mesh topology
SubjectPair scaled_sphere_pair(double left_r, double right_r, const TriangleMesh& ico) {
  SubjectPair pair;
  pair.subject_id = "s";
  const int m = static_cast<int>(ico.vertex_count());
  pair.left.resize(m, 3);
  pair.right_flipped.resize(m, 3);
  for (int i = 0; i < m; ++i) {
    pair.left.row(i) = (left_r * ico.vertices[i]).transpose();
    pair.right_flipped.row(i) = (right_r * ico.vertices[i]).transpose();
  }
  return pair;
}

}  // namespace

TEST_CASE("difference vectors are left minus flipped right") {
  SubjectPair pair;
  pair.left.resize(2, 3);
  pair.left << 1, 2, 3, 4, 5, 6;
  pair.right_flipped.resize(2, 3);
  pair.right_flipped << 0, 1, 1, 2, 2, 2;
  Eigen::MatrixXd d = difference_vectors(pair);
  CHECK((d.row(0) - Eigen::RowVector3d(1, 1, 2)).norm() == doctest::Approx(0.0));
  CHECK((d.row(1) - Eigen::RowVector3d(2, 3, 4)).norm() == doctest::Approx(0.0));
}

TEST_CASE("template triangulation of vertex-coincident particles") {
  TriangleMesh ico = icosphere(1);
  normalize_orientation(ico);
  Surface s(ico);
  Eigen::MatrixXd particles(ico.vertex_count(), 3);
  for (std::size_t i = 0; i < ico.vertex_count(); ++i)
    particles.row(i) = ico.vertices[i].transpose();
  auto faces = template_triangulation(s, particles);
  CHECK(faces.size() == ico.face_count());
  for (const auto& f : faces) {
    CHECK(f[0] != f[1]);
    CHECK(f[1] != f[2]);
    CHECK(f[0] != f[2]);
    for (int k = 0; k < 3; ++k) {
      CHECK(f[k] >= 0);
      CHECK(f[k] < particles.rows());
    }
  }
}

TEST_CASE("midpoint reference of concentric spheres") {
  TriangleMesh ico = icosphere(2);
  normalize_orientation(ico);
  Surface s(ico);
  SubjectPair pair = scaled_sphere_pair(1.2, 1.0, ico);
  Eigen::MatrixXd particles = (pair.left + pair.right_flipped) / 2.0;
  auto faces = template_triangulation(s, (Eigen::MatrixXd(particles)));
  ReferenceShape ref = midpoint_reference(pair, faces);

  CHECK(ref.degenerate_normals == 0);
  for (int i = 0; i < ref.points.rows(); ++i) {
    CHECK(ref.points.row(i).norm() == doctest::Approx(1.1).epsilon(1e-9));
    CHECK(ref.normals.row(i).norm() == doctest::Approx(1.0));
    // outward normal of a sphere is radial
    Eigen::RowVector3d radial = ref.points.row(i).normalized();
    CHECK(ref.normals.row(i).dot(radial) > 0.95);
  }
}

TEST_CASE("signed asymmetry of concentric spheres is the radius gap") {
  TriangleMesh ico = icosphere(2);
  normalize_orientation(ico);
  Surface s(ico);

  SubjectPair bigger_left = scaled_sphere_pair(1.2, 1.0, ico);
  Eigen::MatrixXd mid = (bigger_left.left + bigger_left.right_flipped) / 2.0;
  auto faces = template_triangulation(s, mid);

  AsymmetryField f = subject_asymmetry(bigger_left, faces);
  for (int i = 0; i < f.values.size(); ++i) {
    CHECK(f.values[i] == doctest::Approx(0.2).epsilon(0.02));
    CHECK(f.abs_values[i] == doctest::Approx(std::abs(f.values[i])));
  }

  // swapping the sides flips the sign
  SubjectPair bigger_right = scaled_sphere_pair(1.0, 1.2, ico);
  AsymmetryField g = subject_asymmetry(bigger_right, faces);
  for (int i = 0; i < g.values.size(); ++i)
    CHECK(g.values[i] == doctest::Approx(-f.values[i]).epsilon(1e-9));
}

TEST_CASE("asymmetry csv export round-trips through a parse") {
  TriangleMesh ico = icosphere(1);
  normalize_orientation(ico);
  Surface s(ico);
  SubjectPair pair = scaled_sphere_pair(1.1, 1.0, ico);
  Eigen::MatrixXd mid = (pair.left + pair.right_flipped) / 2.0;
  auto faces = template_triangulation(s, mid);
  AsymmetryField f = subject_asymmetry(pair, faces);

  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "sa_asym_tests";
  fs::create_directories(dir);
  fs::path p = dir / "asym.csv";
  save_asymmetry_csv({f}, p.string());

  std::ifstream in(p);
  std::string header, row;
  REQUIRE(std::getline(in, header));
  REQUIRE(std::getline(in, row));
  CHECK(header.rfind("subject_id,", 0) == 0);
  CHECK(row.rfind("s,", 0) == 0);
  // M value columns
  CHECK(std::count(row.begin(), row.end(), ',') == f.values.size());
}
