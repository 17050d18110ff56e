#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "sa/optimizer.hpp"
#include "sa/rng.hpp"
#include "sa/synth.hpp"

using namespace sa;

namespace {

constexpr double kTwoPi = 6.283185307179586477;

// independent reimplementation of the leave-one-out Parzen entropy
double naive_sampling_entropy(const Eigen::MatrixXd& pos, const Eigen::VectorXd& sigma) {
  const int m = static_cast<int>(pos.rows());
  double h = 0.0;
  for (int j = 0; j < m; ++j) {
    double p = 0.0;
    for (int k = 0; k < m; ++k) {
      if (k == j) continue;
      double s2 = sigma[k] * sigma[k];
      p += std::pow(kTwoPi * s2, -1.5) *
           std::exp(-(pos.row(j) - pos.row(k)).squaredNorm() / (2.0 * s2));
    }
    h += std::log(std::max(p / (m - 1), 1e-300));
  }
  return -h / m;
}

Eigen::MatrixXd random_positions(Rng& rng, int m, double scale) {
  Eigen::MatrixXd p(m, 3);
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < 3; ++k) p(i, k) = scale * rng.normal();
  return p;
}

}  // namespace

TEST_CASE("adaptive bandwidths equal the scaled k-NN distance") {
  Eigen::MatrixXd pos(4, 3);
  pos << 0, 0, 0, 1, 0, 0, 3, 0, 0, 7, 0, 0;
  Eigen::VectorXd s = adaptive_bandwidths(pos, 2, 0.5);
  REQUIRE(s.size() == 4);
  CHECK(s[0] == doctest::Approx(0.5 * 3.0));  // neighbors at 1 and 3
  CHECK(s[1] == doctest::Approx(0.5 * 2.0));  // neighbors at 1 and 2
  CHECK(s[2] == doctest::Approx(0.5 * 3.0));
  CHECK(s[3] == doctest::Approx(0.5 * 6.0));
}

TEST_CASE("sampling entropy matches the naive Parzen formula") {
  Rng rng(31);
  for (int rep = 0; rep < 10; ++rep) {
    int m = 3 + static_cast<int>(rng.below(8));
    Eigen::MatrixXd pos = random_positions(rng, m, 2.0);
    Eigen::VectorXd sigma = adaptive_bandwidths(pos, 2, 0.8);
    CHECK(sampling_entropy(pos, sigma) ==
          doctest::Approx(naive_sampling_entropy(pos, sigma)).epsilon(1e-12));
  }
}

TEST_CASE("sampling entropy gradient matches central differences") {
  Rng rng(17);
  const double eps = 1e-6;
  for (int rep = 0; rep < 5; ++rep) {
    int m = 4 + static_cast<int>(rng.below(5));
    Eigen::MatrixXd pos = random_positions(rng, m, 1.5);
    Eigen::VectorXd sigma = adaptive_bandwidths(pos, 2, 0.8);
    Eigen::MatrixXd g = sampling_entropy_gradient_ambient(pos, sigma);
    for (int t = 0; t < m; ++t)
      for (int k = 0; k < 3; ++k) {
        Eigen::MatrixXd p1 = pos, p2 = pos;
        p1(t, k) += eps;
        p2(t, k) -= eps;
        double fd = (sampling_entropy(p1, sigma) - sampling_entropy(p2, sigma)) /
                    (2.0 * eps);
        CHECK(g(t, k) == doctest::Approx(fd).epsilon(1e-5));
      }
  }
}

TEST_CASE("dual correspondence entropy equals the primal covariance form") {
  Rng rng(5);
  for (int rep = 0; rep < 6; ++rep) {
    int n = 3 + static_cast<int>(rng.below(4));
    int d = 3 * (2 + static_cast<int>(rng.below(3)));
    ShapeMatrix z(n, d);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) z(i, j) = rng.normal();
    double reg = 0.05;
    Eigen::MatrixXd y = z;
    y.rowwise() -= z.colwise().mean();
    Eigen::MatrixXd cov = y.transpose() * y / (n - 1);
    cov.diagonal().array() += reg;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    double primal = 0.5 * es.eigenvalues().array().log().sum();
    CHECK(correspondence_entropy(z, reg) == doctest::Approx(primal).epsilon(1e-10));
  }
}

TEST_CASE("correspondence entropy gradient matches central differences") {
  Rng rng(23);
  const double eps = 1e-6;
  for (int rep = 0; rep < 5; ++rep) {
    int n = 3 + static_cast<int>(rng.below(3));
    int d = 3 * (2 + static_cast<int>(rng.below(3)));
    ShapeMatrix z(n, d);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) z(i, j) = rng.normal();
    double reg = 0.1;
    ShapeMatrix g = correspondence_entropy_gradient(z, reg);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) {
        ShapeMatrix z1 = z, z2 = z;
        z1(i, j) += eps;
        z2(i, j) -= eps;
        double fd =
            (correspondence_entropy(z1, reg) - correspondence_entropy(z2, reg)) /
            (2.0 * eps);
        CHECK(g(i, j) == doctest::Approx(fd).epsilon(1e-5));
      }
  }
}

TEST_CASE("absolute regularization scales with the covariance diagonal") {
  ShapeMatrix z(3, 6);
  z.setZero();
  z(0, 0) = -1.0;
  z(2, 0) = 1.0;  // variance 1 in one coordinate, zero elsewhere
  CHECK(absolute_regularization(z, 0.01) == doctest::Approx(0.01 * 1.0 / 6.0));
}

TEST_CASE("optimizer output is deterministic and stays on the surface") {
  TriangleMesh m = icosphere(1);
  for (auto& v : m.vertices) v = v.cwiseProduct(Vec3(5.0, 3.0, 2.0));
  normalize_orientation(m);
  Surface s(m);

  OptimizerConfig cfg;
  cfg.m_target = 8;
  cfg.iterations_per_round = 15;
  cfg.seed = 3;
  std::vector<const Surface*> surfaces{&s, &s};
  OptimizeResult a = optimize_correspondences(surfaces, cfg, {"a", "b"});
  OptimizeResult b = optimize_correspondences(surfaces, cfg, {"a", "b"});

  REQUIRE(a.model.num_particles == 8);
  REQUIRE(a.model.num_samples() == 2);
  CHECK(a.model.shape_matrix == b.model.shape_matrix);
  CHECK(a.model.sample_ids == std::vector<std::string>{"a", "b"});

  for (const auto& set : a.sets)
    for (const auto& p : set.particles) {
      CHECK(p.face_id >= 0);
      CHECK((s.project(p.position).position - p.position).norm() < 1e-9);
    }
}

TEST_CASE("particles spread over a single sphere") {
  TriangleMesh m = icosphere(2);
  normalize_orientation(m);
  Surface s(m);
  OptimizerConfig cfg;
  cfg.m_target = 16;
  cfg.iterations_per_round = 30;
  cfg.seed = 9;
  std::vector<const Surface*> surfaces{&s};
  OptimizeResult r = optimize_correspondences(surfaces, cfg);
  Eigen::MatrixXd pos = r.sets[0].positions();
  double min_nn = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 16; ++i)
    for (int j = i + 1; j < 16; ++j)
      min_nn = std::min(min_nn, (pos.row(i) - pos.row(j)).norm());
  // 16 well-spread points on the unit sphere are far from coincident
  CHECK(min_nn > 0.3);
}
