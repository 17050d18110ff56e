#include <benchmark/benchmark.h>

#include <memory>

#include "sa/optimizer.hpp"
#include "sa/rng.hpp"
#include "sa/stats.hpp"
#include "sa/synth.hpp"

using namespace sa;

namespace {

Surface& ellipsoid_surface() {
  static std::unique_ptr<Surface> s = [] {
    TriangleMesh m = icosphere(4);
    for (auto& v : m.vertices) v = v.cwiseProduct(Vec3(10.0, 6.0, 4.0));
    normalize_orientation(m);
    return std::make_unique<Surface>(std::move(m));
  }();
  return *s;
}

Eigen::MatrixXd random_particles(int m, uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd pos(m, 3);
  for (int i = 0; i < m; ++i) {
    Vec3 u(rng.normal(), rng.normal(), rng.normal());
    pos.row(i) =
        ellipsoid_surface().project(u.normalized() * 12.0).position.transpose();
  }
  return pos;
}

}  // namespace

static void BM_SurfaceProjection(benchmark::State& state) {
  Surface& s = ellipsoid_surface();
  Rng rng(1);
  std::vector<Vec3> queries(1024);
  for (auto& q : queries)
    q = Vec3(rng.uniform(-12, 12), rng.uniform(-8, 8), rng.uniform(-6, 6));
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(s.project(queries[i++ % queries.size()]));
  }
}
BENCHMARK(BM_SurfaceProjection);

static void BM_SamplingGradient(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  Eigen::MatrixXd pos = random_particles(m, 2);
  Eigen::VectorXd sigma = adaptive_bandwidths(pos, 6, 0.3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sampling_entropy_gradient_ambient(pos, sigma));
  }
}
BENCHMARK(BM_SamplingGradient)->Arg(64)->Arg(128)->Arg(256);

static void BM_CorrespondenceGradient(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int m = 128;
  ShapeMatrix z(n, 3 * m);
  Rng rng(3);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 3 * m; ++j) z(i, j) = rng.normal();
  for (auto _ : state) {
    benchmark::DoNotOptimize(correspondence_entropy_gradient(z, 0.01));
  }
}
BENCHMARK(BM_CorrespondenceGradient)->Arg(16)->Arg(64)->Arg(200);

static void BM_OlsFit(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(4);
  Eigen::MatrixXd x(n, 5);
  x.col(0).setOnes();
  for (int i = 0; i < n; ++i)
    for (int j = 1; j < 5; ++j) x(i, j) = rng.normal();
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y[i] = rng.normal();
  for (auto _ : state) {
    benchmark::DoNotOptimize(ols_fit(x, y));
  }
}
BENCHMARK(BM_OlsFit)->Arg(60)->Arg(200);

BENCHMARK_MAIN();
