#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "sa/distributions.hpp"
#include "sa/rng.hpp"
#include "sa/stats.hpp"

using namespace sa;

namespace {

// brute-force Benjamini-Hochberg: largest k with p_(k) <= q k / m
std::vector<char> brute_bh(const std::vector<double>& p, double q) {
  const int m = static_cast<int>(p.size());
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return p[a] < p[b]; });
  int k = 0;
  for (int i = 0; i < m; ++i)
    if (p[order[i]] <= q * (i + 1) / m) k = i + 1;
  std::vector<char> mask(m, 0);
  for (int i = 0; i < k; ++i) mask[order[i]] = 1;
  return mask;
}

// exhaustive two-sided exact Mann-Whitney p over all rank assignments
double enumerate_mw_p(int n, int m, double u_obs) {
  const int nt = n + m;
  std::vector<int> pick(nt, 0);
  std::fill(pick.begin(), pick.begin() + n, 1);
  std::sort(pick.begin(), pick.end());
  double lower = 0.0, upper = 0.0, total = 0.0;
  do {
    double ra = 0.0;
    for (int i = 0; i < nt; ++i)
      if (pick[i]) ra += i + 1;
    double u = ra - n * (n + 1) / 2.0;
    total += 1.0;
    if (u <= u_obs + 1e-9) lower += 1.0;
    if (u >= u_obs - 1e-9) upper += 1.0;
  } while (std::next_permutation(pick.begin(), pick.end()));
  return std::min(1.0, 2.0 * std::min(lower, upper) / total);
}

}  // namespace

TEST_CASE("normal distribution helpers against reference values") {
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(normal_quantile(0.01) == doctest::Approx(-2.3263478740408408).epsilon(1e-12));
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5));
  CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-10));
  CHECK(normal_cdf(-3.0) + normal_cdf(3.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("incomplete beta basic identities") {
  CHECK(incomplete_beta(1.0, 1.0, 0.37) == doctest::Approx(0.37).epsilon(1e-10));
  for (double x : {0.1, 0.42, 0.9})
    CHECK(incomplete_beta(2.5, 1.5, x) + incomplete_beta(1.5, 2.5, 1.0 - x) ==
          doctest::Approx(1.0).epsilon(1e-10));
  CHECK(incomplete_beta(3.0, 4.0, 0.0) == doctest::Approx(0.0));
  CHECK(incomplete_beta(3.0, 4.0, 1.0) == doctest::Approx(1.0));
}

TEST_CASE("t and F p-values against reference values") {
  CHECK(t_two_sided_p(2.5, 7) == doctest::Approx(0.040992218585752874).epsilon(1e-10));
  CHECK(t_two_sided_p(0.3, 40) == doctest::Approx(0.7657307167710191).epsilon(1e-10));
  CHECK(t_two_sided_p(-2.5, 7) == doctest::Approx(t_two_sided_p(2.5, 7)).epsilon(1e-12));
  CHECK(f_upper_p(3.2, 4, 17) == doctest::Approx(0.039402570364665476).epsilon(1e-10));
  CHECK(f_upper_p(0.9, 2, 100) == doctest::Approx(0.4098369397093584).epsilon(1e-10));
}

TEST_CASE("OLS matches the normal equations") {
  Rng rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    int n = 12 + static_cast<int>(rng.below(30));
    int k = 2 + static_cast<int>(rng.below(4));
    Eigen::MatrixXd x(n, k);
    x.col(0).setOnes();
    for (int i = 0; i < n; ++i)
      for (int j = 1; j < k; ++j) x(i, j) = rng.normal();
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y[i] = rng.normal();

    OlsResult r = ols_fit(x, y);
    Eigen::MatrixXd xtx = x.transpose() * x;
    Eigen::VectorXd beta = xtx.ldlt().solve(x.transpose() * y);
    CHECK((r.beta - beta).norm() / std::max(1.0, beta.norm()) < 1e-8);

    Eigen::VectorXd resid = y - x * beta;
    double s2 = resid.squaredNorm() / (n - k);
    Eigen::VectorXd se = (s2 * xtx.inverse().diagonal()).cwiseSqrt();
    CHECK((r.se - se).norm() / se.norm() < 1e-8);
    CHECK(r.df == n - k);
    for (int j = 0; j < k; ++j) {
      CHECK(r.t[j] == doctest::Approx(beta[j] / se[j]).epsilon(1e-8));
      CHECK(r.p[j] == doctest::Approx(t_two_sided_p(r.t[j], r.df)).epsilon(1e-12));
    }
  }
}

TEST_CASE("OLS rejects a rank-deficient design") {
  Eigen::MatrixXd x(10, 3);
  Rng rng(4);
  x.col(0).setOnes();
  for (int i = 0; i < 10; ++i) x(i, 1) = rng.normal();
  x.col(2) = 2.0 * x.col(1);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(10);
  CHECK_THROWS_AS(ols_fit(x, y), std::invalid_argument);
}

TEST_CASE("BH-FDR matches the brute-force step-up rule") {
  Rng rng(77);
  for (int rep = 0; rep < 300; ++rep) {
    int m = 1 + static_cast<int>(rng.below(12));
    std::vector<double> p(m);
    for (double& v : p) v = rng.uniform();
    // sprinkle in small p-values and exact duplicates
    if (m > 2 && rng.bernoulli(0.5)) p[0] = p[1] = rng.uniform() * 0.05;
    std::vector<char> got = fdr_bh(p, 0.05);
    std::vector<char> want = brute_bh(p, 0.05);
    CHECK(got == want);
  }
}

TEST_CASE("exact Mann-Whitney matches exhaustive enumeration") {
  Rng rng(13);
  for (int n = 2; n <= 5; ++n)
    for (int m = 2; m <= 5; ++m) {
      std::vector<double> a(n), b(m);
      for (double& v : a) v = rng.normal();
      for (double& v : b) v = rng.normal();
      GroupTestResult r = mann_whitney_u(a, b);
      CHECK(r.method == "mann-whitney-exact");
      CHECK(r.p_value ==
            doctest::Approx(enumerate_mw_p(n, m, r.statistic)).epsilon(1e-12));
    }
}

TEST_CASE("Mann-Whitney with ties matches the reference asymptotic value") {
  std::vector<double> a = {1, 2, 2, 3, 5, 5, 7, 8, 8, 8, 9,
                           10, 11, 11, 12, 13, 14, 15, 16, 17, 18};
  std::vector<double> b = {2, 3, 3, 4, 5, 6, 6, 7, 8, 9, 9,
                           10, 10, 12, 12, 13, 19, 20, 21, 22, 23, 24};
  GroupTestResult r = mann_whitney_u(a, b);
  CHECK(r.method == "mann-whitney-normal");
  CHECK(r.statistic == doctest::Approx(202.5));
  CHECK(r.p_value == doctest::Approx(0.49569470492424084).epsilon(1e-10));
}

TEST_CASE("Mann-Whitney U symmetry") {
  std::vector<double> a = {0.3, 1.7, 2.2, 4.0};
  std::vector<double> b = {0.9, 2.8, 3.1};
  GroupTestResult ra = mann_whitney_u(a, b);
  GroupTestResult rb = mann_whitney_u(b, a);
  CHECK(ra.statistic + rb.statistic == doctest::Approx(12.0));
  CHECK(ra.p_value == doctest::Approx(rb.p_value).epsilon(1e-12));
}

TEST_CASE("Shapiro-Wilk against reference values") {
  // reference W and p computed with an independent implementation
  std::vector<double> s5 = {-1.085631, 0.997345, 0.282978, -1.506295, -0.5786};
  std::vector<double> s12 = {1.651437, -2.426679, -0.428913, 1.265936,
                             -0.86674, -0.678886, -0.094709, 1.49139,
                             -0.638902, -0.443982, -0.434351, 2.20593};
  std::vector<double> s30 = {
      2.186786, 1.004054, 0.386186,  0.737369,  1.490732,  -0.935834,
      1.175829, -1.253881, -0.637752, 0.907105, -1.428681, -0.140069,
      -0.861755, -0.255619, -2.798589, -1.771533, -0.699877, 0.927462,
      -0.173636, 0.002846, 0.688223,  -0.879536, 0.283627,  -0.805367,
      -1.727669, -0.3909,  0.573806,  0.338589,  -0.01183,  2.392365};
  std::vector<double> e25 = {0.181447, 1.518674, 0.337624, 0.36596,  1.094406,
                             0.118099, 1.093244, 2.187979, 1.191752, 0.580404,
                             0.576635, 1.448579, 0.833886, 0.088726, 0.873881,
                             1.686555, 0.41108,  2.625226, 1.389166, 0.853466,
                             1.392892, 0.082457, 1.961759, 1.72319,  2.406521};

  GroupTestResult r = shapiro_wilk(s5);
  CHECK(r.statistic == doctest::Approx(0.96014825996276598).epsilon(1e-4));
  CHECK(r.p_value == doctest::Approx(0.8090153318144695).epsilon(5e-3));

  r = shapiro_wilk(s12);
  CHECK(r.statistic == doctest::Approx(0.91324870699660143).epsilon(1e-4));
  CHECK(r.p_value == doctest::Approx(0.23477057994651096).epsilon(5e-3));

  r = shapiro_wilk(s30);
  CHECK(r.statistic == doctest::Approx(0.99115797164850317).epsilon(1e-4));
  CHECK(r.p_value == doctest::Approx(0.99566045305991568).epsilon(5e-3));

  r = shapiro_wilk(e25);
  CHECK(r.statistic == doctest::Approx(0.95121241109599719).epsilon(1e-4));
  CHECK(r.p_value == doctest::Approx(0.26696180212765402).epsilon(5e-2));
}

TEST_CASE("Shapiro-Wilk rejects gross non-normality") {
  Rng rng(8);
  std::vector<double> heavy(200);
  for (double& v : heavy) v = std::exp(2.0 * rng.normal());
  CHECK(shapiro_wilk(heavy).p_value < 1e-6);
}

TEST_CASE("PCA matches the covariance eigendecomposition") {
  Rng rng(21);
  const int n = 40, d = 6;
  Eigen::MatrixXd data(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) data(i, j) = (j + 1) * rng.normal();
  PcaResult r = pca(data);

  Eigen::MatrixXd centered = data.rowwise() - data.colwise().mean();
  Eigen::MatrixXd cov = centered.transpose() * centered / (n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  for (int k = 0; k < r.eigenvalues.size(); ++k)
    CHECK(r.eigenvalues[k] ==
          doctest::Approx(es.eigenvalues()[d - 1 - k]).epsilon(1e-8));

  CHECK((r.components.transpose() * r.components -
         Eigen::MatrixXd::Identity(r.components.cols(), r.components.cols()))
            .norm() < 1e-9);
  CHECK((r.scores - centered * r.components).norm() < 1e-8);
  // score variances reproduce the eigenvalues
  for (int k = 0; k < r.eigenvalues.size(); ++k)
    CHECK(r.scores.col(k).squaredNorm() / (n - 1) ==
          doctest::Approx(r.eigenvalues[k]).epsilon(1e-8));
}

TEST_CASE("Horn's parallel analysis keeps strong factors, drops noise") {
  Rng rng(33);
  const int n = 120, d = 10;
  Eigen::MatrixXd data(n, d);
  for (int i = 0; i < n; ++i) {
    double f1 = 8.0 * rng.normal(), f2 = 5.0 * rng.normal();
    for (int j = 0; j < d; ++j) {
      double load = (j < 4) ? f1 : (j < 7 ? f2 : 0.0);
      data(i, j) = load + rng.normal();
    }
  }
  int k = horn_parallel_analysis(data, 50, 7);
  CHECK(k >= 2);
  CHECK(k <= 4);
  CHECK(horn_parallel_analysis(data, 50, 7) == k);  // deterministic in the seed

  // pure noise keeps (almost) nothing
  Eigen::MatrixXd noise(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) noise(i, j) = rng.normal();
  CHECK(horn_parallel_analysis(noise, 50, 7) <= 2);
}

TEST_CASE("Hotelling T2 with one variable equals the squared pooled t") {
  Rng rng(55);
  for (int rep = 0; rep < 10; ++rep) {
    int na = 5 + static_cast<int>(rng.below(20));
    int nb = 5 + static_cast<int>(rng.below(20));
    Eigen::MatrixXd a(na, 1), b(nb, 1);
    for (int i = 0; i < na; ++i) a(i, 0) = rng.normal();
    for (int i = 0; i < nb; ++i) b(i, 0) = 0.4 + rng.normal();
    GroupTestResult r = hotelling_t2(a, b);

    double ma = a.col(0).mean(), mb = b.col(0).mean();
    double va = (a.col(0).array() - ma).square().sum() / (na - 1);
    double vb = (b.col(0).array() - mb).square().sum() / (nb - 1);
    double sp2 = ((na - 1) * va + (nb - 1) * vb) / (na + nb - 2);
    double t = (ma - mb) / std::sqrt(sp2 * (1.0 / na + 1.0 / nb));
    CHECK(r.statistic == doctest::Approx(t * t).epsilon(1e-10));
    CHECK(r.p_value == doctest::Approx(t_two_sided_p(t, na + nb - 2)).epsilon(1e-10));
  }
}

TEST_CASE("Hotelling T2 rejects a singular pooled covariance") {
  // both groups vary only along (1, 2) but the mean difference does not
  Eigen::MatrixXd a(4, 2), b(4, 2);
  a << 1, 2, 2, 4, 3, 6, 4, 8;
  b << 0, 1, 1, 3, 2, 5, 3, 7;
  CHECK_THROWS_AS(hotelling_t2(a, b), std::runtime_error);
}

TEST_CASE("volumetric asymmetry arithmetic") {
  VolumetricAsymmetry v = volumetric_asymmetry(1200.0, 1000.0, 1.0e6);
  CHECK(v.directional == doctest::Approx(2.0e-4));
  CHECK(v.undirectional == doctest::Approx(2.0e-4));
  v = volumetric_asymmetry(900.0, 1000.0, 1.0e6);
  CHECK(v.directional == doctest::Approx(-1.0e-4));
  CHECK(v.undirectional == doctest::Approx(1.0e-4));
}

TEST_CASE("pointwise models recover a planted diagnosis effect") {
  Rng rng(91);
  const int n = 80, m = 20;
  std::vector<CovariateRow> cov(n);
  Eigen::MatrixXd asym(n, m);
  for (int i = 0; i < n; ++i) {
    cov[i].age = rng.uniform(55, 85);
    cov[i].sex = static_cast<int>(rng.below(2));
    cov[i].etiv = rng.uniform(1.3e6, 1.7e6);
    cov[i].diagnosis = i < n / 2 ? 0 : 1;
    for (int j = 0; j < m; ++j) {
      double effect = (j < 4 && cov[i].diagnosis) ? 1.0 : 0.0;
      asym(i, j) = effect + 0.3 * rng.normal();
    }
  }
  PointwiseStats r = pointwise_linear_models(asym, cov, 0.05);
  REQUIRE(r.p_raw.size() == m);
  int hits = 0, fps = 0;
  for (int j = 0; j < m; ++j)
    (j < 4 ? hits : fps) += r.significant[j] ? 1 : 0;
  CHECK(hits == 4);
  CHECK(fps <= 1);

  // per-point results agree with a direct OLS fit
  Eigen::MatrixXd x(n, 5);
  for (int i = 0; i < n; ++i)
    x.row(i) << 1.0, cov[i].age, cov[i].sex, cov[i].etiv, cov[i].diagnosis;
  for (int j : {0, 7}) {
    OlsResult f = ols_fit(x, asym.col(j));
    CHECK(r.t_diagnosis[j] == doctest::Approx(f.t[4]).epsilon(1e-10));
    CHECK(r.p_raw[j] == doctest::Approx(f.p[4]).epsilon(1e-10));
  }

  // BH mask consistent with the standalone corrector
  CHECK(r.significant == fdr_bh(r.p_raw, 0.05));
}

TEST_CASE("pointwise models flag constant response columns") {
  Rng rng(17);
  const int n = 30, m = 3;
  std::vector<CovariateRow> cov(n);
  Eigen::MatrixXd asym(n, m);
  for (int i = 0; i < n; ++i) {
    cov[i].age = rng.uniform(55, 85);
    cov[i].sex = static_cast<int>(rng.below(2));
    cov[i].etiv = rng.uniform(1.3e6, 1.7e6);
    cov[i].diagnosis = static_cast<int>(rng.below(2));
    asym(i, 0) = rng.normal();
    asym(i, 1) = 3.25;  // constant
    asym(i, 2) = rng.normal();
  }
  PointwiseStats r = pointwise_linear_models(asym, cov, 0.05);
  CHECK(!r.constant_flag[0]);
  CHECK(static_cast<bool>(r.constant_flag[1]));
  CHECK(!r.significant[1]);
}
