#include "sa/stats.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "sa/distributions.hpp"
#include "sa/parallel.hpp"
#include "sa/rng.hpp"

namespace sa {

OlsResult ols_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& y) {
  const int n = static_cast<int>(design.rows());
  const int k = static_cast<int>(design.cols());
  if (y.size() != n) throw std::invalid_argument("ols_fit: dimension mismatch");
  if (n <= k) throw std::invalid_argument("ols_fit: need n > k observations");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < k) {
    // name the first column that is linearly dependent on the ones before it
    for (int j = 1; j <= k; ++j) {
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> sub(design.leftCols(j));
      sub.setThreshold(1e-10);
      if (sub.rank() < j)
        throw std::invalid_argument("ols_fit: design column " + std::to_string(j - 1) +
                                    " is linearly dependent");
    }
    throw std::invalid_argument("ols_fit: rank-deficient design");
  }

  OlsResult r;
  r.beta = qr.solve(y);
  Eigen::VectorXd resid = y - design * r.beta;
  r.rss = resid.squaredNorm();
  r.df = n - k;
  const double sigma2 = r.rss / r.df;
  Eigen::MatrixXd xtx_inv = (design.transpose() * design).ldlt().solve(
      Eigen::MatrixXd::Identity(k, k));
  r.se.resize(k);
  r.t.resize(k);
  r.p.resize(k);
  for (int j = 0; j < k; ++j) {
    r.se[j] = std::sqrt(std::max(sigma2 * xtx_inv(j, j), 0.0));
    r.t[j] = r.se[j] > 0.0 ? r.beta[j] / r.se[j]
                           : (r.beta[j] == 0.0 ? 0.0 : std::copysign(1e300, r.beta[j]));
    r.p[j] = t_two_sided_p(r.t[j], r.df);
  }
  return r;
}

std::vector<char> fdr_bh(const std::vector<double>& pvals, double q) {
  const int m = static_cast<int>(pvals.size());
  std::vector<char> mask(m, 0);
  if (m == 0) return mask;
  for (double p : pvals)
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("fdr_bh: p outside [0,1]");
  std::vector<double> sorted(pvals);
  std::sort(sorted.begin(), sorted.end());
  double cutoff = -1.0;
  for (int i = m; i >= 1; --i) {
    if (sorted[i - 1] <= q * i / m) {
      cutoff = sorted[i - 1];
      break;
    }
  }
  if (cutoff < 0.0) return mask;
  for (int i = 0; i < m; ++i) mask[i] = pvals[i] <= cutoff;
  return mask;
}

PointwiseStats pointwise_linear_models(const Eigen::MatrixXd& asym,
                                       const std::vector<CovariateRow>& covars,
                                       double q, bool include_handedness, int threads) {
  const int n = static_cast<int>(asym.rows());
  const int m = static_cast<int>(asym.cols());
  if (static_cast<int>(covars.size()) != n)
    throw std::invalid_argument("pointwise_linear_models: covariate count mismatch");
  const int k = include_handedness ? 6 : 5;
  if (n <= k) throw std::invalid_argument("pointwise_linear_models: need N > covariates+1");

  Eigen::MatrixXd design(n, k);
  for (int i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    design(i, 1) = covars[i].age;
    design(i, 2) = covars[i].sex;
    design(i, 3) = covars[i].etiv;
    design(i, 4) = covars[i].diagnosis;
    if (include_handedness) design(i, 5) = covars[i].handedness.value_or(0);
  }

  PointwiseStats out;
  out.q = q;
  out.beta.setZero(m, k);
  out.se.setZero(m, k);
  out.t_diagnosis.setZero(m);
  out.p_raw.assign(m, 1.0);
  out.constant_flag.assign(m, 0);

  parallel_for(m, threads, [&](int j) {
    const Eigen::VectorXd y = asym.col(j);
    if ((y.array() - y[0]).abs().maxCoeff() == 0.0) {
      out.constant_flag[j] = 1;
      out.p_raw[j] = 1.0;
      return;
    }
    OlsResult r = ols_fit(design, y);
    out.beta.row(j) = r.beta.transpose();
    out.se.row(j) = r.se.transpose();
    out.t_diagnosis[j] = r.t[4];
    out.p_raw[j] = r.p[4];
  });

  out.significant = fdr_bh(out.p_raw, q);
  return out;
}

// ---------------------------------------------------------------------------
// Mann-Whitney U

namespace {

// Null distribution of U for sample sizes (n, m) without ties:
// counts[u] = number of arrangements with statistic u, total C(n+m, n).
std::vector<double> u_null_counts(int n, int m) {
  const int umax = n * m;
  // recurrence over the largest element: f(i, j, u) = f(i-1, j, u-j) + f(i, j-1, u)
  std::vector<std::vector<std::vector<double>>> f(
      n + 1, std::vector<std::vector<double>>(m + 1, std::vector<double>(umax + 1, 0.0)));
  for (int j = 0; j <= m; ++j) f[0][j][0] = 1.0;
  for (int i = 1; i <= n; ++i)
    for (int j = 0; j <= m; ++j)
      for (int u = 0; u <= i * j; ++u) {
        double v = 0.0;
        if (u >= j) v += f[i - 1][j][u - j];
        if (j >= 1) v += f[i][j - 1][u];
        f[i][j][u] = v;
      }
  return f[n][m];
}

}  // namespace

GroupTestResult mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b) {
  const int n = static_cast<int>(a.size());
  const int m = static_cast<int>(b.size());
  if (n < 1 || m < 1) throw std::invalid_argument("mann_whitney_u: empty sample");

  std::vector<std::pair<double, int>> all;  // (value, 0=a / 1=b)
  all.reserve(n + m);
  for (double v : a) all.emplace_back(v, 0);
  for (double v : b) all.emplace_back(v, 1);
  std::sort(all.begin(), all.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });

  // midranks and tie correction
  const int nt = n + m;
  std::vector<double> rank(nt);
  double tie_sum = 0.0;
  bool has_ties = false;
  for (int i = 0; i < nt;) {
    int j = i;
    while (j < nt && all[j].first == all[i].first) ++j;
    const double r = 0.5 * (i + 1 + j);  // average of ranks i+1..j
    for (int k = i; k < j; ++k) rank[k] = r;
    const double t = j - i;
    if (t > 1) {
      has_ties = true;
      tie_sum += t * t * t - t;
    }
    i = j;
  }
  double ra = 0.0;
  for (int i = 0; i < nt; ++i)
    if (all[i].second == 0) ra += rank[i];
  const double u = ra - n * (n + 1) / 2.0;

  GroupTestResult res;
  res.statistic = u;
  res.n_a = n;
  res.n_b = m;

  if (!has_ties && n * m <= 400) {
    res.method = "mann-whitney-exact";
    std::vector<double> counts = u_null_counts(n, m);
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    const int ui = static_cast<int>(std::llround(u));
    double lower = 0.0, upper = 0.0;
    for (int v = 0; v <= ui; ++v) lower += counts[v];
    for (int v = ui; v <= n * m; ++v) upper += counts[v];
    res.p_value = std::min(1.0, 2.0 * std::min(lower, upper) / total);
    return res;
  }

  res.method = "mann-whitney-normal";
  const double mu = n * m / 2.0;
  const double var = (static_cast<double>(n) * m / 12.0) *
                     ((nt + 1) - tie_sum / (static_cast<double>(nt) * (nt - 1)));
  if (var <= 0.0) {
    res.p_value = 1.0;
    return res;
  }
  double z = std::abs(u - mu);
  z = std::max(z - 0.5, 0.0) / std::sqrt(var);  // continuity correction
  res.p_value = std::min(1.0, 2.0 * (1.0 - normal_cdf(z)));
  return res;
}

// ---------------------------------------------------------------------------
// Shapiro-Wilk (Royston 1995 approximation)

GroupTestResult shapiro_wilk(const std::vector<double>& x) {
  const int n = static_cast<int>(x.size());
  if (n < 3 || n > 5000) throw std::invalid_argument("shapiro_wilk: n must be in [3, 5000]");
  std::vector<double> s(x);
  std::sort(s.begin(), s.end());
  if (s.front() == s.back())
    throw std::invalid_argument("shapiro_wilk: constant sample (zero variance)");

  std::vector<double> mm(n);
  double ssumm = 0.0;
  for (int i = 0; i < n; ++i) {
    mm[i] = normal_quantile((i + 1 - 0.375) / (n + 0.25));
    ssumm += mm[i] * mm[i];
  }
  std::vector<double> a(n, 0.0);
  const double rsn = 1.0 / std::sqrt(static_cast<double>(n));
  if (n == 3) {
    a[0] = -std::sqrt(0.5);
    a[2] = std::sqrt(0.5);
  } else {
    const double rms = std::sqrt(ssumm);
    double an = -2.706056 * std::pow(rsn, 5) + 4.434685 * std::pow(rsn, 4) -
                2.071190 * std::pow(rsn, 3) - 0.147981 * rsn * rsn + 0.221157 * rsn +
                mm[n - 1] / rms;
    double phi;
    if (n > 5) {
      double an1 = -3.582633 * std::pow(rsn, 5) + 5.682633 * std::pow(rsn, 4) -
                   1.752461 * std::pow(rsn, 3) - 0.293762 * rsn * rsn + 0.042981 * rsn +
                   mm[n - 2] / rms;
      phi = (ssumm - 2.0 * mm[n - 1] * mm[n - 1] - 2.0 * mm[n - 2] * mm[n - 2]) /
            (1.0 - 2.0 * an * an - 2.0 * an1 * an1);
      a[n - 1] = an;
      a[n - 2] = an1;
      a[0] = -an;
      a[1] = -an1;
      for (int i = 2; i < n - 2; ++i) a[i] = mm[i] / std::sqrt(phi);
    } else {
      phi = (ssumm - 2.0 * mm[n - 1] * mm[n - 1]) / (1.0 - 2.0 * an * an);
      a[n - 1] = an;
      a[0] = -an;
      for (int i = 1; i < n - 1; ++i) a[i] = mm[i] / std::sqrt(phi);
    }
  }

  double mean = std::accumulate(s.begin(), s.end(), 0.0) / n;
  double num = 0.0, den = 0.0;
  for (int i = 0; i < n; ++i) {
    num += a[i] * s[i];
    den += (s[i] - mean) * (s[i] - mean);
  }
  double w = num * num / den;
  w = std::min(w, 1.0);

  GroupTestResult res;
  res.statistic = w;
  res.n_a = n;
  res.method = "shapiro-wilk";
  if (n == 3) {
    const double pi6 = 1.90985931710274;   // 6/pi
    const double stqr = 1.04719755119660;  // asin(sqrt(3/4))
    res.p_value = std::clamp(pi6 * (std::asin(std::sqrt(w)) - stqr), 0.0, 1.0);
    return res;
  }
  double z;
  if (n <= 11) {
    const double g = -2.273 + 0.459 * n;
    const double mu = 0.5440 - 0.39978 * n + 0.025054 * n * n - 0.0006714 * n * n * n;
    const double sig = std::exp(1.3822 - 0.77857 * n + 0.062767 * n * n -
                                0.0020322 * n * n * n);
    z = (-std::log(g - std::log1p(-w)) - mu) / sig;
  } else {
    const double ln = std::log(static_cast<double>(n));
    const double mu = -1.5861 - 0.31082 * ln - 0.083751 * ln * ln + 0.0038915 * ln * ln * ln;
    const double sig = std::exp(-0.4803 - 0.082676 * ln + 0.0030302 * ln * ln);
    z = (std::log1p(-w) - mu) / sig;
  }
  res.p_value = 1.0 - normal_cdf(z);
  return res;
}

// ---------------------------------------------------------------------------
// PCA / Horn / Hotelling

PcaResult pca(const Eigen::MatrixXd& data) {
  const int n = static_cast<int>(data.rows());
  const int d = static_cast<int>(data.cols());
  if (n < 2) throw std::invalid_argument("pca: need at least 2 rows");
  PcaResult res;
  res.mean = data.colwise().mean();
  Eigen::MatrixXd centered = data.rowwise() - res.mean;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const int r = static_cast<int>(svd.singularValues().size());
  res.eigenvalues =
      svd.singularValues().array().square() / static_cast<double>(n - 1);
  res.components = svd.matrixV();
  res.scores = centered * res.components;
  // deterministic sign: largest-magnitude loading positive
  for (int j = 0; j < r; ++j) {
    int arg = 0;
    double best = 0.0;
    for (int i = 0; i < d; ++i)
      if (std::abs(res.components(i, j)) > best) {
        best = std::abs(res.components(i, j));
        arg = i;
      }
    if (res.components(arg, j) < 0.0) {
      res.components.col(j) = -res.components.col(j);
      res.scores.col(j) = -res.scores.col(j);
    }
  }
  return res;
}

int horn_parallel_analysis(const Eigen::MatrixXd& data, int n_perms, uint64_t seed,
                           double percentile, bool use_mean) {
  const int n = static_cast<int>(data.rows());
  const int d = static_cast<int>(data.cols());
  if (n < 3) throw std::invalid_argument("horn_parallel_analysis: need n >= 3");
  if (n_perms < 1) throw std::invalid_argument("horn_parallel_analysis: n_perms >= 1");

  Eigen::VectorXd observed = pca(data).eigenvalues;
  const int r = static_cast<int>(observed.size());
  std::vector<std::vector<double>> perm_ev(r);

  Eigen::MatrixXd shuffled(n, d);
  for (int p = 0; p < n_perms; ++p) {
    for (int j = 0; j < d; ++j) {
      Rng rng(rng_mix(seed, rng_mix(static_cast<uint64_t>(p), static_cast<uint64_t>(j))));
      std::vector<int> idx(n);
      std::iota(idx.begin(), idx.end(), 0);
      for (int i = n - 1; i > 0; --i)
        std::swap(idx[i], idx[static_cast<int>(rng.below(i + 1))]);
      for (int i = 0; i < n; ++i) shuffled(i, j) = data(idx[i], j);
    }
    Eigen::VectorXd ev = pca(shuffled).eigenvalues;
    for (int i = 0; i < r && i < ev.size(); ++i) perm_ev[i].push_back(ev[i]);
  }

  int k = 0;
  for (int i = 0; i < r; ++i) {
    auto& v = perm_ev[i];
    if (v.empty()) break;
    double threshold;
    if (use_mean) {
      threshold = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    } else {
      std::sort(v.begin(), v.end());
      int pos = std::min(static_cast<int>(v.size()) - 1,
                         static_cast<int>(std::ceil(percentile * v.size())) - 1);
      threshold = v[std::max(pos, 0)];
    }
    if (observed[i] > threshold)
      ++k;
    else
      break;
  }
  return k;
}

GroupTestResult hotelling_t2(const Eigen::MatrixXd& scores_a,
                             const Eigen::MatrixXd& scores_b) {
  const int na = static_cast<int>(scores_a.rows());
  const int nb = static_cast<int>(scores_b.rows());
  const int k = static_cast<int>(scores_a.cols());
  if (scores_b.cols() != k) throw std::invalid_argument("hotelling_t2: dimension mismatch");
  if (na + nb - 2 <= k)
    throw std::invalid_argument("hotelling_t2: too few samples for dimension " +
                                std::to_string(k));

  Eigen::RowVectorXd ma = scores_a.colwise().mean();
  Eigen::RowVectorXd mb = scores_b.colwise().mean();
  Eigen::MatrixXd ca = scores_a.rowwise() - ma;
  Eigen::MatrixXd cb = scores_b.rowwise() - mb;
  Eigen::MatrixXd pooled =
      (ca.transpose() * ca + cb.transpose() * cb) / static_cast<double>(na + nb - 2);

  Eigen::LDLT<Eigen::MatrixXd> ldlt(pooled);
  Eigen::VectorXd diff = (ma - mb).transpose();
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      (pooled * ldlt.solve(diff) - diff).norm() > 1e-6 * std::max(1.0, diff.norm()))
    throw std::runtime_error(
        "hotelling_t2: singular pooled covariance; reduce dimension (e.g. via PCA) first");

  const double t2 = (static_cast<double>(na) * nb / (na + nb)) *
                    diff.dot(ldlt.solve(diff));
  const double df2 = na + nb - k - 1;
  const double f = t2 * df2 / (static_cast<double>(k) * (na + nb - 2));

  GroupTestResult res;
  res.statistic = t2;
  res.df1 = k;
  res.df2 = df2;
  res.n_a = na;
  res.n_b = nb;
  res.method = "hotelling-t2";
  res.p_value = f_upper_p(f, k, df2);
  return res;
}

VolumetricAsymmetry volumetric_asymmetry(double left_vol, double right_vol, double etiv) {
  if (etiv <= 0.0) throw std::invalid_argument("volumetric_asymmetry: etiv must be positive");
  VolumetricAsymmetry va;
  va.directional = (left_vol - right_vol) / etiv;
  va.undirectional = std::abs(left_vol - right_vol) / etiv;
  return va;
}

}  // namespace sa
