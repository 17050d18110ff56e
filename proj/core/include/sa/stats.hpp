#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sa {

struct CovariateRow {
  double age = 0.0;
  int sex = 0;        // {0,1}
  double etiv = 0.0;  // mm^3, positive
  int diagnosis = 0;  // 0 = healthy, 1 = AD
  std::optional<int> handedness;  // carried but excluded from the default design
};

struct OlsResult {
  Eigen::VectorXd beta;
  Eigen::VectorXd se;
  Eigen::VectorXd t;
  Eigen::VectorXd p;  // two-sided
  double rss = 0.0;
  int df = 0;
};

// Classical OLS with intercept already in the design. Throws on rank
// deficiency, naming the dependent column.
OlsResult ols_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& y);

// Benjamini-Hochberg step-up at level q; mask[i] true = rejected.
std::vector<char> fdr_bh(const std::vector<double>& pvals, double q);

struct PointwiseStats {
  Eigen::MatrixXd beta;  // M x k, per-point coefficients
  Eigen::MatrixXd se;    // M x k
  Eigen::VectorXd t_diagnosis;
  std::vector<double> p_raw;  // diagnosis p-value per point
  std::vector<char> significant;
  std::vector<char> constant_flag;  // points with constant response
  double q = 0.05;
};

// Per-point linear model y^m ~ 1 + age + sex + etiv + diagnosis
// (+ handedness when requested), diagnosis p-values BH-corrected at q.
PointwiseStats pointwise_linear_models(const Eigen::MatrixXd& asym,
                                       const std::vector<CovariateRow>& covars,
                                       double q = 0.05, bool include_handedness = false,
                                       int threads = 1);

struct GroupTestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  double df1 = 0.0, df2 = 0.0;
  int n_a = 0, n_b = 0;
  std::string method;
};

// U counts pairs where an observation from a exceeds one from b (ties count
// half). Exact two-sided p by enumeration when |a|*|b| <= 400 and there are
// no ties, otherwise normal approximation with tie and continuity correction.
GroupTestResult mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b);

// Royston (1995) approximation, 3 <= n <= 5000.
GroupTestResult shapiro_wilk(const std::vector<double>& x);

struct PcaResult {
  Eigen::VectorXd eigenvalues;  // descending, length min(n, d)
  Eigen::MatrixXd components;   // d x r, orthonormal columns
  Eigen::MatrixXd scores;       // n x r
  Eigen::RowVectorXd mean;
};

PcaResult pca(const Eigen::MatrixXd& data);

// Number of leading observed eigenvalues strictly exceeding the percentile
// (default 95th) of rank-matched eigenvalues of column-permuted data.
int horn_parallel_analysis(const Eigen::MatrixXd& data, int n_perms, uint64_t seed,
                           double percentile = 0.95, bool use_mean = false);

// Two-sample Hotelling T^2 with pooled covariance; p-value via the F
// transformation. Throws if the pooled covariance is singular.
GroupTestResult hotelling_t2(const Eigen::MatrixXd& scores_a,
                             const Eigen::MatrixXd& scores_b);

struct VolumetricAsymmetry {
  double directional = 0.0;    // (left - right) / etiv
  double undirectional = 0.0;  // |left - right| / etiv
};

VolumetricAsymmetry volumetric_asymmetry(double left_vol, double right_vol, double etiv);

}  // namespace sa
