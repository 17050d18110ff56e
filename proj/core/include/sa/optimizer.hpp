#pragma once

#include <cstdint>
#include <vector>

#include "sa/particles.hpp"

namespace sa {

struct OptimizerConfig {
  double alpha = 0.2;           // weight of the shape-space entropy term
  int m_target = 512;           // particles per surface; power of two
  int split_rounds = -1;        // derived as log2(m_target) when negative
  int iterations_per_round = 60;
  double initial_sigma_fraction = 0.3;  // bandwidth = fraction * k-NN distance
  int sigma_neighbors = 6;
  double convergence_tol = 1e-4;        // mm, max particle displacement per pass
  double covariance_regularization = 1e-3;  // relative to mean covariance diagonal
  double max_repulsion = 1e8;           // cap on sampling-gradient row norm
  uint64_t seed = 0;
  int threads = 1;
  // When set, every random draw used by particle splitting is reflected
  // about mirror_plane, so a mirrored cohort optimized with the same seed
  // yields the exactly mirrored model.
  bool mirror_init = false;
  MirrorPlane mirror_plane{};
};

struct OptimizeReport {
  bool converged = false;
  int total_iterations = 0;
  double final_q = 0.0;
  double max_step_increase = 0.0;  // largest accepted per-step Q increase
  int coincident_warnings = 0;
  int clamp_events = 0;  // step-size floor reached
};

struct OptimizeResult {
  ShapeModel model;
  std::vector<ParticleSet> sets;
  OptimizeReport report;
};

// Per-particle bandwidths: initial_sigma_fraction times the distance to the
// k-th nearest neighbor (k capped at M-1).
Eigen::VectorXd adaptive_bandwidths(const Eigen::MatrixXd& positions, int k,
                                    double fraction);

// Leave-one-out Parzen entropy of the particle-position distribution, fixed
// per-particle isotropic Gaussian bandwidths.
double sampling_entropy(const Eigen::MatrixXd& positions, const Eigen::VectorXd& sigma);

// Ambient-space gradient of sampling_entropy w.r.t. each particle (M x 3).
// Row norms are capped at max_repulsion; *coincident counts particle pairs
// closer than 1e-12.
Eigen::MatrixXd sampling_entropy_gradient_ambient(const Eigen::MatrixXd& positions,
                                                  const Eigen::VectorXd& sigma,
                                                  double max_repulsion = 1e8,
                                                  int* coincident = nullptr);

// Tangent-plane-projected gradient; normals holds the per-particle surface
// normal (M x 3). Ascent on this gradient spreads particles apart.
Eigen::MatrixXd sampling_entropy_gradient(const Eigen::MatrixXd& positions,
                                          const Eigen::VectorXd& sigma,
                                          const Eigen::MatrixXd& normals,
                                          double max_repulsion = 1e8,
                                          int* coincident = nullptr);

// Gaussian-model shape-space entropy 1/2 log det(Cov + reg I) of the N x 3M
// shape matrix, evaluated through the dual N x N Gram matrix.
double correspondence_entropy(const ShapeMatrix& shape, double reg);

// Gradient of correspondence_entropy w.r.t. every coordinate (N x 3M).
ShapeMatrix correspondence_entropy_gradient(const ShapeMatrix& shape, double reg);

// Default absolute regularizer: covariance_regularization times the mean
// diagonal of the (centered) covariance.
double absolute_regularization(const ShapeMatrix& shape, double relative);

// Split-and-relax schedule over the whole cohort; see OptimizerConfig.
// N == 1 is allowed (sampling-only optimization).
OptimizeResult optimize_correspondences(const std::vector<const Surface*>& surfaces,
                                        const OptimizerConfig& config,
                                        std::vector<std::string> sample_ids = {});

// The splitting/relaxation initialization on its own; identical to the
// particle sets produced by optimize_correspondences.
std::vector<ParticleSet> initialize_particles(const std::vector<const Surface*>& surfaces,
                                              const OptimizerConfig& config);

}  // namespace sa
