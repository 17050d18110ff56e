#pragma once

#include <Eigen/Core>

#include "sa/particles.hpp"

namespace sa {

// Proper rigid motion p -> R p + t, det(R) = +1.
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  // Set when the source points were (near) collinear and the rotation about
  // the line is unconstrained.
  bool degenerate = false;

  Eigen::MatrixXd apply(const Eigen::MatrixXd& points) const {
    return (points * rotation.transpose()).rowwise() + translation.transpose();
  }
};

// Least-squares rotation + translation (no scaling, no reflection) mapping
// source onto target, point sets in correspondence by index (M >= 3).
RigidTransform rigid_align(const Eigen::MatrixXd& source, const Eigen::MatrixXd& target);

struct ProcrustesResult {
  ShapeModel aligned;
  Eigen::VectorXd mean;  // 3M
  int iterations = 0;
  bool converged = false;
  std::vector<RigidTransform> transforms;  // total per-sample transform
};

// Iterated alignment of every sample to the evolving mean until the mean
// moves less than tol (mm), no scaling.
ProcrustesResult generalized_procrustes(const ShapeModel& model, double tol = 1e-6,
                                        int max_iters = 100);

}  // namespace sa
