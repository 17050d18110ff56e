#include "sa/align.hpp"

#include <Eigen/Dense>
#include <stdexcept>

namespace sa {

RigidTransform rigid_align(const Eigen::MatrixXd& source, const Eigen::MatrixXd& target) {
  if (source.rows() != target.rows() || source.cols() != 3 || target.cols() != 3)
    throw std::invalid_argument("rigid_align: point sets must be M x 3 with equal M");
  if (source.rows() < 3) throw std::invalid_argument("rigid_align: need at least 3 points");

  const Eigen::RowVector3d cs = source.colwise().mean();
  const Eigen::RowVector3d ct = target.colwise().mean();
  Eigen::MatrixXd s = source.rowwise() - cs;
  Eigen::MatrixXd t = target.rowwise() - ct;

  Eigen::Matrix3d h = s.transpose() * t;
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) d(2, 2) = -1.0;

  RigidTransform rt;
  rt.rotation = svd.matrixV() * d * svd.matrixU().transpose();
  rt.translation = ct.transpose() - rt.rotation * cs.transpose();
  // rank of the centered source: collinear sets leave the rotation about the
  // line unconstrained
  const auto& sv = svd.singularValues();
  rt.degenerate = sv[1] <= 1e-12 * std::max(sv[0], 1e-300);
  return rt;
}

ProcrustesResult generalized_procrustes(const ShapeModel& model, double tol,
                                        int max_iters) {
  const int n = model.num_samples();
  if (n < 2) throw std::invalid_argument("generalized_procrustes: need at least 2 samples");
  const int m = model.num_particles;

  ProcrustesResult result;
  result.aligned = model;
  result.transforms.assign(n, RigidTransform{});

  Eigen::VectorXd mean = result.aligned.mean_shape();
  for (int iter = 0; iter < max_iters; ++iter) {
    Eigen::MatrixXd mean_pts =
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>>(
            mean.data(), m, 3);
    for (int i = 0; i < n; ++i) {
      Eigen::MatrixXd pts = result.aligned.sample_points(i);
      RigidTransform rt = rigid_align(pts, mean_pts);
      result.aligned.set_sample_points(i, rt.apply(pts));
      result.transforms[i].rotation = rt.rotation * result.transforms[i].rotation;
      result.transforms[i].translation =
          rt.rotation * result.transforms[i].translation + rt.translation;
      result.transforms[i].degenerate |= rt.degenerate;
    }
    Eigen::VectorXd new_mean = result.aligned.mean_shape();
    const double disp = (new_mean - mean).norm() / std::sqrt(static_cast<double>(m));
    mean = new_mean;
    result.iterations = iter + 1;
    if (disp < tol) {
      result.converged = true;
      break;
    }
  }
  result.mean = mean;
  return result;
}

}  // namespace sa
