#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "sa/surface.hpp"

namespace sa {

// Ordered particle configuration on one surface; the ordering is the
// correspondence identity across the cohort.
struct ParticleSet {
  int surface_id = -1;
  std::vector<SurfacePoint> particles;

  int size() const { return static_cast<int>(particles.size()); }

  Eigen::MatrixXd positions() const {
    Eigen::MatrixXd p(particles.size(), 3);
    for (std::size_t i = 0; i < particles.size(); ++i)
      p.row(i) = particles[i].position.transpose();
    return p;
  }
};

using ShapeMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Cohort-wide stack of particle configurations with shared correspondence
// semantics. Row i of shape_matrix is sample i flattened (x1,y1,z1,x2,...).
struct ShapeModel {
  std::vector<std::string> sample_ids;
  ShapeMatrix shape_matrix;  // N x 3M
  int num_particles = 0;     // M

  int num_samples() const { return static_cast<int>(shape_matrix.rows()); }

  Eigen::VectorXd mean_shape() const {
    return shape_matrix.colwise().mean().transpose();
  }

  // Sample i as an M x 3 matrix.
  Eigen::MatrixXd sample_points(int i) const {
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>>(
               shape_matrix.row(i).data(), num_particles, 3)
        .eval();
  }

  void set_sample_points(int i, const Eigen::MatrixXd& pts) {
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>>(
        shape_matrix.row(i).data(), num_particles, 3) = pts;
  }
};

// Binary model file, layout (all little-endian):
//   8 bytes  magic "SAPSM001"
//   u64      N (samples), u64 M (particles per sample)
//   N x [u32 length, bytes]   sample ids, in row order
//   N*3M doubles, row-major   coordinates (x1 y1 z1 x2 y2 z2 ...)
void save_model(const ShapeModel& model, const std::string& path);
ShapeModel load_model(const std::string& path);

}  // namespace sa
