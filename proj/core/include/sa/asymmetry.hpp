#pragma once

#include <Eigen/Core>
#include <array>
#include <string>
#include <vector>

#include "sa/mesh.hpp"
#include "sa/surface.hpp"

namespace sa {

// One subject's corresponding left / flipped-right particle configurations.
struct SubjectPair {
  std::string subject_id;
  Eigen::MatrixXd left;           // M x 3
  Eigen::MatrixXd right_flipped;  // M x 3
};

// Midpoint shape between the two sides, with outward normals from the shared
// template triangulation.
struct ReferenceShape {
  Eigen::MatrixXd points;   // M x 3, (left + right_flipped) / 2
  Eigen::MatrixXd normals;  // M x 3, unit rows
  int degenerate_normals = 0;  // vertices whose normal came from a fallback
};

// Signed per-point asymmetry field (mm): positive where the left surface
// lies outside the right along the outward midpoint normal.
struct AsymmetryField {
  std::string subject_id;
  Eigen::VectorXd values;      // M, signed
  Eigen::VectorXd abs_values;  // element-wise |values|
};

// Fixed triangulation over the M correspondence points, built once from a
// reference surface: each mesh vertex is labeled with its nearest particle
// and every mesh face with three distinct labels contributes a template
// face. Orientation follows the reference mesh winding.
std::vector<std::array<int, 3>> template_triangulation(const Surface& reference,
                                                       const Eigen::MatrixXd& particles);

Eigen::MatrixXd difference_vectors(const SubjectPair& pair);

ReferenceShape midpoint_reference(const SubjectPair& pair,
                                  const std::vector<std::array<int, 3>>& template_faces);

Eigen::VectorXd normal_projection(const Eigen::MatrixXd& d, const Eigen::MatrixXd& normals);

AsymmetryField subject_asymmetry(const SubjectPair& pair,
                                 const std::vector<std::array<int, 3>>& template_faces);

// CSV export: one row per subject, "subject_id,y_1,...,y_M".
void save_asymmetry_csv(const std::vector<AsymmetryField>& fields, const std::string& path,
                        bool absolute = false);

}  // namespace sa
