#include "sa/asymmetry.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <stdexcept>

namespace sa {

std::vector<std::array<int, 3>> template_triangulation(const Surface& reference,
                                                       const Eigen::MatrixXd& particles) {
  const auto& mesh = reference.mesh();
  const int m = static_cast<int>(particles.rows());
  if (m < 4) throw std::invalid_argument("template_triangulation: need at least 4 points");

  std::vector<int> label(mesh.vertices.size());
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (int t = 0; t < m; ++t) {
      double d2 = (particles.row(t).transpose() - mesh.vertices[v]).squaredNorm();
      if (d2 < best) {
        best = d2;
        arg = t;
      }
    }
    label[v] = arg;
  }

  std::vector<std::array<int, 3>> faces;
  std::set<std::array<int, 3>> seen;
  for (const auto& f : mesh.faces) {
    std::array<int, 3> t = {label[f[0]], label[f[1]], label[f[2]]};
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) continue;
    std::array<int, 3> key = t;
    std::sort(key.begin(), key.end());
    if (!seen.insert(key).second) continue;
    faces.push_back(t);
  }
  if (faces.empty())
    throw std::runtime_error("template_triangulation: mesh too coarse for particle count");

  // outward orientation of the template as a whole
  double vol = 0.0;
  for (const auto& f : faces) {
    Eigen::Vector3d a = particles.row(f[0]), b = particles.row(f[1]), c = particles.row(f[2]);
    vol += a.dot(b.cross(c));
  }
  if (vol < 0.0)
    for (auto& f : faces) std::swap(f[1], f[2]);
  return faces;
}

Eigen::MatrixXd difference_vectors(const SubjectPair& pair) {
  if (pair.left.rows() != pair.right_flipped.rows())
    throw std::invalid_argument("difference_vectors: side particle counts differ");
  return pair.left - pair.right_flipped;
}

ReferenceShape midpoint_reference(const SubjectPair& pair,
                                  const std::vector<std::array<int, 3>>& template_faces) {
  ReferenceShape ref;
  ref.points = 0.5 * (pair.left + pair.right_flipped);
  const int m = static_cast<int>(ref.points.rows());

  std::vector<Vec3> pts(m);
  for (int t = 0; t < m; ++t) pts[t] = ref.points.row(t).transpose();
  int unresolved = 0;
  std::vector<Vec3> normals = soup_vertex_normals(pts, template_faces, &unresolved);

  // fallback: nearest point with a usable normal
  if (unresolved > 0) {
    for (int t = 0; t < m; ++t) {
      if (normals[t].squaredNorm() > 0.5) continue;
      double best = std::numeric_limits<double>::infinity();
      int arg = -1;
      for (int j = 0; j < m; ++j) {
        if (normals[j].squaredNorm() < 0.5) continue;
        double d2 = (pts[j] - pts[t]).squaredNorm();
        if (d2 < best) {
          best = d2;
          arg = j;
        }
      }
      if (arg < 0) throw std::runtime_error("midpoint_reference: no usable normals");
      normals[t] = normals[arg];
    }
  }
  ref.degenerate_normals = unresolved;

  ref.normals.resize(m, 3);
  for (int t = 0; t < m; ++t) ref.normals.row(t) = normals[t].transpose();
  return ref;
}

Eigen::VectorXd normal_projection(const Eigen::MatrixXd& d, const Eigen::MatrixXd& normals) {
  if (d.rows() != normals.rows())
    throw std::invalid_argument("normal_projection: dimension mismatch");
  return (d.array() * normals.array()).rowwise().sum();
}

AsymmetryField subject_asymmetry(const SubjectPair& pair,
                                 const std::vector<std::array<int, 3>>& template_faces) {
  AsymmetryField field;
  field.subject_id = pair.subject_id;
  ReferenceShape ref = midpoint_reference(pair, template_faces);
  field.values = normal_projection(difference_vectors(pair), ref.normals);
  field.abs_values = field.values.cwiseAbs();
  return field;
}

void save_asymmetry_csv(const std::vector<AsymmetryField>& fields, const std::string& path,
                        bool absolute) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  if (fields.empty()) throw std::invalid_argument("save_asymmetry_csv: empty field list");
  const int m = static_cast<int>(fields[0].values.size());
  out << "subject_id";
  for (int t = 0; t < m; ++t) out << ",y_" << (t + 1);
  out << "\n";
  char buf[32];
  for (const auto& f : fields) {
    out << f.subject_id;
    const Eigen::VectorXd& v = absolute ? f.abs_values : f.values;
    for (int t = 0; t < m; ++t) {
      std::snprintf(buf, sizeof(buf), "%.17g", v[t]);
      out << "," << buf;
    }
    out << "\n";
  }
}

}  // namespace sa
