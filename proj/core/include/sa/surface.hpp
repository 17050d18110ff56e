#pragma once

#include <memory>
#include <vector>

#include "sa/mesh.hpp"

namespace sa {

// A point constrained to a mesh: position == barycentric combination of the
// face's vertices (within 1e-9 mm).
struct SurfacePoint {
  Vec3 position = Vec3::Zero();
  int face_id = -1;
  Vec3 barycentric = Vec3::Zero();
};

// Closest point on triangle (a,b,c) to p; bary receives the barycentric
// coordinates w.r.t. (a,b,c).
Vec3 closest_point_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c,
                            Vec3* bary = nullptr);

// Immutable query structure over a validated mesh: global closest-point
// projection (AABB tree), face normals, vertex normals.
class Surface {
 public:
  explicit Surface(TriangleMesh mesh);

  const TriangleMesh& mesh() const { return mesh_; }
  const std::vector<Vec3>& face_normals() const { return face_normals_; }
  const std::vector<Vec3>& vertex_normals() const { return vertex_normals_; }

  // Globally closest point on the mesh to p.
  SurfacePoint project(const Vec3& p) const;

  double area() const { return total_area_; }
  double bbox_diagonal() const { return bbox_diag_; }
  Vec3 centroid() const { return centroid_; }

 private:
  struct Node {
    Vec3 lo, hi;
    int left = -1, right = -1;   // children, or -1 for leaf
    int begin = 0, end = 0;      // face-index range for leaves
  };

  int build(int begin, int end);
  void query(int node, const Vec3& p, double& best_d2, int& best_face, Vec3& best_pt,
             Vec3& best_bary) const;
  double box_dist2(const Node& n, const Vec3& p) const;
  void scan_leaf(const Node& n, const Vec3& p, double& best_d2, int& best_face,
                 Vec3& best_pt, Vec3& best_bary) const;

  TriangleMesh mesh_;
  std::vector<Vec3> face_normals_;
  std::vector<Vec3> vertex_normals_;
  std::vector<int> order_;  // faces permuted by the tree build
  std::vector<Node> nodes_;
  int root_ = -1;
  double total_area_ = 0.0;
  double bbox_diag_ = 0.0;
  Vec3 centroid_ = Vec3::Zero();
};

}  // namespace sa
