#include "sa/surface.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace sa {

// Ericson, "Real-Time Collision Detection", 5.1.5.
Vec3 closest_point_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c,
                            Vec3* bary) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  auto result = [&](double u, double v, double w) {
    if (bary) *bary = Vec3(u, v, w);
    return u * a + v * b + w * c;
  };
  if (d1 <= 0.0 && d2 <= 0.0) return result(1, 0, 0);

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return result(0, 1, 0);

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    double v = d1 / (d1 - d3);
    return result(1 - v, v, 0);
  }

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return result(0, 0, 1);

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    double w = d2 / (d2 - d6);
    return result(1 - w, 0, w);
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return result(0, 1 - w, w);
  }

  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom, w = vc * denom;
  return result(1.0 - v - w, v, w);
}

Surface::Surface(TriangleMesh mesh) : mesh_(std::move(mesh)) {
  validate_topology(mesh_);
  if (!mesh_.outward_oriented) normalize_orientation(mesh_);

  const auto nf = mesh_.faces.size();
  face_normals_.resize(nf);
  for (std::size_t i = 0; i < nf; ++i) {
    const auto& f = mesh_.faces[i];
    Vec3 n = (mesh_.vertices[f[1]] - mesh_.vertices[f[0]])
                 .cross(mesh_.vertices[f[2]] - mesh_.vertices[f[0]]);
    double len = n.norm();
    total_area_ += 0.5 * len;
    face_normals_[i] = len > 1e-300 ? Vec3(n / len) : Vec3::Zero();
  }
  vertex_normals_ = sa::vertex_normals(mesh_);
  centroid_ = mesh_centroid(mesh_);

  Vec3 lo = mesh_.vertices[0], hi = mesh_.vertices[0];
  for (const auto& v : mesh_.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  bbox_diag_ = (hi - lo).norm();

  order_.resize(nf);
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(2 * nf);
  root_ = build(0, static_cast<int>(nf));
}

int Surface::build(int begin, int end) {
  Node node;
  node.lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  node.hi = -node.lo;
  for (int i = begin; i < end; ++i) {
    const auto& f = mesh_.faces[order_[i]];
    for (int k = 0; k < 3; ++k) {
      node.lo = node.lo.cwiseMin(mesh_.vertices[f[k]]);
      node.hi = node.hi.cwiseMax(mesh_.vertices[f[k]]);
    }
  }
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  if (end - begin <= 8) {
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }
  Vec3 ext = node.hi - node.lo;
  int axis = 0;
  if (ext[1] > ext[0]) axis = 1;
  if (ext[2] > ext[axis]) axis = 2;
  auto centroid_axis = [&](int face) {
    const auto& f = mesh_.faces[face];
    return mesh_.vertices[f[0]][axis] + mesh_.vertices[f[1]][axis] +
           mesh_.vertices[f[2]][axis];
  };
  int mid = (begin + end) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) {
                     double ca = centroid_axis(a), cb = centroid_axis(b);
                     return ca < cb || (ca == cb && a < b);
                   });
  int l = build(begin, mid);
  int r = build(mid, end);
  nodes_[id].left = l;
  nodes_[id].right = r;
  return id;
}

double Surface::box_dist2(const Node& n, const Vec3& p) const {
  double d2 = 0.0;
  for (int k = 0; k < 3; ++k) {
    double d = 0.0;
    if (p[k] < n.lo[k])
      d = n.lo[k] - p[k];
    else if (p[k] > n.hi[k])
      d = p[k] - n.hi[k];
    d2 += d * d;
  }
  return d2;
}

void Surface::scan_leaf(const Node& n, const Vec3& p, double& best_d2, int& best_face,
                        Vec3& best_pt, Vec3& best_bary) const {
  for (int i = n.begin; i < n.end; ++i) {
    const int face = order_[i];
    const auto& f = mesh_.faces[face];
    // Vertices processed in index-sorted order so the arithmetic (and hence
    // the result, bit for bit) does not depend on the face winding.
    int idx[3] = {0, 1, 2};
    std::sort(idx, idx + 3, [&](int a, int b) { return f[a] < f[b]; });
    Vec3 bary_sorted;
    Vec3 q = closest_point_triangle(p, mesh_.vertices[f[idx[0]]], mesh_.vertices[f[idx[1]]],
                                    mesh_.vertices[f[idx[2]]], &bary_sorted);
    double d2 = (q - p).squaredNorm();
    if (d2 < best_d2 || (d2 == best_d2 && face < best_face)) {
      best_d2 = d2;
      best_face = face;
      best_pt = q;
      Vec3 bary;
      for (int k = 0; k < 3; ++k) bary[idx[k]] = bary_sorted[k];
      best_bary = bary;
    }
  }
}

void Surface::query(int node, const Vec3& p, double& best_d2, int& best_face, Vec3& best_pt,
                    Vec3& best_bary) const {
  const Node& n = nodes_[node];
  if (n.left < 0) {
    scan_leaf(n, p, best_d2, best_face, best_pt, best_bary);
    return;
  }
  double dl = box_dist2(nodes_[n.left], p);
  double dr = box_dist2(nodes_[n.right], p);
  int first = n.left, second = n.right;
  double dfirst = dl, dsecond = dr;
  if (dr < dl) {
    std::swap(first, second);
    std::swap(dfirst, dsecond);
  }
  if (dfirst <= best_d2) query(first, p, best_d2, best_face, best_pt, best_bary);
  if (dsecond <= best_d2) query(second, p, best_d2, best_face, best_pt, best_bary);
}

SurfacePoint Surface::project(const Vec3& p) const {
  double best_d2 = std::numeric_limits<double>::infinity();
  int best_face = std::numeric_limits<int>::max();
  Vec3 best_pt = Vec3::Zero(), best_bary = Vec3::Zero();
  query(root_, p, best_d2, best_face, best_pt, best_bary);
  SurfacePoint sp;
  sp.position = best_pt;
  sp.face_id = best_face;
  sp.barycentric = best_bary;
  return sp;
}

}  // namespace sa
