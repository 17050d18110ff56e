#pragma once

#include <Eigen/Core>
#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace sa {

using Vec3 = Eigen::Vector3d;

struct MeshError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// PLY parse failure; byte_offset points at the offending input position.
struct FormatError : MeshError {
  FormatError(const std::string& msg, std::size_t offset)
      : MeshError(msg + " (byte offset " + std::to_string(offset) + ")"),
        byte_offset(offset) {}
  std::size_t byte_offset;
};

// Non-manifold or open mesh; edge names the offending vertex pair.
struct TopologyError : MeshError {
  TopologyError(const std::string& msg, int va, int vb)
      : MeshError(msg + " at edge (" + std::to_string(va) + ", " +
                  std::to_string(vb) + ")"),
        edge{va, vb} {}
  std::array<int, 2> edge;
};

enum class Axis { X = 0, Y = 1, Z = 2 };

// Reflection plane perpendicular to one coordinate axis. Applying the
// mirror twice is the identity, bit-exactly.
struct MirrorPlane {
  Axis axis = Axis::X;
  double offset = 0.0;
};

Vec3 mirror_point(const Vec3& p, const MirrorPlane& plane);

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
  bool outward_oriented = false;

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t face_count() const { return faces.size(); }
};

// Reads an ASCII or binary little-endian PLY file. The returned mesh is
// validated (closed, orientable, indices in range) and re-oriented so the
// signed volume is positive.
TriangleMesh load_mesh(const std::string& path);

void save_ply(const TriangleMesh& mesh, const std::string& path,
              bool binary = true);

// Throws TopologyError if the mesh is open or non-manifold, MeshError for
// out-of-range indices or inconsistent winding.
void validate_topology(const TriangleMesh& mesh);

// Flips every face if the signed volume is negative; sets outward_oriented.
void normalize_orientation(TriangleMesh& mesh);

// Signed volume via the divergence theorem (sum of tetrahedra to origin).
double signed_volume(const TriangleMesh& mesh);

// Positive volume of a closed outward-oriented mesh, in mm^3.
double mesh_volume(const TriangleMesh& mesh);

// Angle-weighted per-vertex normals of a closed outward-oriented mesh.
// Degenerate (zero-area) faces are excluded; a vertex whose incident faces
// are all degenerate is an error.
std::vector<Vec3> vertex_normals(const TriangleMesh& mesh);

// Same normal estimate for an arbitrary triangle soup over `points`.
// Vertices with no usable incident face get a zero normal and are counted
// in *n_unresolved if given.
std::vector<Vec3> soup_vertex_normals(const std::vector<Vec3>& points,
                                      const std::vector<std::array<int, 3>>& faces,
                                      int* n_unresolved = nullptr);

// Mirrors the mesh about the plane and reverses winding so the result stays
// outward-oriented. Involution: flip(flip(m)) == m bit-exactly.
TriangleMesh flip_sagittal(const TriangleMesh& mesh, const MirrorPlane& plane);

Vec3 mesh_centroid(const TriangleMesh& mesh);

}  // namespace sa
