#include "sa/mesh.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace sa {

Vec3 mirror_point(const Vec3& p, const MirrorPlane& plane) {
  Vec3 q = p;
  const int a = static_cast<int>(plane.axis);
  // 2*offset - x is exact for offset == 0 (plain negation); for nonzero
  // offsets the involution still holds because the expression is its own
  // inverse in IEEE arithmetic only when offset == 0, so we special-case.
  if (plane.offset == 0.0) {
    q[a] = -q[a];
  } else {
    q[a] = 2.0 * plane.offset - q[a];
  }
  return q;
}

double signed_volume(const TriangleMesh& mesh) {
  double vol = 0.0;
  for (const auto& f : mesh.faces) {
    const Vec3& a = mesh.vertices[f[0]];
    const Vec3& b = mesh.vertices[f[1]];
    const Vec3& c = mesh.vertices[f[2]];
    vol += a.dot(b.cross(c));
  }
  return vol / 6.0;
}

double mesh_volume(const TriangleMesh& mesh) { return std::abs(signed_volume(mesh)); }

void validate_topology(const TriangleMesh& mesh) {
  const int nv = static_cast<int>(mesh.vertices.size());
  for (const auto& f : mesh.faces) {
    for (int i = 0; i < 3; ++i) {
      if (f[i] < 0 || f[i] >= nv)
        throw MeshError("face index " + std::to_string(f[i]) +
                        " out of range (vertex count " + std::to_string(nv) + ")");
    }
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2])
      throw MeshError("degenerate face with repeated vertex index " +
                      std::to_string(f[0]));
  }
  // Closed 2-manifold: every undirected edge shared by exactly 2 faces,
  // orientable: the two incident faces traverse it in opposite directions.
  std::map<std::pair<int, int>, std::pair<int, int>> edges;  // undirected -> (fwd, bwd) counts
  for (const auto& f : mesh.faces) {
    for (int i = 0; i < 3; ++i) {
      int a = f[i], b = f[(i + 1) % 3];
      bool fwd = a < b;
      auto key = fwd ? std::make_pair(a, b) : std::make_pair(b, a);
      auto& cnt = edges[key];
      (fwd ? cnt.first : cnt.second)++;
    }
  }
  for (const auto& [e, cnt] : edges) {
    int total = cnt.first + cnt.second;
    if (total == 1)
      throw TopologyError("open mesh: boundary edge", e.first, e.second);
    if (total > 2)
      throw TopologyError("non-manifold edge shared by " + std::to_string(total) + " faces",
                          e.first, e.second);
    if (cnt.first != 1 || cnt.second != 1)
      throw TopologyError("inconsistent winding", e.first, e.second);
  }
}

void normalize_orientation(TriangleMesh& mesh) {
  if (signed_volume(mesh) < 0.0) {
    for (auto& f : mesh.faces) std::swap(f[1], f[2]);
  }
  mesh.outward_oriented = true;
}

std::vector<Vec3> soup_vertex_normals(const std::vector<Vec3>& points,
                                      const std::vector<std::array<int, 3>>& faces,
                                      int* n_unresolved) {
  std::vector<Vec3> normals(points.size(), Vec3::Zero());
  for (const auto& f : faces) {
    const Vec3& a = points[f[0]];
    const Vec3& b = points[f[1]];
    const Vec3& c = points[f[2]];
    Vec3 n = (b - a).cross(c - a);
    double area2 = n.norm();
    if (area2 < 1e-300) continue;  // degenerate face excluded
    n /= area2;
    // angle weights at each corner
    for (int i = 0; i < 3; ++i) {
      const Vec3& p = points[f[i]];
      const Vec3& q = points[f[(i + 1) % 3]];
      const Vec3& r = points[f[(i + 2) % 3]];
      Vec3 e1 = q - p, e2 = r - p;
      double l1 = e1.norm(), l2 = e2.norm();
      if (l1 < 1e-300 || l2 < 1e-300) continue;
      double cosang = std::clamp(e1.dot(e2) / (l1 * l2), -1.0, 1.0);
      normals[f[i]] += std::acos(cosang) * n;
    }
  }
  int unresolved = 0;
  for (auto& n : normals) {
    double len = n.norm();
    if (len < 1e-300) {
      ++unresolved;
      n.setZero();
    } else {
      n /= len;
    }
  }
  if (n_unresolved) *n_unresolved = unresolved;
  return normals;
}

std::vector<Vec3> vertex_normals(const TriangleMesh& mesh) {
  int unresolved = 0;
  auto normals = soup_vertex_normals(mesh.vertices, mesh.faces, &unresolved);
  if (unresolved > 0)
    throw MeshError("vertex with no non-degenerate incident face (" +
                    std::to_string(unresolved) + " such vertices)");
  return normals;
}

TriangleMesh flip_sagittal(const TriangleMesh& mesh, const MirrorPlane& plane) {
  TriangleMesh out;
  out.vertices.reserve(mesh.vertices.size());
  for (const auto& v : mesh.vertices) out.vertices.push_back(mirror_point(v, plane));
  out.faces.reserve(mesh.faces.size());
  for (const auto& f : mesh.faces) out.faces.push_back({f[0], f[2], f[1]});
  out.outward_oriented = mesh.outward_oriented;
  return out;
}

Vec3 mesh_centroid(const TriangleMesh& mesh) {
  Vec3 c = Vec3::Zero();
  for (const auto& v : mesh.vertices) c += v;
  return c / static_cast<double>(mesh.vertices.size());
}

// ---------------------------------------------------------------------------
// PLY I/O

namespace {

struct PlyProperty {
  std::string name;
  std::string type;       // scalar type, or list value type
  std::string count_type;  // nonempty for lists
  bool is_list = false;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> props;
};

std::size_t scalar_size(const std::string& t) {
  if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
  if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
  if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" ||
      t == "float32")
    return 4;
  if (t == "double" || t == "float64") return 8;
  return 0;
}

class Reader {
 public:
  explicit Reader(const std::string& path) : in_(path, std::ios::binary) {
    if (!in_) throw MeshError("cannot open file: " + path);
  }

  TriangleMesh read() {
    parse_header();
    TriangleMesh mesh;
    for (const auto& elem : elements_) {
      if (elem.name == "vertex") {
        read_vertices(elem, mesh);
      } else if (elem.name == "face") {
        read_faces(elem, mesh);
      } else {
        skip_element(elem);
      }
    }
    return mesh;
  }

 private:
  std::ifstream in_;
  bool binary_ = false;
  std::vector<PlyElement> elements_;

  std::size_t offset() { return static_cast<std::size_t>(in_.tellg()); }

  [[noreturn]] void fail(const std::string& msg) { throw FormatError(msg, offset()); }

  std::string next_line() {
    std::string line;
    if (!std::getline(in_, line)) fail("unexpected end of header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  }

  void parse_header() {
    if (next_line() != "ply") fail("not a PLY file (missing 'ply' magic)");
    bool have_format = false;
    for (;;) {
      std::istringstream ls(next_line());
      std::string kw;
      ls >> kw;
      if (kw == "comment" || kw == "obj_info" || kw.empty()) continue;
      if (kw == "format") {
        std::string fmt, ver;
        ls >> fmt >> ver;
        if (fmt == "ascii")
          binary_ = false;
        else if (fmt == "binary_little_endian")
          binary_ = true;
        else
          fail("unsupported PLY format '" + fmt + "'");
        have_format = true;
      } else if (kw == "element") {
        PlyElement e;
        if (!(ls >> e.name >> e.count)) fail("malformed element line");
        elements_.push_back(e);
      } else if (kw == "property") {
        if (elements_.empty()) fail("property before any element");
        PlyProperty p;
        std::string t;
        ls >> t;
        if (t == "list") {
          p.is_list = true;
          if (!(ls >> p.count_type >> p.type >> p.name)) fail("malformed list property");
          if (scalar_size(p.count_type) == 0 || scalar_size(p.type) == 0)
            fail("unknown property type in list");
        } else {
          p.type = t;
          if (scalar_size(p.type) == 0) fail("unknown property type '" + t + "'");
          if (!(ls >> p.name)) fail("malformed property line");
        }
        elements_.back().props.push_back(p);
      } else if (kw == "end_header") {
        break;
      } else {
        fail("unknown header keyword '" + kw + "'");
      }
    }
    if (!have_format) fail("missing format line");
  }

  double read_scalar_binary(const std::string& type) {
    unsigned char buf[8];
    std::size_t sz = scalar_size(type);
    if (!in_.read(reinterpret_cast<char*>(buf), sz)) fail("unexpected end of binary data");
    if (type == "char" || type == "int8") return static_cast<int8_t>(buf[0]);
    if (type == "uchar" || type == "uint8") return buf[0];
    auto le = [&](int n) {
      uint64_t v = 0;
      for (int i = n - 1; i >= 0; --i) v = (v << 8) | buf[i];
      return v;
    };
    if (type == "short" || type == "int16") return static_cast<int16_t>(le(2));
    if (type == "ushort" || type == "uint16") return static_cast<uint16_t>(le(2));
    if (type == "int" || type == "int32") return static_cast<int32_t>(le(4));
    if (type == "uint" || type == "uint32") return static_cast<uint32_t>(le(4));
    if (type == "float" || type == "float32") {
      uint32_t v = static_cast<uint32_t>(le(4));
      float f;
      std::memcpy(&f, &v, 4);
      return f;
    }
    uint64_t v = le(8);
    double d;
    std::memcpy(&d, &v, 8);
    return d;
  }

  double read_scalar_ascii() {
    double v;
    if (!(in_ >> v)) fail("malformed ASCII scalar");
    return v;
  }

  double read_scalar(const std::string& type) {
    return binary_ ? read_scalar_binary(type) : read_scalar_ascii();
  }

  void read_vertices(const PlyElement& elem, TriangleMesh& mesh) {
    int ix = -1, iy = -1, iz = -1;
    for (std::size_t i = 0; i < elem.props.size(); ++i) {
      if (elem.props[i].is_list) fail("list property on vertex element");
      if (elem.props[i].name == "x") ix = static_cast<int>(i);
      if (elem.props[i].name == "y") iy = static_cast<int>(i);
      if (elem.props[i].name == "z") iz = static_cast<int>(i);
    }
    if (ix < 0 || iy < 0 || iz < 0) fail("vertex element lacks x/y/z properties");
    mesh.vertices.reserve(elem.count);
    std::vector<double> row(elem.props.size());
    for (std::size_t n = 0; n < elem.count; ++n) {
      for (std::size_t i = 0; i < elem.props.size(); ++i)
        row[i] = read_scalar(elem.props[i].type);
      mesh.vertices.emplace_back(row[ix], row[iy], row[iz]);
    }
  }

  void read_faces(const PlyElement& elem, TriangleMesh& mesh) {
    int ilist = -1;
    for (std::size_t i = 0; i < elem.props.size(); ++i) {
      if (elem.props[i].is_list &&
          (elem.props[i].name == "vertex_indices" || elem.props[i].name == "vertex_index"))
        ilist = static_cast<int>(i);
    }
    if (ilist < 0) fail("face element lacks a vertex_indices list");
    mesh.faces.reserve(elem.count);
    for (std::size_t n = 0; n < elem.count; ++n) {
      for (std::size_t i = 0; i < elem.props.size(); ++i) {
        const auto& p = elem.props[i];
        if (!p.is_list) {
          read_scalar(p.type);
          continue;
        }
        std::size_t cnt = static_cast<std::size_t>(read_scalar(p.count_type));
        if (static_cast<int>(i) == ilist) {
          if (cnt != 3) fail("non-triangular face with " + std::to_string(cnt) + " vertices");
          std::array<int, 3> f;
          for (int k = 0; k < 3; ++k) f[k] = static_cast<int>(read_scalar(p.type));
          mesh.faces.push_back(f);
        } else {
          for (std::size_t k = 0; k < cnt; ++k) read_scalar(p.type);
        }
      }
    }
  }

  void skip_element(const PlyElement& elem) {
    for (std::size_t n = 0; n < elem.count; ++n)
      for (const auto& p : elem.props) {
        if (p.is_list) {
          std::size_t cnt = static_cast<std::size_t>(read_scalar(p.count_type));
          for (std::size_t k = 0; k < cnt; ++k) read_scalar(p.type);
        } else {
          read_scalar(p.type);
        }
      }
  }
};

}  // namespace

TriangleMesh load_mesh(const std::string& path) {
  Reader reader(path);
  TriangleMesh mesh = reader.read();
  if (mesh.vertices.empty()) throw MeshError("mesh has no vertices: " + path);
  if (mesh.faces.empty()) throw MeshError("mesh has no faces: " + path);
  validate_topology(mesh);
  normalize_orientation(mesh);
  return mesh;
}

void save_ply(const TriangleMesh& mesh, const std::string& path, bool binary) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MeshError("cannot open file for writing: " + path);
  out << "ply\n"
      << (binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n")
      << "element vertex " << mesh.vertices.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n"
      << "element face " << mesh.faces.size() << "\n"
      << "property list uchar int vertex_indices\n"
      << "end_header\n";
  if (binary) {
    for (const auto& v : mesh.vertices) {
      double xyz[3] = {v.x(), v.y(), v.z()};
      out.write(reinterpret_cast<const char*>(xyz), 24);
    }
    for (const auto& f : mesh.faces) {
      unsigned char n = 3;
      out.write(reinterpret_cast<const char*>(&n), 1);
      int32_t idx[3] = {f[0], f[1], f[2]};
      out.write(reinterpret_cast<const char*>(idx), 12);
    }
  } else {
    out.precision(17);
    for (const auto& v : mesh.vertices) out << v.x() << " " << v.y() << " " << v.z() << "\n";
    for (const auto& f : mesh.faces) out << "3 " << f[0] << " " << f[1] << " " << f[2] << "\n";
  }
  if (!out) throw MeshError("write failure: " + path);
}

}  // namespace sa
