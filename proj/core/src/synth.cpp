#include "sa/synth.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "sa/rng.hpp"

namespace sa {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TriangleMesh icosphere(int subdivisions) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> verts = {
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t},  {0, 1, t},
      {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : verts) v.normalize();
  std::vector<std::array<int, 3>> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9},
      {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},   {3, 4, 2},
      {3, 2, 6},  {3, 6, 8},  {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10},
      {8, 6, 7},  {9, 8, 1}};

  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      Vec3 v = (verts[a] + verts[b]).normalized();
      verts.push_back(v);
      int id = static_cast<int>(verts.size()) - 1;
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }

  TriangleMesh mesh;
  mesh.vertices = std::move(verts);
  mesh.faces = std::move(faces);
  normalize_orientation(mesh);
  return mesh;
}

std::vector<Vec3> patch_centers(int n_patches) {
  std::vector<Vec3> centers(n_patches);
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n_patches; ++i) {
    double z = 1.0 - 2.0 * (i + 0.5) / n_patches;
    double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    double phi = golden * i;
    centers[i] = Vec3(r * std::cos(phi), r * std::sin(phi), z);
  }
  return centers;
}

int patch_of(const Vec3& u, const std::vector<Vec3>& centers) {
  int arg = 0;
  double best = -2.0;
  for (std::size_t i = 0; i < centers.size(); ++i) {
    double d = u.dot(centers[i]);
    if (d > best) {
      best = d;
      arg = static_cast<int>(i);
    }
  }
  return arg;
}

// ---------------------------------------------------------------------------
// Real spherical harmonics

namespace {

// associated Legendre P_l^m(x), m >= 0, no Condon-Shortley phase folded in
// beyond the standard recurrence
double legendre_p(int l, int m, double x) {
  double pmm = 1.0;
  if (m > 0) {
    double somx2 = std::sqrt(std::max(0.0, (1.0 - x) * (1.0 + x)));
    double fact = 1.0;
    for (int i = 1; i <= m; ++i) {
      pmm *= -fact * somx2;
      fact += 2.0;
    }
  }
  if (l == m) return pmm;
  double pmmp1 = x * (2.0 * m + 1.0) * pmm;
  if (l == m + 1) return pmmp1;
  double pll = 0.0;
  for (int ll = m + 2; ll <= l; ++ll) {
    pll = ((2.0 * ll - 1.0) * x * pmmp1 - (ll + m - 1.0) * pmm) / (ll - m);
    pmm = pmmp1;
    pmmp1 = pll;
  }
  return pll;
}

double sh_norm(int l, int m) {
  double v = (2.0 * l + 1.0) / (4.0 * kPi);
  for (int i = l - m + 1; i <= l + m; ++i) v /= i;
  return std::sqrt(v);
}

// real orthonormal Y_lm evaluated at unit direction u
double real_sh(int l, int m, const Vec3& u) {
  const double ct = std::clamp(u.z(), -1.0, 1.0);
  const double phi = std::atan2(u.y(), u.x());
  if (m == 0) return sh_norm(l, 0) * legendre_p(l, 0, ct);
  const int am = std::abs(m);
  const double base = std::sqrt(2.0) * sh_norm(l, am) * legendre_p(l, am, ct);
  return m > 0 ? base * std::cos(am * phi) : base * std::sin(am * phi);
}

// smooth scalar field on the sphere: degrees 1..L, coefficients ~ N(0, s^2)
// with s chosen so the field standard deviation over the sphere is `sigma`
struct ShField {
  int degree = 0;
  std::vector<double> coeffs;  // (l,m) flattened, l = 1..degree

  static ShField random(int degree, double sigma, Rng& rng) {
    ShField f;
    f.degree = degree;
    int n = 0;
    for (int l = 1; l <= degree; ++l) n += 2 * l + 1;
    f.coeffs.resize(n);
    const double scale = n > 0 ? sigma * std::sqrt(4.0 * kPi / n) : 0.0;
    for (auto& c : f.coeffs) c = scale * rng.normal();
    return f;
  }

  double eval(const Vec3& u) const {
    double v = 0.0;
    int idx = 0;
    for (int l = 1; l <= degree; ++l)
      for (int m = -l; m <= l; ++m) v += coeffs[idx++] * real_sh(l, m, u);
    return v;
  }
};

}  // namespace

// ---------------------------------------------------------------------------

SyntheticSubject generate_subject(const CohortSpec& spec, int subject_index) {
  if (spec.planted_magnitude != 0.0 && spec.planted_region.empty())
    throw std::invalid_argument("generate_subject: planted_magnitude without a region");

  SyntheticSubject subject;
  {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "S%04d", subject_index);
    subject.subject_id = buf;
  }
  const bool disease = subject_index >= spec.n_healthy;

  const uint64_t base = rng_mix(spec.seed, static_cast<uint64_t>(subject_index));
  Rng rng_shape(rng_mix(base, 1));
  Rng rng_left(rng_mix(base, 2));
  Rng rng_right(rng_mix(base, 3));
  Rng rng_cov(rng_mix(base, 4));
  Rng rng_sign(rng_mix(base, 5));

  double size = 1.0;
  if (spec.global_size_variance > 0.0)
    size = std::clamp(1.0 + std::sqrt(spec.global_size_variance) * rng_shape.normal(),
                      0.7, 1.3);
  const Vec3 axes = spec.base_axes * size;

  ShField shared = ShField::random(spec.sh_degree, spec.subject_deform_sigma, rng_shape);
  ShField noise_l = ShField::random(spec.sh_degree, spec.noise_sigma, rng_left);
  ShField noise_r = ShField::random(spec.sh_degree, spec.noise_sigma, rng_right);

  double planted = spec.planted_magnitude;
  if (disease && spec.randomize_planted_sign && rng_sign.bernoulli(0.5)) planted = -planted;

  const auto centers = patch_centers(spec.n_patches);
  std::vector<char> in_region(spec.n_patches, 0);
  for (int pid : spec.planted_region) {
    if (pid < 0 || pid >= spec.n_patches)
      throw std::invalid_argument("generate_subject: patch id out of range");
    in_region[pid] = 1;
  }

  const TriangleMesh unit = icosphere(spec.subdivisions);
  const double clamp_limit = 0.45 * axes.minCoeff();

  auto build = [&](const ShField& noise, bool apply_planted) {
    TriangleMesh mesh;
    mesh.faces = unit.faces;
    mesh.vertices.resize(unit.vertices.size());
    for (std::size_t v = 0; v < unit.vertices.size(); ++v) {
      const Vec3& u = unit.vertices[v];
      Vec3 pos = u.cwiseProduct(axes);
      Vec3 n = u.cwiseQuotient(axes.cwiseProduct(axes)).normalized();  // ellipsoid normal
      double disp = shared.eval(u) + noise.eval(u);
      if (apply_planted && in_region[patch_of(u, centers)]) disp += planted;
      if (std::abs(disp) > clamp_limit) {
        disp = std::copysign(clamp_limit, disp);
        subject.clamped = true;
      }
      mesh.vertices[v] = pos + disp * n;
    }
    normalize_orientation(mesh);
    return mesh;
  };

  subject.left = build(noise_l, disease);
  subject.right = flip_sagittal(build(noise_r, false), MirrorPlane{Axis::X, 0.0});

  auto& cov = subject.covariates;
  cov.age = std::clamp(72.0 + 8.0 * rng_cov.normal() +
                           (disease ? spec.age_disease_shift : 0.0),
                       50.0, 95.0);
  cov.sex = rng_cov.bernoulli(0.5) ? 1 : 0;
  cov.etiv = std::max(8e5, 1.5e6 + 1.5e5 * rng_cov.normal());
  cov.diagnosis = disease ? 1 : 0;
  cov.handedness = rng_cov.bernoulli(0.9) ? 1 : 0;
  return subject;
}

CohortOutput generate_cohort(const CohortSpec& spec, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  fs::create_directories(fs::path(out_dir) / "meshes");

  CohortOutput out;
  std::ofstream manifest(fs::path(out_dir) / "manifest.csv");
  if (!manifest) throw std::runtime_error("cannot write manifest in " + out_dir);
  manifest << "subject_id,left_mesh,right_mesh,age,sex,etiv,diagnosis,handedness\n";
  char buf[64];
  const int n = spec.n_healthy + spec.n_disease;
  for (int i = 0; i < n; ++i) {
    SyntheticSubject s = generate_subject(spec, i);
    if (s.clamped) ++out.n_clamped;
    std::string lpath = "meshes/" + s.subject_id + "_L.ply";
    std::string rpath = "meshes/" + s.subject_id + "_R.ply";
    save_ply(s.left, (fs::path(out_dir) / lpath).string());
    save_ply(s.right, (fs::path(out_dir) / rpath).string());
    std::snprintf(buf, sizeof(buf), "%.17g", s.covariates.age);
    manifest << s.subject_id << "," << lpath << "," << rpath << "," << buf << ","
             << s.covariates.sex << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", s.covariates.etiv);
    manifest << buf << "," << (s.covariates.diagnosis ? "AD" : "healthy") << ","
             << s.covariates.handedness.value_or(0) << "\n";
  }
  out.manifest_path = (fs::path(out_dir) / "manifest.csv").string();

  nlohmann::json gt;
  gt["n_healthy"] = spec.n_healthy;
  gt["n_disease"] = spec.n_disease;
  gt["base_axes"] = {spec.base_axes.x(), spec.base_axes.y(), spec.base_axes.z()};
  gt["n_patches"] = spec.n_patches;
  gt["planted_region"] = spec.planted_region;
  gt["planted_magnitude"] = spec.planted_magnitude;
  gt["randomize_planted_sign"] = spec.randomize_planted_sign;
  gt["seed"] = spec.seed;
  out.ground_truth_path = (fs::path(out_dir) / "ground_truth.json").string();
  std::ofstream(out.ground_truth_path) << gt.dump(2) << "\n";
  return out;
}

std::vector<char> ground_truth_mask(const Eigen::MatrixXd& points, const CohortSpec& spec) {
  const auto centers = patch_centers(spec.n_patches);
  std::vector<char> region(spec.n_patches, 0);
  for (int pid : spec.planted_region) region[pid] = 1;
  std::vector<char> mask(points.rows(), 0);
  if (spec.planted_magnitude == 0.0) return mask;
  for (int i = 0; i < points.rows(); ++i) {
    Vec3 u = Vec3(points.row(i)).cwiseQuotient(spec.base_axes);
    double len = u.norm();
    if (len < 1e-12) continue;
    mask[i] = region[patch_of(u / len, centers)];
  }
  return mask;
}

CohortSpec load_ground_truth(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open ground truth file: " + path);
  nlohmann::json gt = nlohmann::json::parse(in);
  CohortSpec spec;
  spec.n_healthy = gt.at("n_healthy");
  spec.n_disease = gt.at("n_disease");
  auto ax = gt.at("base_axes");
  spec.base_axes = Vec3(ax[0], ax[1], ax[2]);
  spec.n_patches = gt.at("n_patches");
  spec.planted_region = gt.at("planted_region").get<std::vector<int>>();
  spec.planted_magnitude = gt.at("planted_magnitude");
  spec.randomize_planted_sign = gt.at("randomize_planted_sign");
  spec.seed = gt.at("seed");
  return spec;
}

}  // namespace sa
