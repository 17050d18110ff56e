#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sa/mesh.hpp"
#include "sa/stats.hpp"

namespace sa {

// Synthetic bilateral cohort: ellipsoid base shape, smooth per-subject
// spherical-harmonic deformations, optional planted asymmetry in a set of
// surface patches (disease group, left side, along the outward normal).
struct CohortSpec {
  int n_healthy = 10;
  int n_disease = 10;
  Vec3 base_axes = Vec3(10.0, 6.0, 4.0);  // semi-axes, mm
  double global_size_variance = 0.0;      // variance of the size factor
  double subject_deform_sigma = 0.5;      // mm, shared (symmetric) deformation
  double noise_sigma = 0.0;               // mm, per-side independent deformation
  int sh_degree = 4;                      // max degree of deformation fields
  int subdivisions = 3;                   // icosphere level (3 -> 1280 faces)
  int n_patches = 32;                     // surface partition granularity
  std::vector<int> planted_region;        // patch ids receiving the planted effect
  double planted_magnitude = 0.0;         // mm, signed, along outward normal
  bool randomize_planted_sign = false;    // per-subject random sign (variance effect)
  double age_disease_shift = 0.0;         // covariate confound coupling
  uint64_t seed = 0;
};

struct SyntheticSubject {
  std::string subject_id;
  TriangleMesh left;
  TriangleMesh right;
  CovariateRow covariates;
  bool clamped = false;  // deformation magnitude was clamped
};

// Unit icosphere (geodesic subdivision of the icosahedron).
TriangleMesh icosphere(int subdivisions);

// Fibonacci-spiral patch centers on the unit sphere.
std::vector<Vec3> patch_centers(int n_patches);

// Patch id of a unit direction: nearest patch center.
int patch_of(const Vec3& u, const std::vector<Vec3>& centers);

// Deterministic per (spec.seed, subject_index).
SyntheticSubject generate_subject(const CohortSpec& spec, int subject_index);

struct CohortOutput {
  std::string manifest_path;
  std::string ground_truth_path;
  int n_clamped = 0;
};

// Writes left/right PLY meshes, the cohort manifest CSV, and a ground-truth
// JSON describing the planted region.
CohortOutput generate_cohort(const CohortSpec& spec, const std::string& out_dir);

// Maps arbitrary points (e.g. template correspondence points) onto the
// planted region: true where the point's ellipsoid direction falls in a
// planted patch.
std::vector<char> ground_truth_mask(const Eigen::MatrixXd& points, const CohortSpec& spec);

CohortSpec load_ground_truth(const std::string& path);

}  // namespace sa
