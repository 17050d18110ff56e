#include "sa/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sa/parallel.hpp"
#include "sa/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace sa {

// ---------------------------------------------------------------------------
// Config

namespace {

Axis axis_from_string(const std::string& s) {
  if (s == "X" || s == "x") return Axis::X;
  if (s == "Y" || s == "y") return Axis::Y;
  if (s == "Z" || s == "z") return Axis::Z;
  throw std::invalid_argument("config: unknown axis '" + s + "'");
}

std::string axis_to_string(Axis a) {
  switch (a) {
    case Axis::X: return "X";
    case Axis::Y: return "Y";
    default: return "Z";
  }
}

CohortSpec synth_from_json(const json& j) {
  CohortSpec s;
  s.n_healthy = j.value("n_healthy", s.n_healthy);
  s.n_disease = j.value("n_disease", s.n_disease);
  if (j.contains("base_axes")) {
    auto a = j["base_axes"];
    s.base_axes = Vec3(a[0], a[1], a[2]);
  }
  s.global_size_variance = j.value("global_size_variance", s.global_size_variance);
  s.subject_deform_sigma = j.value("subject_deform_sigma", s.subject_deform_sigma);
  s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
  s.sh_degree = j.value("sh_degree", s.sh_degree);
  s.subdivisions = j.value("subdivisions", s.subdivisions);
  s.n_patches = j.value("n_patches", s.n_patches);
  if (j.contains("planted_region"))
    s.planted_region = j["planted_region"].get<std::vector<int>>();
  s.planted_magnitude = j.value("planted_magnitude", s.planted_magnitude);
  s.randomize_planted_sign = j.value("randomize_planted_sign", s.randomize_planted_sign);
  s.age_disease_shift = j.value("age_disease_shift", s.age_disease_shift);
  s.seed = j.value("seed", s.seed);
  return s;
}

json synth_to_json(const CohortSpec& s) {
  json j;
  j["n_healthy"] = s.n_healthy;
  j["n_disease"] = s.n_disease;
  j["base_axes"] = {s.base_axes.x(), s.base_axes.y(), s.base_axes.z()};
  j["global_size_variance"] = s.global_size_variance;
  j["subject_deform_sigma"] = s.subject_deform_sigma;
  j["noise_sigma"] = s.noise_sigma;
  j["sh_degree"] = s.sh_degree;
  j["subdivisions"] = s.subdivisions;
  j["n_patches"] = s.n_patches;
  j["planted_region"] = s.planted_region;
  j["planted_magnitude"] = s.planted_magnitude;
  j["randomize_planted_sign"] = s.randomize_planted_sign;
  j["age_disease_shift"] = s.age_disease_shift;
  j["seed"] = s.seed;
  return j;
}

}  // namespace

PipelineConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  const int version = j.value("schema_version", 1);
  if (version != 1)
    throw std::invalid_argument("config: unsupported schema_version " +
                                std::to_string(version));
  PipelineConfig cfg;
  cfg.seed = j.value("seed", cfg.seed);
  cfg.manifest = j.value("manifest", cfg.manifest);
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  if (j.contains("mirror")) {
    cfg.mirror.axis = axis_from_string(j["mirror"].value("axis", "X"));
    cfg.mirror.offset = j["mirror"].value("offset", 0.0);
  }
  if (j.contains("optimizer")) {
    const json& o = j["optimizer"];
    auto& oc = cfg.optimizer;
    oc.alpha = o.value("alpha", oc.alpha);
    oc.m_target = o.value("m_target", oc.m_target);
    oc.iterations_per_round = o.value("iterations_per_round", oc.iterations_per_round);
    oc.initial_sigma_fraction = o.value("initial_sigma_fraction", oc.initial_sigma_fraction);
    oc.sigma_neighbors = o.value("sigma_neighbors", oc.sigma_neighbors);
    oc.convergence_tol = o.value("convergence_tol", oc.convergence_tol);
    oc.covariance_regularization =
        o.value("covariance_regularization", oc.covariance_regularization);
    oc.max_repulsion = o.value("max_repulsion", oc.max_repulsion);
  }
  cfg.procrustes_tol = j.value("procrustes_tol", cfg.procrustes_tol);
  cfg.procrustes_max_iters = j.value("procrustes_max_iters", cfg.procrustes_max_iters);
  cfg.fdr_q = j.value("fdr_q", cfg.fdr_q);
  cfg.horn_permutations = j.value("horn_permutations", cfg.horn_permutations);
  cfg.horn_percentile = j.value("horn_percentile", cfg.horn_percentile);
  cfg.horn_use_mean = j.value("horn_use_mean", cfg.horn_use_mean);
  cfg.include_handedness = j.value("include_handedness", cfg.include_handedness);
  cfg.reference_subject = j.value("reference_subject", cfg.reference_subject);
  cfg.threads = j.value("threads", cfg.threads);
  if (j.contains("synth")) cfg.synth = synth_from_json(j["synth"]);
  return cfg;
}

std::string config_to_json_text(const PipelineConfig& cfg) {
  json j;
  j["schema_version"] = 1;
  j["seed"] = cfg.seed;
  j["manifest"] = cfg.manifest;
  j["out_dir"] = cfg.out_dir;
  j["mirror"] = {{"axis", axis_to_string(cfg.mirror.axis)}, {"offset", cfg.mirror.offset}};
  j["optimizer"] = {
      {"alpha", cfg.optimizer.alpha},
      {"m_target", cfg.optimizer.m_target},
      {"iterations_per_round", cfg.optimizer.iterations_per_round},
      {"initial_sigma_fraction", cfg.optimizer.initial_sigma_fraction},
      {"sigma_neighbors", cfg.optimizer.sigma_neighbors},
      {"convergence_tol", cfg.optimizer.convergence_tol},
      {"covariance_regularization", cfg.optimizer.covariance_regularization},
      {"max_repulsion", cfg.optimizer.max_repulsion}};
  j["procrustes_tol"] = cfg.procrustes_tol;
  j["procrustes_max_iters"] = cfg.procrustes_max_iters;
  j["fdr_q"] = cfg.fdr_q;
  j["horn_permutations"] = cfg.horn_permutations;
  j["horn_percentile"] = cfg.horn_percentile;
  j["horn_use_mean"] = cfg.horn_use_mean;
  j["include_handedness"] = cfg.include_handedness;
  j["reference_subject"] = cfg.reference_subject;
  j["threads"] = cfg.threads;
  if (cfg.synth) j["synth"] = synth_to_json(*cfg.synth);
  return j.dump(2);
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json_text(ss.str());
}

// ---------------------------------------------------------------------------
// Manifest

std::vector<ManifestRow> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path);
  const fs::path base = fs::path(path).parent_path();
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty manifest: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const bool with_handedness =
      line == "subject_id,left_mesh,right_mesh,age,sex,etiv,diagnosis,handedness";
  if (!with_handedness &&
      line != "subject_id,left_mesh,right_mesh,age,sex,etiv,diagnosis")
    throw std::runtime_error("manifest header mismatch in " + path);

  std::vector<ManifestRow> rows;
  std::set<std::string> ids;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string field;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    const std::size_t expected = with_handedness ? 8 : 7;
    if (fields.size() != expected)
      throw std::runtime_error("manifest line " + std::to_string(lineno) +
                               ": expected " + std::to_string(expected) + " fields");
    ManifestRow row;
    row.subject_id = fields[0];
    if (!ids.insert(row.subject_id).second)
      throw std::runtime_error("manifest: duplicate subject_id " + row.subject_id);
    row.left_mesh = (base / fields[1]).string();
    row.right_mesh = (base / fields[2]).string();
    for (const auto* p : {&row.left_mesh, &row.right_mesh})
      if (!fs::exists(*p)) throw std::runtime_error("manifest: missing mesh file " + *p);
    row.covariates.age = std::stod(fields[3]);
    row.covariates.sex = std::stoi(fields[4]);
    row.covariates.etiv = std::stod(fields[5]);
    if (fields[6] == "healthy")
      row.covariates.diagnosis = 0;
    else if (fields[6] == "AD")
      row.covariates.diagnosis = 1;
    else
      throw std::runtime_error("manifest: diagnosis must be 'healthy' or 'AD', got '" +
                               fields[6] + "'");
    if (row.covariates.etiv <= 0.0)
      throw std::runtime_error("manifest: etiv must be positive for " + row.subject_id);
    if (with_handedness) row.covariates.handedness = std::stoi(fields[7]);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("manifest has no rows: " + path);
  return rows;
}

// ---------------------------------------------------------------------------
// Stage plumbing

namespace {

struct StageTimer {
  StageTimer(const PipelineConfig& cfg, const std::string& name)
      : cfg_(cfg), name_(name), start_(std::chrono::steady_clock::now()) {}
  ~StageTimer() {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json t;
    const fs::path path = fs::path(cfg_.out_dir) / "timings.json";
    if (fs::exists(path)) {
      std::ifstream in(path);
      try {
        t = json::parse(in);
      } catch (...) {
        t = json::object();
      }
    }
    t[name_] = secs;
    std::ofstream(path) << t.dump(2) << "\n";
  }
  const PipelineConfig& cfg_;
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

fs::path artifact(const PipelineConfig& cfg, const std::string& name) {
  return fs::path(cfg.out_dir) / name;
}

void require_artifact(const PipelineConfig& cfg, const std::string& name,
                      const std::string& producer) {
  if (!fs::exists(artifact(cfg, name)))
    throw std::runtime_error("missing upstream artifact '" +
                             artifact(cfg, name).string() + "'; run the '" + producer +
                             "' stage first");
}

std::string manifest_path(const PipelineConfig& cfg) {
  if (!cfg.manifest.empty()) return cfg.manifest;
  return (fs::path(cfg.out_dir) / "cohort" / "manifest.csv").string();
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  out << j.dump(2) << "\n";
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return json::parse(in);
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void save_template_faces(const std::vector<std::array<int, 3>>& faces,
                         const fs::path& path) {
  std::ofstream out(path);
  for (const auto& f : faces) out << f[0] << " " << f[1] << " " << f[2] << "\n";
}

std::vector<std::array<int, 3>> load_template_faces(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open template faces: " + path.string());
  std::vector<std::array<int, 3>> faces;
  int a, b, c;
  while (in >> a >> b >> c) faces.push_back({a, b, c});
  return faces;
}

}  // namespace

// ---------------------------------------------------------------------------
// Stages

void stage_synth(const PipelineConfig& cfg) {
  StageTimer timer(cfg, "synth");
  if (!cfg.synth) throw std::runtime_error("synth stage requested without a synth config");
  CohortSpec spec = *cfg.synth;
  spec.seed = rng_mix(cfg.seed, 0x53594e54ULL);  // derive from the run seed
  fs::create_directories(cfg.out_dir);
  generate_cohort(spec, (fs::path(cfg.out_dir) / "cohort").string());
}

void stage_optimize(const PipelineConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  StageTimer timer(cfg, "optimize");
  auto rows = load_manifest(manifest_path(cfg));
  const int n = static_cast<int>(rows.size());
  if (cfg.reference_subject < 0 || cfg.reference_subject >= n)
    throw std::runtime_error("reference_subject out of range");

  std::vector<std::unique_ptr<Surface>> surfaces(2 * n);
  std::vector<double> left_vol(n), right_vol(n);
  parallel_for(n, cfg.threads, [&](int i) {
    TriangleMesh left = load_mesh(rows[i].left_mesh);
    TriangleMesh right = load_mesh(rows[i].right_mesh);
    left_vol[i] = mesh_volume(left);
    right_vol[i] = mesh_volume(right);
    TriangleMesh right_flipped = flip_sagittal(right, cfg.mirror);
    surfaces[2 * i] = std::make_unique<Surface>(std::move(left));
    surfaces[2 * i + 1] = std::make_unique<Surface>(std::move(right_flipped));
  });

  std::vector<const Surface*> ptrs;
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) {
    ptrs.push_back(surfaces[2 * i].get());
    ids.push_back(rows[i].subject_id + ":L");
    ptrs.push_back(surfaces[2 * i + 1].get());
    ids.push_back(rows[i].subject_id + ":R");
  }

  OptimizerConfig oc = cfg.optimizer;
  oc.seed = rng_mix(cfg.seed, 0x4f505449ULL);
  oc.threads = cfg.threads;
  OptimizeResult result = optimize_correspondences(ptrs, oc, ids);
  save_model(result.model, artifact(cfg, "model_raw.psm").string());

  // shared template triangulation from the reference subject's left surface
  const int ref_sample = 2 * cfg.reference_subject;
  auto faces = template_triangulation(*ptrs[ref_sample],
                                      result.model.sample_points(ref_sample));
  save_template_faces(faces, artifact(cfg, "template_faces.txt"));

  {
    std::ofstream out(artifact(cfg, "volumes.csv"));
    out << "subject_id,left_volume,right_volume\n";
    for (int i = 0; i < n; ++i)
      out << rows[i].subject_id << "," << fmt_double(left_vol[i]) << ","
          << fmt_double(right_vol[i]) << "\n";
  }

  json state;
  state["converged"] = result.report.converged;
  state["iterations"] = result.report.total_iterations;
  state["final_q"] = result.report.final_q;
  state["coincident_warnings"] = result.report.coincident_warnings;
  state["clamp_events"] = result.report.clamp_events;
  state["max_step_increase"] = result.report.max_step_increase;
  write_json(artifact(cfg, "optimize_state.json"), state);
}

void stage_align(const PipelineConfig& cfg) {
  StageTimer timer(cfg, "align");
  require_artifact(cfg, "model_raw.psm", "optimize");
  ShapeModel model = load_model(artifact(cfg, "model_raw.psm").string());
  ProcrustesResult result =
      generalized_procrustes(model, cfg.procrustes_tol, cfg.procrustes_max_iters);
  save_model(result.aligned, artifact(cfg, "model_aligned.psm").string());

  ShapeModel mean;
  mean.num_particles = model.num_particles;
  mean.sample_ids = {"mean"};
  mean.shape_matrix = result.mean.transpose();
  save_model(mean, artifact(cfg, "mean.psm").string());

  json state;
  state["iterations"] = result.iterations;
  state["converged"] = result.converged;
  write_json(artifact(cfg, "align_state.json"), state);
}

void stage_asymmetry(const PipelineConfig& cfg) {
  StageTimer timer(cfg, "asymmetry");
  require_artifact(cfg, "model_aligned.psm", "align");
  require_artifact(cfg, "template_faces.txt", "optimize");
  ShapeModel model = load_model(artifact(cfg, "model_aligned.psm").string());
  auto faces = load_template_faces(artifact(cfg, "template_faces.txt"));

  if (model.num_samples() % 2 != 0)
    throw std::runtime_error("aligned model does not hold left/right sample pairs");
  const int n = model.num_samples() / 2;
  std::vector<AsymmetryField> fields(n);
  parallel_for(n, cfg.threads, [&](int i) {
    SubjectPair pair;
    const std::string& lid = model.sample_ids[2 * i];
    pair.subject_id = lid.substr(0, lid.rfind(":L"));
    pair.left = model.sample_points(2 * i);
    pair.right_flipped = model.sample_points(2 * i + 1);
    fields[i] = subject_asymmetry(pair, faces);
  });
  save_asymmetry_csv(fields, artifact(cfg, "asymmetry.csv").string(), false);
  save_asymmetry_csv(fields, artifact(cfg, "asymmetry_abs.csv").string(), true);
}

std::pair<std::vector<std::string>, Eigen::MatrixXd> load_asymmetry_csv(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open asymmetry csv: " + path);
  std::string line;
  std::getline(in, line);  // header
  std::vector<std::string> ids;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string field;
    std::getline(ls, field, ',');
    ids.push_back(field);
    std::vector<double> vals;
    while (std::getline(ls, field, ',')) vals.push_back(std::stod(field));
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw std::runtime_error("asymmetry csv has no rows: " + path);
  Eigen::MatrixXd mat(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size())
      throw std::runtime_error("ragged asymmetry csv: " + path);
    for (std::size_t j = 0; j < rows[i].size(); ++j) mat(i, j) = rows[i][j];
  }
  return {std::move(ids), std::move(mat)};
}

namespace {

// annotated mean-shape PLY with per-vertex diagnosis t-statistic and
// significance flag
void save_annotated_mean(const Eigen::VectorXd& mean,
                         const std::vector<std::array<int, 3>>& faces,
                         const PointwiseStats& stats, const fs::path& path) {
  const int m = static_cast<int>(mean.size()) / 3;
  std::ofstream out(path, std::ios::binary);
  out << "ply\nformat ascii 1.0\n"
      << "element vertex " << m << "\n"
      << "property double x\nproperty double y\nproperty double z\n"
      << "property double t_diagnosis\nproperty uchar significant\n"
      << "element face " << faces.size() << "\n"
      << "property list uchar int vertex_indices\nend_header\n";
  for (int t = 0; t < m; ++t) {
    out << fmt_double(mean[3 * t]) << " " << fmt_double(mean[3 * t + 1]) << " "
        << fmt_double(mean[3 * t + 2]) << " " << fmt_double(stats.t_diagnosis[t]) << " "
        << (stats.significant[t] ? 1 : 0) << "\n";
  }
  for (const auto& f : faces) out << "3 " << f[0] << " " << f[1] << " " << f[2] << "\n";
}

json group_test_to_json(const GroupTestResult& r) {
  return json{{"statistic", r.statistic}, {"p_value", r.p_value}, {"df1", r.df1},
              {"df2", r.df2},             {"n_a", r.n_a},         {"n_b", r.n_b},
              {"method", r.method}};
}

GroupTestResult group_test_from_json(const json& j) {
  GroupTestResult r;
  r.statistic = j.at("statistic");
  r.p_value = j.at("p_value");
  r.df1 = j.at("df1");
  r.df2 = j.at("df2");
  r.n_a = j.at("n_a");
  r.n_b = j.at("n_b");
  r.method = j.at("method");
  return r;
}

}  // namespace

void stage_stats(const PipelineConfig& cfg) {
  StageTimer timer(cfg, "stats");
  require_artifact(cfg, "asymmetry.csv", "asymmetry");
  require_artifact(cfg, "volumes.csv", "optimize");
  require_artifact(cfg, "mean.psm", "align");
  require_artifact(cfg, "template_faces.txt", "optimize");

  auto rows = load_manifest(manifest_path(cfg));
  auto [ids, asym] = load_asymmetry_csv(artifact(cfg, "asymmetry.csv").string());
  if (ids.size() != rows.size())
    throw std::runtime_error("asymmetry csv subject count does not match the manifest");
  std::vector<CovariateRow> covars;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (ids[i] != rows[i].subject_id)
      throw std::runtime_error("asymmetry csv subject order differs from the manifest");
    covars.push_back(rows[i].covariates);
  }
  const int m = static_cast<int>(asym.cols());

  // per-point linear models + FDR
  PointwiseStats pw = pointwise_linear_models(asym, covars, cfg.fdr_q,
                                              cfg.include_handedness, cfg.threads);
  {
    std::ofstream out(artifact(cfg, "stats.csv"));
    out << "point_id,beta_diag,se,t,p_raw,significant\n";
    for (int t = 0; t < m; ++t)
      out << (t + 1) << "," << fmt_double(pw.beta(t, 4)) << "," << fmt_double(pw.se(t, 4))
          << "," << fmt_double(pw.t_diagnosis[t]) << "," << fmt_double(pw.p_raw[t]) << ","
          << (pw.significant[t] ? 1 : 0) << "\n";
  }

  ShapeModel mean = load_model(artifact(cfg, "mean.psm").string());
  auto faces = load_template_faces(artifact(cfg, "template_faces.txt"));
  save_annotated_mean(mean.shape_matrix.row(0).transpose(), faces, pw,
                      artifact(cfg, "mean_annotated.ply"));

  // PCA + Horn + Hotelling on the asymmetry fields
  PcaResult pc = pca(asym);
  int horn_k = horn_parallel_analysis(asym, cfg.horn_permutations,
                                      rng_mix(cfg.seed, 0x484f524eULL),
                                      cfg.horn_percentile, cfg.horn_use_mean);
  const int k_used = std::max(horn_k, 1);
  double explained =
      pc.eigenvalues.head(std::min<int>(k_used, pc.eigenvalues.size())).sum() /
      pc.eigenvalues.sum();

  std::vector<int> healthy_idx, disease_idx;
  for (std::size_t i = 0; i < covars.size(); ++i)
    (covars[i].diagnosis ? disease_idx : healthy_idx).push_back(static_cast<int>(i));
  if (healthy_idx.empty() || disease_idx.empty())
    throw std::runtime_error("stats: need both diagnosis groups present");

  const int kk = std::min<int>(k_used, static_cast<int>(pc.scores.cols()));
  Eigen::MatrixXd scores_h(healthy_idx.size(), kk), scores_d(disease_idx.size(), kk);
  for (std::size_t i = 0; i < healthy_idx.size(); ++i)
    scores_h.row(i) = pc.scores.row(healthy_idx[i]).head(kk);
  for (std::size_t i = 0; i < disease_idx.size(); ++i)
    scores_d.row(i) = pc.scores.row(disease_idx[i]).head(kk);
  GroupTestResult hotelling = hotelling_t2(scores_d, scores_h);

  // volumetric battery
  std::vector<double> dir_h, dir_d, undir_h, undir_d, dir_all, undir_all;
  {
    std::ifstream in(artifact(cfg, "volumes.csv"));
    std::string line;
    std::getline(in, line);
    std::size_t i = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::stringstream ls(line);
      std::string sid, l, r;
      std::getline(ls, sid, ',');
      std::getline(ls, l, ',');
      std::getline(ls, r, ',');
      if (i >= rows.size() || sid != rows[i].subject_id)
        throw std::runtime_error("volumes.csv subject order differs from the manifest");
      VolumetricAsymmetry va =
          volumetric_asymmetry(std::stod(l), std::stod(r), covars[i].etiv);
      (covars[i].diagnosis ? dir_d : dir_h).push_back(va.directional);
      (covars[i].diagnosis ? undir_d : undir_h).push_back(va.undirectional);
      dir_all.push_back(va.directional);
      undir_all.push_back(va.undirectional);
      ++i;
    }
    if (i != rows.size()) throw std::runtime_error("volumes.csv row count mismatch");
  }
  GroupTestResult mw_dir = mann_whitney_u(dir_d, dir_h);
  GroupTestResult mw_undir = mann_whitney_u(undir_d, undir_h);
  GroupTestResult sw_dir = shapiro_wilk(dir_all);
  GroupTestResult sw_undir = shapiro_wilk(undir_all);

  // volume-asymmetry linear model with the same covariates
  Eigen::MatrixXd design(rows.size(), 5);
  for (std::size_t i = 0; i < rows.size(); ++i)
    design.row(i) << 1.0, covars[i].age, covars[i].sex, covars[i].etiv,
        covars[i].diagnosis;
  Eigen::VectorXd ydir = Eigen::Map<Eigen::VectorXd>(dir_all.data(), dir_all.size());
  Eigen::VectorXd yundir = Eigen::Map<Eigen::VectorXd>(undir_all.data(), undir_all.size());
  const double p_dir = ols_fit(design, ydir).p[4];
  const double p_undir = ols_fit(design, yundir).p[4];

  json state;
  state["significant_points"] =
      static_cast<int>(std::count(pw.significant.begin(), pw.significant.end(), 1));
  state["num_points"] = m;
  state["horn_components"] = horn_k;
  state["hotelling_components_used"] = kk;
  state["horn_explained_variance"] = explained;
  state["hotelling"] = group_test_to_json(hotelling);
  state["mw_directional"] = group_test_to_json(mw_dir);
  state["mw_undirectional"] = group_test_to_json(mw_undir);
  state["sw_directional"] = group_test_to_json(sw_dir);
  state["sw_undirectional"] = group_test_to_json(sw_undir);
  state["volume_model_p_directional"] = p_dir;
  state["volume_model_p_undirectional"] = p_undir;
  write_json(artifact(cfg, "stats_state.json"), state);
}

RunReport stage_report(const PipelineConfig& cfg) {
  StageTimer timer(cfg, "report");
  require_artifact(cfg, "optimize_state.json", "optimize");
  require_artifact(cfg, "align_state.json", "align");
  require_artifact(cfg, "stats_state.json", "stats");
  json opt = read_json(artifact(cfg, "optimize_state.json"));
  json aln = read_json(artifact(cfg, "align_state.json"));
  json st = read_json(artifact(cfg, "stats_state.json"));

  RunReport rep;
  rep.seed = cfg.seed;
  rep.config_echo = config_to_json_text(cfg);
  rep.optimizer_converged = opt.at("converged");
  rep.optimizer_iterations = opt.at("iterations");
  rep.optimizer_final_q = opt.at("final_q");
  rep.procrustes_iterations = aln.at("iterations");
  rep.procrustes_converged = aln.at("converged");
  rep.hotelling = group_test_from_json(st.at("hotelling"));
  rep.horn_components = st.at("horn_components");
  rep.horn_explained_variance = st.at("horn_explained_variance");
  rep.significant_points = st.at("significant_points");
  rep.num_points = st.at("num_points");
  rep.mw_directional = group_test_from_json(st.at("mw_directional"));
  rep.mw_undirectional = group_test_from_json(st.at("mw_undirectional"));
  rep.sw_directional = group_test_from_json(st.at("sw_directional"));
  rep.sw_undirectional = group_test_from_json(st.at("sw_undirectional"));
  rep.volume_model_p_directional = st.at("volume_model_p_directional");
  rep.volume_model_p_undirectional = st.at("volume_model_p_undirectional");

  json j;
  // thread count affects scheduling only, never numerics, so it stays out of
  // the echoed config to keep reports comparable across machines
  json echo = json::parse(rep.config_echo);
  echo.erase("threads");
  j["config"] = echo;
  j["seed"] = rep.seed;
  j["optimizer"] = opt;
  j["procrustes"] = aln;
  j["stats"] = st;
  write_json(artifact(cfg, "report.json"), j);

  // ground-truth point list when the cohort carries a planted region
  const fs::path gt_path = fs::path(manifest_path(cfg)).parent_path() / "ground_truth.json";
  if (fs::exists(gt_path) && fs::exists(artifact(cfg, "mean.psm"))) {
    CohortSpec gt = load_ground_truth(gt_path.string());
    ShapeModel mean = load_model(artifact(cfg, "mean.psm").string());
    Eigen::MatrixXd pts = mean.sample_points(0);
    auto mask = ground_truth_mask(pts, gt);
    std::ofstream out(artifact(cfg, "ground_truth_points.txt"));
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (mask[i]) out << (i + 1) << "\n";
  }

  std::ofstream txt(artifact(cfg, "report.txt"));
  txt << "shapeasym run report\n"
      << "====================\n"
      << "seed: " << rep.seed << "\n"
      << "optimizer: " << (rep.optimizer_converged ? "converged" : "NOT converged")
      << " after " << rep.optimizer_iterations << " iterations, final Q = "
      << fmt_double(rep.optimizer_final_q) << "\n"
      << "procrustes: " << rep.procrustes_iterations << " iterations, "
      << (rep.procrustes_converged ? "converged" : "NOT converged") << "\n"
      << "horn components: " << rep.horn_components << " (explained variance "
      << fmt_double(rep.horn_explained_variance) << ")\n"
      << "hotelling T2 = " << fmt_double(rep.hotelling.statistic)
      << ", p = " << fmt_double(rep.hotelling.p_value) << "\n"
      << "significant points (FDR q=" << cfg.fdr_q << "): " << rep.significant_points
      << " / " << rep.num_points << "\n"
      << "volumetric MW directional: U = " << fmt_double(rep.mw_directional.statistic)
      << ", p = " << fmt_double(rep.mw_directional.p_value) << "\n"
      << "volumetric MW undirectional: U = " << fmt_double(rep.mw_undirectional.statistic)
      << ", p = " << fmt_double(rep.mw_undirectional.p_value) << "\n"
      << "shapiro-wilk directional p = " << fmt_double(rep.sw_directional.p_value)
      << ", undirectional p = " << fmt_double(rep.sw_undirectional.p_value) << "\n"
      << "volume model diagnosis p (directional) = "
      << fmt_double(rep.volume_model_p_directional) << "\n"
      << "volume model diagnosis p (undirectional) = "
      << fmt_double(rep.volume_model_p_undirectional) << "\n"
      << "(wall-clock per stage: see timings.json)\n";
  return rep;
}

RunReport run_pipeline(const PipelineConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  std::string stage = "synth";
  try {
    if (cfg.synth) stage_synth(cfg);
    stage = "optimize";
    stage_optimize(cfg);
    stage = "align";
    stage_align(cfg);
    stage = "asymmetry";
    stage_asymmetry(cfg);
    stage = "stats";
    stage_stats(cfg);
    stage = "report";
    return stage_report(cfg);
  } catch (const std::exception& e) {
    std::ofstream(artifact(cfg, "FAILED_" + stage + ".marker")) << e.what() << "\n";
    throw std::runtime_error("pipeline stage '" + stage + "' failed: " + e.what());
  }
}

}  // namespace sa
