#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sa/align.hpp"
#include "sa/asymmetry.hpp"
#include "sa/optimizer.hpp"
#include "sa/stats.hpp"
#include "sa/synth.hpp"

namespace sa {

struct PipelineConfig {
  uint64_t seed = 42;
  std::string manifest;  // cohort CSV; empty when the synth stage provides it
  std::string out_dir = "out";
  MirrorPlane mirror{Axis::X, 0.0};
  OptimizerConfig optimizer;
  double procrustes_tol = 1e-6;
  int procrustes_max_iters = 100;
  double fdr_q = 0.05;
  int horn_permutations = 100;
  double horn_percentile = 0.95;
  bool horn_use_mean = false;
  bool include_handedness = false;
  int reference_subject = 0;
  int threads = 1;
  std::optional<CohortSpec> synth;
};

PipelineConfig load_config(const std::string& path);
PipelineConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const PipelineConfig& cfg);

struct ManifestRow {
  std::string subject_id;
  std::string left_mesh;   // resolved absolute/relative path
  std::string right_mesh;
  CovariateRow covariates;
};

// Fixed-header CSV: subject_id,left_mesh,right_mesh,age,sex,etiv,diagnosis
// (+ optional handedness). Diagnosis is the literal string healthy or AD.
// Validates unique ids and that the mesh files exist.
std::vector<ManifestRow> load_manifest(const std::string& path);

struct RunReport {
  std::string config_echo;
  bool optimizer_converged = false;
  int optimizer_iterations = 0;
  double optimizer_final_q = 0.0;
  int procrustes_iterations = 0;
  bool procrustes_converged = false;
  GroupTestResult hotelling;
  int horn_components = 0;
  double horn_explained_variance = 0.0;
  int significant_points = 0;
  int num_points = 0;
  GroupTestResult mw_directional, mw_undirectional;
  GroupTestResult sw_directional, sw_undirectional;
  double volume_model_p_directional = 1.0;
  double volume_model_p_undirectional = 1.0;
  uint64_t seed = 0;
};

// Pipeline stages; each reads/writes serialized intermediates under
// cfg.out_dir so the stages compose to exactly the full run.
void stage_synth(const PipelineConfig& cfg);
void stage_optimize(const PipelineConfig& cfg);
void stage_align(const PipelineConfig& cfg);
void stage_asymmetry(const PipelineConfig& cfg);
void stage_stats(const PipelineConfig& cfg);
RunReport stage_report(const PipelineConfig& cfg);

// Full run: synth (when configured), optimize, align, asymmetry, stats,
// report. A stage failure aborts with the stage name; partial artifacts are
// kept next to a FAILED_<stage> marker.
RunReport run_pipeline(const PipelineConfig& cfg);

// Asymmetry CSV -> (subject ids, N x M matrix).
std::pair<std::vector<std::string>, Eigen::MatrixXd> load_asymmetry_csv(
    const std::string& path);

}  // namespace sa
