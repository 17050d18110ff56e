#include "sa/optimizer.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sa/parallel.hpp"
#include "sa/rng.hpp"

namespace sa {

namespace {
constexpr double kTwoPi = 6.283185307179586477;
constexpr double kCoincident2 = 1e-24;  // squared distance threshold
}  // namespace

Eigen::VectorXd adaptive_bandwidths(const Eigen::MatrixXd& positions, int k,
                                    double fraction) {
  const int m = static_cast<int>(positions.rows());
  Eigen::VectorXd sigma(m);
  if (m < 2) {
    sigma.setConstant(1.0);
    return sigma;
  }
  k = std::clamp(k, 1, m - 1);
  std::vector<double> d2(m - 1);
  for (int t = 0; t < m; ++t) {
    int idx = 0;
    for (int j = 0; j < m; ++j) {
      if (j == t) continue;
      d2[idx++] = (positions.row(j) - positions.row(t)).squaredNorm();
    }
    std::nth_element(d2.begin(), d2.begin() + (k - 1), d2.end());
    sigma[t] = std::max(fraction * std::sqrt(d2[k - 1]), 1e-12);
  }
  return sigma;
}

// Kernel matrix K(j,k) = G_{sigma_k}(x_j - x_k), zero diagonal, and the
// leave-one-out densities p_j = sum_k K(j,k) / (M-1).
static void kernel_and_density(const Eigen::MatrixXd& pos, const Eigen::VectorXd& sigma,
                               Eigen::MatrixXd& K, Eigen::VectorXd& p) {
  const int m = static_cast<int>(pos.rows());
  K.setZero(m, m);
  for (int k = 0; k < m; ++k) {
    const double s2 = sigma[k] * sigma[k];
    const double norm = std::pow(kTwoPi * s2, -1.5);
    for (int j = 0; j < m; ++j) {
      if (j == k) continue;
      const double r2 = (pos.row(j) - pos.row(k)).squaredNorm();
      K(j, k) = norm * std::exp(-r2 / (2.0 * s2));
    }
  }
  p = K.rowwise().sum() / static_cast<double>(m - 1);
  for (int j = 0; j < m; ++j) p[j] = std::max(p[j], 1e-300);
}

double sampling_entropy(const Eigen::MatrixXd& positions, const Eigen::VectorXd& sigma) {
  const int m = static_cast<int>(positions.rows());
  if (m < 2) return 0.0;
  Eigen::MatrixXd K;
  Eigen::VectorXd p;
  kernel_and_density(positions, sigma, K, p);
  double h = 0.0;
  for (int j = 0; j < m; ++j) h += std::log(p[j]);
  return -h / static_cast<double>(m);
}

Eigen::MatrixXd sampling_entropy_gradient_ambient(const Eigen::MatrixXd& positions,
                                                  const Eigen::VectorXd& sigma,
                                                  double max_repulsion, int* coincident) {
  const int m = static_cast<int>(positions.rows());
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(m, 3);
  if (m < 2) return grad;
  Eigen::MatrixXd K;
  Eigen::VectorXd p;
  kernel_and_density(positions, sigma, K, p);
  int ncoinc = 0;
  const double scale = -1.0 / (static_cast<double>(m) * static_cast<double>(m - 1));
  for (int t = 0; t < m; ++t) {
    Eigen::RowVector3d g = Eigen::RowVector3d::Zero();
    const double st2 = sigma[t] * sigma[t];
    for (int j = 0; j < m; ++j) {
      if (j == t) continue;
      const Eigen::RowVector3d diff = positions.row(j) - positions.row(t);
      if (diff.squaredNorm() < kCoincident2) ++ncoinc;
      // d p_t / d x_t through kernel j, plus d p_j / d x_t through kernel t
      g += (K(t, j) / (sigma[j] * sigma[j]) / p[t]) * diff;
      g += (K(j, t) / st2 / p[j]) * diff;
    }
    g *= scale;
    const double len = g.norm();
    if (len > max_repulsion) g *= max_repulsion / len;
    grad.row(t) = g;
  }
  if (coincident) *coincident = ncoinc / 2;
  return grad;
}

Eigen::MatrixXd sampling_entropy_gradient(const Eigen::MatrixXd& positions,
                                          const Eigen::VectorXd& sigma,
                                          const Eigen::MatrixXd& normals,
                                          double max_repulsion, int* coincident) {
  Eigen::MatrixXd grad =
      sampling_entropy_gradient_ambient(positions, sigma, max_repulsion, coincident);
  for (int t = 0; t < grad.rows(); ++t) {
    const Eigen::RowVector3d n = normals.row(t);
    grad.row(t) -= grad.row(t).dot(n) * n;
  }
  return grad;
}

double absolute_regularization(const ShapeMatrix& shape, double relative) {
  const int n = static_cast<int>(shape.rows());
  const int d = static_cast<int>(shape.cols());
  Eigen::RowVectorXd mean = shape.colwise().mean();
  double trace = 0.0;
  for (int i = 0; i < n; ++i) trace += (shape.row(i) - mean).squaredNorm();
  trace /= std::max(1, n - 1);
  double mean_diag = trace / d;
  return std::max(relative * mean_diag, 1e-12);
}

double correspondence_entropy(const ShapeMatrix& shape, double reg) {
  const int n = static_cast<int>(shape.rows());
  const int d = static_cast<int>(shape.cols());
  Eigen::MatrixXd y = shape;
  Eigen::RowVectorXd mean = shape.colwise().mean();
  y.rowwise() -= mean;
  Eigen::MatrixXd gram = y * y.transpose() / std::max(1, n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  const auto& ev = es.eigenvalues();  // ascending
  double h = 0.0;
  const int keep = std::min(n, d);
  for (int i = 0; i < keep; ++i) h += std::log(std::max(ev[n - 1 - i], 0.0) + reg);
  if (d > n) h += (d - n) * std::log(reg);
  return 0.5 * h;
}

ShapeMatrix correspondence_entropy_gradient(const ShapeMatrix& shape, double reg) {
  const int n = static_cast<int>(shape.rows());
  Eigen::MatrixXd y = shape;
  Eigen::RowVectorXd mean = shape.colwise().mean();
  y.rowwise() -= mean;
  const double c = std::max(1, n - 1);
  Eigen::MatrixXd gram = y * y.transpose() / c;
  gram.diagonal().array() += reg;
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  Eigen::MatrixXd g = llt.solve(y) / c;
  // chain rule through the column centering
  Eigen::RowVectorXd gmean = g.colwise().mean();
  g.rowwise() -= gmean;
  return g;
}

// ---------------------------------------------------------------------------
// Split-and-relax driver

namespace {

struct SurfaceState {
  const Surface* surface;
  std::vector<SurfacePoint> particles;
};

Eigen::MatrixXd positions_of(const SurfaceState& s) {
  Eigen::MatrixXd p(s.particles.size(), 3);
  for (std::size_t i = 0; i < s.particles.size(); ++i)
    p.row(i) = s.particles[i].position.transpose();
  return p;
}

Eigen::MatrixXd normals_of(const SurfaceState& s) {
  Eigen::MatrixXd n(s.particles.size(), 3);
  for (std::size_t i = 0; i < s.particles.size(); ++i)
    n.row(i) = s.surface->face_normals()[s.particles[i].face_id].transpose();
  return n;
}

ShapeMatrix stack_shapes(const std::vector<SurfaceState>& states) {
  const int n = static_cast<int>(states.size());
  const int m = static_cast<int>(states[0].particles.size());
  ShapeMatrix z(n, 3 * m);
  for (int i = 0; i < n; ++i)
    for (int t = 0; t < m; ++t)
      z.block<1, 3>(i, 3 * t) = states[i].particles[t].position.transpose();
  return z;
}

double mean_nn_distance(const Eigen::MatrixXd& pos) {
  const int m = static_cast<int>(pos.rows());
  if (m < 2) return 0.0;
  double sum = 0.0;
  for (int t = 0; t < m; ++t) {
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < m; ++j) {
      if (j == t) continue;
      best = std::min(best, (pos.row(j) - pos.row(t)).squaredNorm());
    }
    sum += std::sqrt(best);
  }
  return sum / m;
}

void split_particles(std::vector<SurfaceState>& states, const OptimizerConfig& cfg,
                     int round) {
  const int axis = static_cast<int>(cfg.mirror_plane.axis);
  parallel_for(static_cast<int>(states.size()), cfg.threads, [&](int i) {
    auto& s = states[i];
    const int m = static_cast<int>(s.particles.size());
    Eigen::MatrixXd pos = positions_of(s);
    double eps = m >= 2 ? 0.2 * mean_nn_distance(pos) : 0.02 * s.surface->bbox_diagonal();
    std::vector<SurfacePoint> children(m);
    for (int t = 0; t < m; ++t) {
      // one draw per (round, particle), shared by every surface so the
      // split keeps corresponding children in correspondence
      Rng rng(rng_mix(cfg.seed, rng_mix(static_cast<uint64_t>(round),
                                        static_cast<uint64_t>(t))));
      Vec3 g(rng.normal(), rng.normal(), rng.normal());
      if (cfg.mirror_init) g[axis] = -g[axis];
      const Vec3 n = s.surface->face_normals()[s.particles[t].face_id];
      Vec3 tangent = g - g.dot(n) * n;
      double len = tangent.norm();
      if (len < 1e-12) {
        Vec3 seed_dir = std::abs(n.z()) < 0.9 ? Vec3(0, 0, 1) : Vec3(1, 0, 0);
        tangent = (seed_dir - seed_dir.dot(n) * n).normalized();
      } else {
        tangent /= len;
      }
      children[t] = s.surface->project(s.particles[t].position + eps * tangent);
    }
    s.particles.insert(s.particles.end(), children.begin(), children.end());
  });
}

// The entropy gradients carry 1/(M(M-1)) and 1/(N-1) scales, so the useful
// step multiplier spans many orders of magnitude; backtracking plus the
// 0.5 sigma step cap keep large eta safe.
struct IterState {
  double eta = 1.0;
};

// One relaxation pass; returns max particle displacement. In spring mode the
// correspondence term is the quadratic penalty tr(Cov)/(2 reg), the infinite
// regularization limit of the entropy: unlike the entropy gradient it pulls
// deviations along high-variance directions just as hard as any other, so a
// parametrization drift shared by part of the cohort cannot shelter in an
// inflated covariance mode.
double relax_iteration(std::vector<SurfaceState>& states, const OptimizerConfig& cfg,
                       double alpha_eff, double reg_rel, bool spring, IterState& it,
                       OptimizeReport& report) {
  const int n = static_cast<int>(states.size());
  const int m = static_cast<int>(states[0].particles.size());
  if (m < 2) return 0.0;

  // frozen per-iteration quantities
  std::vector<Eigen::MatrixXd> pos(n), nor(n), gsamp(n);
  std::vector<Eigen::VectorXd> sig(n);
  std::vector<int> coinc(n, 0);
  parallel_for(n, cfg.threads, [&](int i) {
    pos[i] = positions_of(states[i]);
    nor[i] = normals_of(states[i]);
    sig[i] = adaptive_bandwidths(pos[i], cfg.sigma_neighbors, cfg.initial_sigma_fraction);
    gsamp[i] = sampling_entropy_gradient(pos[i], sig[i], nor[i], cfg.max_repulsion,
                                         &coinc[i]);
  });
  for (int i = 0; i < n; ++i) report.coincident_warnings += coinc[i];

  const bool use_corr = n >= 2 && alpha_eff > 0.0;
  ShapeMatrix z, gcorr;
  double reg = 0.0;
  if (use_corr) {
    z = stack_shapes(states);
    if (spring) {
      // spring scale = mean squared bandwidth: deviations below the particle
      // spacing are tolerated so coherent cohort-wide rearrangement stays
      // cheap, while basin-scale drift is pulled back hard
      double s2 = 0.0;
      for (int i = 0; i < n; ++i) s2 += sig[i].squaredNorm() / m;
      reg = std::max(s2 / n, 1e-12);
      ShapeMatrix y = z;
      y.rowwise() -= z.colwise().mean().eval();
      gcorr = y / ((n - 1) * reg);
    } else {
      reg = absolute_regularization(z, reg_rel);
      gcorr = correspondence_entropy_gradient(z, reg);
    }
  }

  auto spring_energy = [&](const ShapeMatrix& shape) {
    ShapeMatrix y = shape;
    y.rowwise() -= shape.colwise().mean().eval();
    return y.squaredNorm() / (2.0 * (n - 1) * reg);
  };
  auto total_q = [&](const std::vector<SurfaceState>& st) {
    std::vector<double> hx(n);
    parallel_for(n, cfg.threads, [&](int i) {
      hx[i] = sampling_entropy(positions_of(st[i]), sig[i]);
    });
    double q = 0.0;
    for (int i = 0; i < n; ++i) q -= hx[i];
    if (use_corr)
      q += alpha_eff * (spring ? spring_energy(stack_shapes(st))
                               : correspondence_entropy(stack_shapes(st), reg));
    return q;
  };
  const double q_before = total_q(states);

  double max_disp = 0.0;
  for (int halving = 0; halving < 40; ++halving) {
    std::vector<SurfaceState> trial = states;
    std::vector<double> disp(n, 0.0);
    parallel_for(n, cfg.threads, [&](int i) {
      for (int t = 0; t < m; ++t) {
        Eigen::RowVector3d dir = -gsamp[i].row(t);
        // the (n-1) factor undoes the sample-count scaling in the entropy
        // gradient so alpha balances the two terms independently of cohort
        // size; the line search still measures the exact objective
        if (use_corr) dir += alpha_eff * (n - 1) * gcorr.block<1, 3>(i, 3 * t);
        const Eigen::RowVector3d nrm = nor[i].row(t);
        dir -= dir.dot(nrm) * nrm;
        Eigen::RowVector3d step = -it.eta * sig[i][t] * sig[i][t] * dir;
        const double cap = 0.5 * sig[i][t];
        const double len = step.norm();
        if (len > cap) step *= cap / len;
        SurfacePoint sp =
            states[i].surface->project(states[i].particles[t].position + step.transpose());
        disp[i] = std::max(disp[i], (sp.position - states[i].particles[t].position).norm());
        trial[i].particles[t] = sp;
      }
    });
    const double q_after = total_q(trial);
    if (q_after <= q_before + 1e-9) {
      report.max_step_increase = std::max(report.max_step_increase, q_after - q_before);
      states = std::move(trial);
      max_disp = *std::max_element(disp.begin(), disp.end());
      it.eta = std::min(it.eta * 2.0, 1e8);
      return max_disp;
    }
    it.eta *= 0.5;
    if (it.eta < 1e-12) {
      ++report.clamp_events;
      return 0.0;  // keep old positions; zero step never increases Q
    }
  }
  ++report.clamp_events;
  return 0.0;
}

// Intermediate rounds hold the regularizer at a stiff spring-to-mean level,
// which locks the parametrization across the cohort while particles spread;
// only the final round anneals down to the configured value and releases the
// real variance modes.
void relax_round(std::vector<SurfaceState>& states, const OptimizerConfig& cfg,
                 int iterations, bool final_round, bool* converged,
                 OptimizeReport& report) {
  IterState it;
  *converged = false;
  const double reg_hi = std::max(0.3, cfg.covariance_regularization);
  for (int iter = 0; iter < iterations; ++iter) {
    const double frac =
        iterations <= 1 ? 1.0 : static_cast<double>(iter) / (iterations - 1);
    // alpha comes up over the first fifth of the round so the spring acts at
    // full strength while the regularizer is still stiff
    const double ramp = std::min(1.0, 5.0 * frac);
    const double alpha_eff = cfg.alpha * ramp;
    const double decay =
        final_round ? std::clamp((frac - 0.5) / 0.5, 0.0, 1.0) : 0.0;
    const double reg_rel =
        reg_hi * std::pow(cfg.covariance_regularization / reg_hi, decay);
    const bool spring = decay <= 0.0;
    const double disp =
        relax_iteration(states, cfg, alpha_eff, reg_rel, spring, it, report);
    ++report.total_iterations;
    // no early exit while the schedule is still annealing
    const bool anneal_done = !final_round || decay >= 1.0;
    if (disp < cfg.convergence_tol && anneal_done && frac >= 0.2) {
      *converged = true;
      return;
    }
  }
}

}  // namespace

OptimizeResult optimize_correspondences(const std::vector<const Surface*>& surfaces,
                                        const OptimizerConfig& cfg,
                                        std::vector<std::string> sample_ids) {
  const int n = static_cast<int>(surfaces.size());
  if (n < 1) throw std::invalid_argument("optimize_correspondences: no surfaces");
  if (cfg.m_target < 1 || (cfg.m_target & (cfg.m_target - 1)) != 0)
    throw std::invalid_argument("m_target must be a power of two (doubling schedule)");
  int rounds = 0;
  while ((1 << rounds) < cfg.m_target) ++rounds;
  if (cfg.split_rounds >= 0 && cfg.split_rounds != rounds)
    throw std::invalid_argument("split_rounds inconsistent with m_target");
  if (cfg.alpha <= 0.0) throw std::invalid_argument("alpha must be positive");

  std::vector<SurfaceState> states(n);
  // seed from a generic off-axis direction: the centroid itself projects
  // ambiguously on near-symmetric shapes, which would scatter samples into
  // mirrored basins from the very first particle
  Vec3 seed_dir = Vec3(1.0, 0.7, 0.4).normalized();
  if (cfg.mirror_init)
    seed_dir[static_cast<int>(cfg.mirror_plane.axis)] =
        -seed_dir[static_cast<int>(cfg.mirror_plane.axis)];
  for (int i = 0; i < n; ++i) {
    states[i].surface = surfaces[i];
    states[i].particles = {surfaces[i]->project(
        surfaces[i]->centroid() + surfaces[i]->bbox_diagonal() * seed_dir)};
  }

  OptimizeReport report;
  bool converged = true;
  for (int round = 0; round < rounds; ++round) {
    split_particles(states, cfg, round);
    relax_round(states, cfg, cfg.iterations_per_round, round == rounds - 1,
                &converged, report);
  }

  ShapeModel model;
  model.num_particles = cfg.m_target;
  model.shape_matrix = stack_shapes(states);
  if (sample_ids.empty())
    for (int i = 0; i < n; ++i) sample_ids.push_back(std::to_string(i));
  model.sample_ids = std::move(sample_ids);

  // final Q at the nominal alpha
  double q = 0.0;
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXd p = positions_of(states[i]);
    q -= sampling_entropy(
        p, adaptive_bandwidths(p, cfg.sigma_neighbors, cfg.initial_sigma_fraction));
  }
  if (n >= 2)
    q += cfg.alpha *
         correspondence_entropy(
             model.shape_matrix,
             absolute_regularization(model.shape_matrix, cfg.covariance_regularization));
  report.final_q = q;
  report.converged = converged;

  OptimizeResult result;
  result.report = report;
  result.sets.resize(n);
  for (int i = 0; i < n; ++i) {
    result.sets[i].surface_id = i;
    result.sets[i].particles = std::move(states[i].particles);
  }
  result.model = std::move(model);
  return result;
}

std::vector<ParticleSet> initialize_particles(const std::vector<const Surface*>& surfaces,
                                              const OptimizerConfig& config) {
  return optimize_correspondences(surfaces, config).sets;
}

}  // namespace sa
