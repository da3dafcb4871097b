#pragma once

#include <atomic>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "ulca/cobyla.hpp"
#include "ulca/dataset.hpp"
#include "ulca/geometry.hpp"
#include "ulca/group_stats.hpp"
#include "ulca/solvers.hpp"
#include "ulca/ulca_model.hpp"

namespace ulca {

enum class GestureKind { MoveCentroid, ScaleEllipse };

/// A group-level edit of the embedding, in display coordinates.
struct Gesture {
  GestureKind kind = GestureKind::MoveCentroid;
  int group = 0;
  Eigen::Vector2d target = Eigen::Vector2d::Zero();  // new centroid (MoveCentroid)
  double factor = 1.0;                               // uniform ellipse scale (ScaleEllipse)
};

/// Ideal geometry after a gesture: the pre-gesture geometry with only the
/// gestured quantity replaced.
struct InteractionSpec {
  GestureKind kind = GestureKind::MoveCentroid;
  int target_group = 0;
  Eigen::MatrixXd ideal_distances;  // c x c
  Eigen::VectorXd ideal_areas;      // c

  void validate() const;
};

InteractionSpec make_interaction(const GroupGeometry& current, const Gesture& gesture);

struct BackwardConfig {
  double r_dist = 0.8;
  double r_area = 0.2;
  int max_iters = 40;  // function evaluations
  double rho_init = 0.25;
  double rho_final = 1e-4;
  double confidence = kDefaultConfidence;

  static BackwardConfig defaults_for(GestureKind kind);
  void validate() const;
};

struct CostTerm {
  double value = 0.0;      // clamped to [0, 1]
  double unclamped = 0.0;
  bool degenerate = false;
};

/// sqrt(sum (l' - l)^2 / sum l'^2) over all ordered pairs.
CostTerm cost_dist(const Eigen::MatrixXd& l_ideal, const Eigen::MatrixXd& l_new);
/// (1/c) sum_i |a'_k/a'_i - a_k/a_i| / (a'_k/a'_i).
CostTerm cost_area(int k, const Eigen::VectorXd& a_ideal, const Eigen::VectorXd& a_new);

struct TotalCost {
  double value = 0.0;
  double unclamped = 0.0;
  CostTerm dist;
  CostTerm area;
  bool fit_failed = false;
};

TotalCost combine_costs(const InteractionSpec& spec, const BackwardConfig& cfg,
                        const GroupGeometry& geometry);

/// Relaxed fit with theta (alpha must be set), then the weighted geometric cost.
/// A failing fit scores 1 with fit_failed set.
TotalCost total_cost(const InteractionSpec& spec, const BackwardConfig& cfg, const UlcaParams& theta,
                     const Dataset& data, const GroupStats& stats, const SolverConfig& solver_cfg);

/// Search coordinates: 3c weights in [0,1] followed by u in [0,1] with
/// alpha = 10^(6u - 3), i.e. alpha in [1e-3, 1e3] on a log scale.
namespace theta {
inline constexpr double kMinAlpha = 1e-3;
inline constexpr double kMaxAlpha = 1e3;
Eigen::VectorXd encode(const UlcaParams& params, double alpha);
UlcaParams decode(const Eigen::VectorXd& x, const UlcaParams& base);
}  // namespace theta

struct BackwardResult {
  UlcaParams params;
  double cost = 0.0;
  double cost_unclamped = 0.0;
  double cost_init = 0.0;
  int iterations = 0;
  bool cancelled = false;
  std::vector<std::pair<UlcaParams, double>> trace;
  std::optional<double> accuracy;  // (e_init - e) / (e_init - e_opt), when e_opt is given
};

/// Costs at or below this count as already satisfied: the search is skipped.
inline constexpr double kFixedPointCost = 1e-9;

/// Everything a run needs from the live session, by reference.
struct BackwardContext {
  const Dataset& data;
  const GroupStats& stats;
  const UlcaParams& current;
  double current_alpha;  // alpha of the displayed fit (resolved ratio in trace-ratio mode)
};

BackwardResult backward_select(const InteractionSpec& spec, const BackwardContext& ctx,
                               const BackwardConfig& cfg,
                               std::optional<double> e_opt = std::nullopt,
                               const std::atomic<bool>* cancel = nullptr,
                               const ProgressFn& progress = {});

// ---------------------------------------------------------------------------
// Mimicked-gesture evaluation.

struct MixtureSpec {
  int n = 1000;
  int d = 10;
  int c = 2;
};

/// Seeded Gaussian mixture with per-group random means and covariances.
Dataset synthesize_mixture(const MixtureSpec& spec, std::mt19937_64& rng);

/// A random group and gesture: centroid to a uniform point in the embedding's
/// bounding box, or an ellipse scale factor uniform in [0.5, 2].
Gesture random_gesture(const Eigen::MatrixXd& Z, int num_groups, std::mt19937_64& rng);

struct EvalSetting {
  int m = 40;
  double mean_seconds = 0.0;
  double mean_accuracy = 0.0;
  int cases_used = 0;
  int cases_discarded = 0;
};

struct EvalReport {
  MixtureSpec mixture;
  int trials = 0;
  int m_opt = 1000;
  std::uint64_t seed = 0;
  std::vector<EvalSetting> settings;
};

/// Initial embeddings use alpha = 1 and uniform random weights; e_opt is the
/// cost reached with m_opt evaluations. Cases where e_opt equals e_init are
/// discarded.
EvalReport evaluate_backward(const MixtureSpec& mixture, const std::vector<int>& m_values,
                             int trials, std::uint64_t seed, int m_opt = 1000);

}  // namespace ulca
