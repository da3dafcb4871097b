#pragma once

#include <atomic>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ulca/backward_select.hpp"
#include "ulca/dataset.hpp"
#include "ulca/geometry.hpp"
#include "ulca/group_stats.hpp"
#include "ulca/solvers.hpp"
#include "ulca/ulca_model.hpp"

namespace ulca {

struct DrawnAxis {
  Eigen::VectorXd v;        // display coordinates
  Eigen::VectorXd loading;  // attribute loadings against the current display projection
};

struct ChangeSummary {
  double objective_before = 0.0;
  double objective_after = 0.0;
  double alpha_used = 0.0;
  bool alignment_degenerate = false;
  /// ||Z_display_new - Z_display_old||_F, zero on the first fit.
  double displacement = 0.0;
};

struct GestureOutcome {
  BackwardResult backward;
  std::optional<ChangeSummary> change;  // empty when nothing was committed
};

/// Live analysis state: dataset, fit, display frame, geometry, drawn axes and
/// named snapshots. Not internally synchronized; callers serialize writers.
class Session {
 public:
  Session(std::shared_ptr<const Dataset> data, UlcaParams params, SolverConfig solver_cfg = {},
          std::string dataset_path = {}, double confidence = kDefaultConfidence);
  Session(Dataset data, UlcaParams params, SolverConfig solver_cfg = {},
          std::string dataset_path = {}, double confidence = kDefaultConfidence);

  const Dataset& dataset() const { return *data_; }
  std::shared_ptr<const Dataset> dataset_ptr() const { return data_; }
  std::shared_ptr<const GroupStats> stats_ptr() const { return stats_; }
  const GroupStats& stats() const { return *stats_; }
  const std::string& dataset_path() const { return path_; }
  std::uint64_t dataset_hash() const { return hash_; }

  const UlcaParams& params() const { return params_; }
  const SolverConfig& solver_config() const { return solver_cfg_; }
  const UlcaFit& fit() const { return fit_; }
  /// Orthogonal d' x d' rotation from the canonical fit frame to the display frame.
  const Eigen::MatrixXd& display_rotation() const { return rotation_; }
  /// M R, the projection behind the displayed embedding.
  const Eigen::MatrixXd& display_projection() const { return display_M_; }
  const Eigen::MatrixXd& embedding() const { return Z_display_; }
  /// Present when d' = 2.
  const std::optional<GroupGeometry>& geometry() const { return geometry_; }
  const std::vector<DrawnAxis>& drawn_axes() const { return axes_; }
  double confidence() const { return confidence_; }
  /// Alpha of the displayed fit: the set alpha, or the resolved ratio.
  double current_alpha() const { return fit_.projection.alpha_used; }

  /// Refit, align to the previously displayed embedding, recompute geometry
  /// and drawn-axis loadings. On error the state is unchanged.
  ChangeSummary update_params(const UlcaParams& params);
  ChangeSummary set_solver_config(const SolverConfig& cfg);
  void set_confidence(double confidence);

  InteractionSpec interaction_for(const Gesture& gesture) const;
  /// Only reads the session; safe to run while readers copy state.
  BackwardResult run_backward(const InteractionSpec& spec, const BackwardConfig& cfg,
                              const std::atomic<bool>* cancel = nullptr,
                              const ProgressFn& progress = {}) const;
  /// Commits a finished run. Cancelled runs and runs already at the fixed
  /// point leave the state as it is and return nothing.
  std::optional<ChangeSummary> commit(const BackwardResult& result);

  /// interaction_for, run_backward and commit in one call.
  GestureOutcome apply_gesture(const Gesture& gesture,
                               std::optional<BackwardConfig> cfg = std::nullopt,
                               const std::atomic<bool>* cancel = nullptr,
                               const ProgressFn& progress = {});

  /// Stores v and returns its attribute loadings.
  Eigen::VectorXd draw_axis(const Eigen::VectorXd& v);
  void clear_axes();

  /// Self-describing JSON document of the restorable state (snapshots excluded).
  std::string serialize() const;
  /// Rebuilds the state from serialize() output. Throws DatasetMismatch when
  /// the document references different data.
  void restore(const std::string& document);

  void save_snapshot(const std::string& name, bool overwrite = false);
  void restore_snapshot(const std::string& name);
  /// Adds an already serialized snapshot, e.g. one read back from disk.
  void import_snapshot(const std::string& name, std::string document, bool overwrite = false);
  std::vector<std::string> snapshot_names() const;
  const std::string& snapshot(const std::string& name) const;
  const std::vector<std::pair<std::string, std::string>>& snapshots() const { return snapshots_; }

  /// |objective of a fresh refit - stored objective|.
  double consistency_residual() const;

 private:
  void refresh_display();
  void resolve_axes();

  std::shared_ptr<const Dataset> data_;
  std::shared_ptr<const GroupStats> stats_;
  std::string path_;
  std::uint64_t hash_ = 0;

  UlcaParams params_;
  SolverConfig solver_cfg_;
  UlcaFit fit_;
  Eigen::MatrixXd rotation_;
  Eigen::MatrixXd display_M_;
  Eigen::MatrixXd Z_display_;
  std::optional<GroupGeometry> geometry_;
  std::vector<DrawnAxis> axes_;
  double confidence_ = kDefaultConfidence;

  std::vector<std::pair<std::string, std::string>> snapshots_;
};

std::string hash_hex(std::uint64_t hash);

}  // namespace ulca
