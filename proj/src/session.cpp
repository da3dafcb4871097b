#include "ulca/session.hpp"

#include <algorithm>
#include <cstdio>

#include "ulca/error.hpp"
#include "ulca/json_codec.hpp"
#include "ulca/kernels.hpp"

namespace ulca {
namespace {

namespace jc = ulca::codec;

constexpr int kFormatVersion = 1;

void check_confidence(double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw Error(Errc::InvalidArgument, "confidence must lie in (0, 1)");
  }
}

void check_name(const std::string& name) {
  if (name.empty()) throw Error(Errc::InvalidArgument, "snapshot name must not be empty");
}

}  // namespace

std::string hash_hex(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

Session::Session(std::shared_ptr<const Dataset> data, UlcaParams params, SolverConfig solver_cfg,
                 std::string dataset_path, double confidence)
    : data_(std::move(data)), path_(std::move(dataset_path)), solver_cfg_(solver_cfg),
      confidence_(confidence) {
  if (!data_) throw Error(Errc::NoDataset, "session needs a dataset");
  data_->validate();
  check_confidence(confidence);
  solver_cfg_.validate();
  stats_ = std::make_shared<const GroupStats>(compute_group_stats(*data_));
  hash_ = data_->content_hash();
  update_params(params);
}

Session::Session(Dataset data, UlcaParams params, SolverConfig solver_cfg, std::string dataset_path,
                 double confidence)
    : Session(std::make_shared<const Dataset>(std::move(data)), std::move(params), solver_cfg,
              std::move(dataset_path), confidence) {}

ChangeSummary Session::update_params(const UlcaParams& params) {
  params.validate(data_->num_groups(), data_->cols());
  UlcaFit next = ulca::fit(*data_, *stats_, params, solver_cfg_);

  ChangeSummary summary;
  summary.objective_before = fit_.projection.objective;
  summary.objective_after = next.projection.objective;
  summary.alpha_used = next.projection.alpha_used;

  Eigen::MatrixXd R = Eigen::MatrixXd::Identity(params.dprime, params.dprime);
  const bool aligned = Z_display_.size() > 0 && Z_display_.cols() == next.embedding.cols();
  if (aligned) {
    const ProcrustesResult pr = procrustes_align(Z_display_, next.embedding);
    R = pr.R;
    summary.alignment_degenerate = pr.degenerate;
    summary.displacement = (pr.Z_aligned - Z_display_).norm();
  }

  params_ = params;
  fit_ = std::move(next);
  rotation_ = std::move(R);
  refresh_display();
  return summary;
}

ChangeSummary Session::set_solver_config(const SolverConfig& cfg) {
  cfg.validate();
  const SolverConfig previous = solver_cfg_;
  solver_cfg_ = cfg;
  try {
    return update_params(params_);
  } catch (...) {
    solver_cfg_ = previous;
    throw;
  }
}

void Session::set_confidence(double confidence) {
  check_confidence(confidence);
  confidence_ = confidence;
  refresh_display();
}

void Session::refresh_display() {
  display_M_ = fit_.projection.M * rotation_;
  Z_display_ = fit_.embedding * rotation_;
  if (params_.dprime == 2) {
    geometry_ = group_geometry(Z_display_, data_->labels, data_->num_groups(), confidence_);
  } else {
    geometry_.reset();
  }
  resolve_axes();
}

void Session::resolve_axes() {
  std::vector<DrawnAxis> kept;
  for (auto& a : axes_) {
    if (a.v.size() != display_M_.cols()) continue;
    a.loading = project_axis(display_M_, a.v);
    kept.push_back(std::move(a));
  }
  axes_ = std::move(kept);
}

InteractionSpec Session::interaction_for(const Gesture& gesture) const {
  if (!geometry_) {
    throw Error(Errc::InvalidArgument, "gestures need a two-dimensional embedding");
  }
  return make_interaction(*geometry_, gesture);
}

BackwardResult Session::run_backward(const InteractionSpec& spec, const BackwardConfig& cfg,
                                     const std::atomic<bool>* cancel,
                                     const ProgressFn& progress) const {
  BackwardConfig run_cfg = cfg;
  run_cfg.confidence = confidence_;
  // The relaxed refit of a trace-ratio display only approximates it, so a
  // gesture that restates the displayed geometry is judged on that geometry.
  if (geometry_) {
    const double shown = combine_costs(spec, run_cfg, *geometry_).value;
    if (shown <= kFixedPointCost) {
      BackwardResult out;
      out.params = params_;
      out.cost = out.cost_init = out.cost_unclamped = shown;
      out.trace.emplace_back(params_, shown);
      return out;
    }
  }
  const BackwardContext ctx{*data_, *stats_, params_, current_alpha()};
  return backward_select(spec, ctx, run_cfg, std::nullopt, cancel, progress);
}

std::optional<ChangeSummary> Session::commit(const BackwardResult& result) {
  if (result.cancelled || result.cost_init <= kFixedPointCost) return std::nullopt;
  return update_params(result.params);
}

GestureOutcome Session::apply_gesture(const Gesture& gesture, std::optional<BackwardConfig> cfg,
                                      const std::atomic<bool>* cancel, const ProgressFn& progress) {
  const InteractionSpec spec = interaction_for(gesture);
  const BackwardConfig run_cfg = cfg ? *cfg : BackwardConfig::defaults_for(gesture.kind);
  GestureOutcome out;
  out.backward = run_backward(spec, run_cfg, cancel, progress);
  out.change = commit(out.backward);
  return out;
}

Eigen::VectorXd Session::draw_axis(const Eigen::VectorXd& v) {
  DrawnAxis axis{v, project_axis(display_M_, v)};
  axes_.push_back(axis);
  return axis.loading;
}

void Session::clear_axes() { axes_.clear(); }

std::string Session::serialize() const {
  using nlohmann::json;
  const Projection& p = fit_.projection;
  json axes = json::array();
  for (const auto& a : axes_) axes.push_back(jc::vector_to_json(a.v));
  json doc = {
      {"format", "ulca-session"},
      {"version", kFormatVersion},
      {"dataset",
       {{"path", path_},
        {"hash", hash_hex(hash_)},
        {"n", data_->rows()},
        {"d", data_->cols()},
        {"attribute_names", data_->attribute_names},
        {"group_names", data_->group_names}}},
      {"params", jc::params_to_json(params_)},
      {"params_used", jc::params_to_json(fit_.params_used)},
      {"solver", jc::solver_to_json(solver_cfg_)},
      {"projection",
       {{"M", jc::matrix_to_json(p.M)},
        {"objective", p.objective},
        {"alpha_used", p.alpha_used},
        {"backend", std::string(backend_name(p.backend))},
        {"iterations", p.iterations},
        {"converged", p.converged},
        {"ratio_mode", fit_.ratio_mode},
        {"alpha_history", p.alpha_history}}},
      {"display_rotation", jc::matrix_to_json(rotation_)},
      {"drawn_axes", std::move(axes)},
      {"confidence", confidence_},
  };
  return doc.dump();
}

void Session::restore(const std::string& document) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(document);
  } catch (const std::exception& e) {
    throw Error(Errc::BadData, std::string("snapshot is not valid JSON: ") + e.what());
  }
  try {
    if (doc.at("format") != "ulca-session" || doc.at("version") != kFormatVersion) {
      throw Error(Errc::BadData, "unsupported snapshot format");
    }
    const auto& ds = doc.at("dataset");
    if (ds.at("hash").get<std::string>() != hash_hex(hash_)) {
      throw Error(Errc::DatasetMismatch, "snapshot was taken on a different dataset");
    }
    const UlcaParams base;
    UlcaParams params = jc::params_from_json(doc.at("params"), base);
    params.validate(data_->num_groups(), data_->cols());
    UlcaParams used = jc::params_from_json(doc.at("params_used"), base);
    SolverConfig solver = jc::solver_from_json(doc.at("solver"));

    const auto& pj = doc.at("projection");
    Projection proj;
    proj.M = jc::matrix_from_json(pj.at("M"));
    proj.objective = pj.at("objective").get<double>();
    proj.alpha_used = pj.at("alpha_used").get<double>();
    const auto backend = parse_backend(pj.at("backend").get<std::string>());
    if (!backend) throw Error(Errc::BadData, "unknown backend in snapshot");
    proj.backend = *backend;
    proj.iterations = pj.at("iterations").get<int>();
    proj.converged = pj.at("converged").get<bool>();
    proj.alpha_history = pj.at("alpha_history").get<std::vector<double>>();
    if (proj.M.rows() != data_->cols() || proj.M.cols() != params.dprime) {
      throw Error(Errc::BadData, "snapshot projection has the wrong shape");
    }
    Eigen::MatrixXd R = jc::matrix_from_json(doc.at("display_rotation"));
    if (R.rows() != params.dprime || R.cols() != params.dprime) {
      throw Error(Errc::BadData, "snapshot rotation has the wrong shape");
    }
    const double confidence = doc.at("confidence").get<double>();
    check_confidence(confidence);
    std::vector<DrawnAxis> axes;
    for (const auto& a : doc.at("drawn_axes")) axes.push_back(DrawnAxis{jc::vector_from_json(a), Eigen::VectorXd()});

    UlcaFit f;
    f.projection = std::move(proj);
    f.params_used = std::move(used);
    f.ratio_mode = pj.at("ratio_mode").get<bool>();
    f.embedding = kernels::project(data_->X, f.projection.M);

    params_ = std::move(params);
    solver_cfg_ = solver;
    fit_ = std::move(f);
    rotation_ = std::move(R);
    confidence_ = confidence;
    axes_ = std::move(axes);
    path_ = ds.at("path").get<std::string>();
    refresh_display();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::BadData, std::string("malformed snapshot: ") + e.what());
  }
}

void Session::save_snapshot(const std::string& name, bool overwrite) {
  import_snapshot(name, serialize(), overwrite);
}

void Session::import_snapshot(const std::string& name, std::string document, bool overwrite) {
  check_name(name);
  auto it = std::find_if(snapshots_.begin(), snapshots_.end(),
                         [&](const auto& s) { return s.first == name; });
  if (it != snapshots_.end()) {
    if (!overwrite) throw Error(Errc::DuplicateName, "snapshot '" + name + "' already exists");
    it->second = std::move(document);
    return;
  }
  snapshots_.emplace_back(name, std::move(document));
}

void Session::restore_snapshot(const std::string& name) { restore(snapshot(name)); }

std::vector<std::string> Session::snapshot_names() const {
  std::vector<std::string> names;
  names.reserve(snapshots_.size());
  for (const auto& s : snapshots_) names.push_back(s.first);
  return names;
}

const std::string& Session::snapshot(const std::string& name) const {
  for (const auto& s : snapshots_) {
    if (s.first == name) return s.second;
  }
  throw Error(Errc::UnknownSnapshot, "no snapshot named '" + name + "'");
}

double Session::consistency_residual() const {
  const Projection p = solve_projection(*stats_, params_, solver_cfg_);
  return std::abs(p.objective - fit_.projection.objective);
}

}  // namespace ulca
