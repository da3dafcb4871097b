#include "ulca/json_codec.hpp"

#include "ulca/error.hpp"

namespace ulca::codec {
namespace {

double number(const json& j, const char* what) {
  if (!j.is_number()) throw Error(Errc::InvalidArgument, std::string(what) + " must be a number");
  return j.get<double>();
}

}  // namespace

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
  if (!j.is_array()) throw Error(Errc::InvalidArgument, "expected an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], "vector entry");
  return v;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(vector_to_json(m.row(i).transpose()));
  return out;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array()) throw Error(Errc::InvalidArgument, "expected an array of rows");
  if (j.empty()) return {};
  const auto cols = j[0].is_array() ? j[0].size() : 0;
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Eigen::VectorXd row = vector_from_json(j[i]);
    if (row.size() != m.cols()) throw Error(Errc::InvalidArgument, "ragged matrix rows");
    m.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return m;
}

json columns_to_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index k = 0; k < m.cols(); ++k) out.push_back(vector_to_json(m.col(k)));
  return out;
}

json params_to_json(const UlcaParams& p) {
  return {{"w_tg", vector_to_json(p.w_tg)},
          {"w_bg", vector_to_json(p.w_bg)},
          {"w_bw", vector_to_json(p.w_bw)},
          {"alpha", p.alpha ? json(*p.alpha) : json(nullptr)},
          {"gamma0", p.gamma0},
          {"gamma1", p.gamma1},
          {"dprime", p.dprime}};
}

UlcaParams params_from_json(const json& j, const UlcaParams& base) {
  if (!j.is_object()) throw Error(Errc::InvalidArgument, "params must be an object");
  UlcaParams p = base;
  if (j.contains("w_tg")) p.w_tg = vector_from_json(j["w_tg"]);
  if (j.contains("w_bg")) p.w_bg = vector_from_json(j["w_bg"]);
  if (j.contains("w_bw")) p.w_bw = vector_from_json(j["w_bw"]);
  if (j.contains("alpha")) {
    const auto& a = j["alpha"];
    if (a.is_null() || (a.is_string() && a.get<std::string>() == "auto")) {
      p.alpha.reset();
    } else {
      p.alpha = number(a, "alpha");
    }
  }
  if (j.contains("gamma0")) p.gamma0 = number(j["gamma0"], "gamma0");
  if (j.contains("gamma1")) p.gamma1 = number(j["gamma1"], "gamma1");
  if (j.contains("dprime")) {
    if (!j["dprime"].is_number_integer()) throw Error(Errc::InvalidArgument, "dprime must be an integer");
    p.dprime = j["dprime"].get<int>();
  }
  return p;
}

json solver_to_json(const SolverConfig& cfg) {
  return {{"backend", std::string(backend_name(cfg.backend))},
          {"max_manifold_iters", cfg.max_manifold_iters ? json(*cfg.max_manifold_iters) : json(nullptr)},
          {"convergence_tol", cfg.convergence_tol},
          {"dinkelbach_max_iters", cfg.dinkelbach_max_iters},
          {"dinkelbach_tol", cfg.dinkelbach_tol},
          {"apply_varimax", cfg.apply_varimax}};
}

SolverConfig solver_from_json(const json& j) {
  if (!j.is_object()) throw Error(Errc::InvalidArgument, "solver config must be an object");
  SolverConfig cfg;
  if (j.contains("backend")) {
    const auto b = parse_backend(j["backend"].get<std::string>());
    if (!b) throw Error(Errc::InvalidArgument, "unknown backend");
    cfg.backend = *b;
  }
  if (j.contains("max_manifold_iters") && !j["max_manifold_iters"].is_null()) {
    cfg.max_manifold_iters = j["max_manifold_iters"].get<int>();
  }
  if (j.contains("convergence_tol")) cfg.convergence_tol = number(j["convergence_tol"], "convergence_tol");
  if (j.contains("dinkelbach_max_iters")) cfg.dinkelbach_max_iters = j["dinkelbach_max_iters"].get<int>();
  if (j.contains("dinkelbach_tol")) cfg.dinkelbach_tol = number(j["dinkelbach_tol"], "dinkelbach_tol");
  if (j.contains("apply_varimax")) cfg.apply_varimax = j["apply_varimax"].get<bool>();
  cfg.validate();
  return cfg;
}

json ellipse_to_json(const ConfidenceEllipse& e) {
  return {{"center", {e.center.x(), e.center.y()}},
          {"axes", {{e.axes(0, 0), e.axes(1, 0)}, {e.axes(0, 1), e.axes(1, 1)}}},
          {"area", e.area},
          {"confidence", e.confidence}};
}

}  // namespace ulca::codec
