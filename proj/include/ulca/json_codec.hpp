#pragma once

#include <json.hpp>

#include <Eigen/Dense>

#include "ulca/geometry.hpp"
#include "ulca/solvers.hpp"
#include "ulca/ulca_model.hpp"

namespace ulca::codec {

using nlohmann::json;

json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const json& j);

/// Row-major nested arrays.
json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const json& j);

/// Column-major: one array per column.
json columns_to_json(const Eigen::MatrixXd& m);

json params_to_json(const UlcaParams& p);
/// Fields missing from `j` keep their value in `base`. Throws Error(InvalidArgument).
UlcaParams params_from_json(const json& j, const UlcaParams& base);

json solver_to_json(const SolverConfig& cfg);
SolverConfig solver_from_json(const json& j);

json ellipse_to_json(const ConfidenceEllipse& e);

}  // namespace ulca::codec
