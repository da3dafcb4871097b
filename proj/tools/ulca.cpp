// Command-line entry points: fit, eval-backward, serve.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ulca/backward_select.hpp"
#include "ulca/csv_io.hpp"
#include "ulca/error.hpp"
#include "ulca/json_codec.hpp"
#include "ulca/server.hpp"
#include "ulca/ulca_model.hpp"

namespace {

using nlohmann::json;

enum Exit { kOk = 0, kBadFlags = 2, kBadData = 3, kNotConverged = 4, kPortBusy = 5 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int exit_code_for(const ulca::Error& e) {
  switch (e.code()) {
    case ulca::Errc::BadData:
    case ulca::Errc::EmptyGroup:
    case ulca::Errc::NonFiniteInput:
    case ulca::Errc::NoDataset:
      return kBadData;
    case ulca::Errc::PortInUse:
      return kPortBusy;
    case ulca::Errc::InvalidArgument:
    case ulca::Errc::DimensionMismatch:
      return kBadFlags;
    default:
      return 1;
  }
}

struct FitArgs {
  std::string data;
  std::string label_col = "label";
  int dims = 2;
  std::vector<double> w_tg, w_bg, w_bw;
  std::string alpha = "auto";
  double gamma0 = 0.0;
  double gamma1 = 0.0;
  std::string backend = "evd";
  bool standardize = false;
  std::string preset;
  std::string target;
  std::string out_proj;
  std::string out_embedding;
  bool strict = false;
  bool no_varimax = false;
};

int resolve_group(const ulca::Dataset& data, const std::string& ref) {
  if (ref.empty()) return 0;
  for (int j = 0; j < data.num_groups(); ++j) {
    if (data.group_names[static_cast<std::size_t>(j)] == ref) return j;
  }
  try {
    std::size_t used = 0;
    const int idx = std::stoi(ref, &used);
    if (used == ref.size() && idx >= 0 && idx < data.num_groups()) return idx;
  } catch (const std::exception&) {
  }
  throw UsageError("--target '" + ref + "' is neither a group name nor a group index");
}

std::optional<double> parse_alpha(const std::string& text) {
  if (text == "auto") return std::nullopt;
  try {
    std::size_t used = 0;
    const double a = std::stod(text, &used);
    if (used == text.size()) return a;
  } catch (const std::exception&) {
  }
  throw UsageError("--alpha must be 'auto' or a number");
}

Eigen::VectorXd weights_or_zero(const std::vector<double>& w, int c, const char* flag) {
  if (w.empty()) return Eigen::VectorXd::Zero(c);
  if (static_cast<int>(w.size()) != c) {
    throw UsageError(std::string(flag) + " needs " + std::to_string(c) + " values, got " +
                     std::to_string(w.size()));
  }
  return Eigen::Map<const Eigen::VectorXd>(w.data(), c);
}

ulca::UlcaParams build_params(const FitArgs& a, const ulca::Dataset& data) {
  const int c = data.num_groups();
  const auto alpha = parse_alpha(a.alpha);
  const bool any_weights = !a.w_tg.empty() || !a.w_bg.empty() || !a.w_bw.empty();
  if (!a.preset.empty() && any_weights) {
    throw UsageError("--preset cannot be combined with explicit weight flags");
  }
  ulca::UlcaParams p;
  if (!a.preset.empty()) {
    const int target = resolve_group(data, a.target);
    if (a.preset == "lda") {
      p = ulca::presets::lda(c, a.dims);
    } else if (a.preset == "pca") {
      p = ulca::presets::pca(c, target, a.dims);
    } else if (a.preset == "cpca") {
      std::vector<int> background;
      for (int j = 0; j < c; ++j) {
        if (j != target) background.push_back(j);
      }
      p = ulca::presets::cpca(c, target, background, alpha, a.dims);
    } else if (a.preset == "ccpca") {
      p = ulca::presets::ccpca(c, target, alpha, a.dims);
    } else {
      throw UsageError("unknown preset '" + a.preset + "'");
    }
    if (a.preset == "lda" || a.preset == "pca") p.alpha = alpha;
  } else if (!any_weights) {
    p = ulca::presets::lda(c, a.dims);
    p.alpha = alpha;
  } else {
    p.w_tg = weights_or_zero(a.w_tg, c, "--w-tg");
    p.w_bg = weights_or_zero(a.w_bg, c, "--w-bg");
    p.w_bw = weights_or_zero(a.w_bw, c, "--w-bw");
    p.alpha = alpha;
    p.dprime = a.dims;
  }
  p.gamma0 = a.gamma0;
  p.gamma1 = a.gamma1;
  return p;
}

void write_csv(const std::string& path, const Eigen::MatrixXd& values,
               const std::vector<std::string>& columns, const std::vector<std::string>& rows = {}) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ulca::Error(ulca::Errc::BadData, "cannot write " + path);
  ulca::csv::write_matrix(out, values, columns, rows);
}

int cmd_fit(const FitArgs& a) {
  ulca::Dataset data;
  try {
    data = ulca::csv::read_dataset(a.data, a.label_col);
    if (a.standardize) data = ulca::standardize(data);
  } catch (const ulca::Error& e) {
    throw ulca::Error(ulca::Errc::BadData, e.what());
  }

  ulca::SolverConfig cfg;
  const auto backend = ulca::parse_backend(a.backend);
  if (!backend) throw UsageError("--backend must be evd or manifold");
  cfg.backend = *backend;
  cfg.apply_varimax = !a.no_varimax;

  const ulca::UlcaParams params = build_params(a, data);
  params.validate(data.num_groups(), data.cols());
  const ulca::UlcaFit f = ulca::fit(data, params, cfg);
  const ulca::Projection& proj = f.projection;

  std::vector<std::string> axes;
  for (int k = 0; k < params.dprime; ++k) axes.push_back("axis" + std::to_string(k + 1));
  if (!a.out_proj.empty()) write_csv(a.out_proj, proj.M, axes, data.attribute_names);
  if (!a.out_embedding.empty()) write_csv(a.out_embedding, f.embedding, axes);

  const json report = {{"objective", proj.objective},
                       {"alpha_used", proj.alpha_used},
                       {"iterations", proj.iterations},
                       {"converged", proj.converged},
                       {"backend", std::string(ulca::backend_name(proj.backend))},
                       {"ratio_mode", f.ratio_mode},
                       {"n", data.rows()},
                       {"d", data.cols()},
                       {"groups", data.group_names},
                       {"params", ulca::codec::params_to_json(f.params_used)}};
  std::cout << report.dump(2) << '\n';
  if (!proj.converged) {
    std::cerr << "warning: solver stopped at its iteration cap before converging\n";
    if (a.strict) return kNotConverged;
  }
  return kOk;
}

struct EvalArgs {
  int n = 1000;
  int d = 10;
  int c = 2;
  std::vector<int> m{20, 40};
  int trials = 50;
  std::uint64_t seed = 7;
  int m_opt = 1000;
  std::string out;
};

int cmd_eval(const EvalArgs& a) {
  if (a.n < 2 * a.c || a.d < 2 || a.c < 2 || a.trials < 0 || a.m_opt < 1) {
    throw UsageError("need n >= 2c, d >= 2, c >= 2, trials >= 0, m-opt >= 1");
  }
  for (int m : a.m) {
    if (m < 1) throw UsageError("--m values must be positive");
  }
  const ulca::EvalReport r =
      ulca::evaluate_backward({a.n, a.d, a.c}, a.m, a.trials, a.seed, a.m_opt);
  json settings = json::array();
  for (const auto& s : r.settings) {
    settings.push_back({{"m", s.m},
                        {"mean_seconds", s.mean_seconds},
                        {"mean_accuracy", s.mean_accuracy},
                        {"cases_used", s.cases_used},
                        {"cases_discarded", s.cases_discarded}});
  }
  const json report = {{"n", r.mixture.n}, {"d", r.mixture.d}, {"c", r.mixture.c},
                       {"trials", r.trials}, {"m_opt", r.m_opt}, {"seed", r.seed},
                       {"settings", std::move(settings)}};
  if (a.out.empty()) {
    std::cout << report.dump(2) << '\n';
  } else {
    std::ofstream out(a.out, std::ios::binary | std::ios::trunc);
    if (!out) throw ulca::Error(ulca::Errc::BadData, "cannot write " + a.out);
    out << report.dump(2) << '\n';
  }
  return kOk;
}

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string data;
  std::string label_col = "label";
  std::string snapshot_dir;
  std::string static_dir = "web";
};

int cmd_serve(const ServeArgs& a) {
  if (a.port < 0 || a.port > 65535) throw UsageError("--port out of range");
  ulca::ServerConfig cfg;
  cfg.host = a.host;
  cfg.port = static_cast<unsigned short>(a.port);
  if (!a.data.empty()) cfg.data_path = a.data;
  cfg.label_column = a.label_col;
  if (!a.snapshot_dir.empty()) cfg.snapshot_dir = a.snapshot_dir;
  cfg.static_dir = a.static_dir;
  ulca::Server server(cfg);
  std::cerr << "listening on http://" << a.host << ':' << server.port() << '\n';
  server.run();
  std::cerr << "stopped\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unified linear comparative analysis"};
  app.require_subcommand(1);

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a projection to a labeled CSV");
  fit_cmd->add_option("--data", fit.data, "Input CSV")->required();
  fit_cmd->add_option("--label-col", fit.label_col, "Group label column")->capture_default_str();
  fit_cmd->add_option("--dims", fit.dims, "Embedding dimension")->capture_default_str();
  fit_cmd->add_option("--w-tg", fit.w_tg, "Target weights, one per group")->delimiter(',');
  fit_cmd->add_option("--w-bg", fit.w_bg, "Background weights, one per group")->delimiter(',');
  fit_cmd->add_option("--w-bw", fit.w_bw, "Between-group weights, one per group")->delimiter(',');
  fit_cmd->add_option("--alpha", fit.alpha, "'auto' (trace ratio) or a number")->capture_default_str();
  fit_cmd->add_option("--gamma0", fit.gamma0, "Regularizer added to C0")->capture_default_str();
  fit_cmd->add_option("--gamma1", fit.gamma1, "Regularizer added to C1")->capture_default_str();
  fit_cmd->add_option("--backend", fit.backend, "evd or manifold")
      ->check(CLI::IsMember({"evd", "manifold"}))
      ->capture_default_str();
  fit_cmd->add_flag("--standardize", fit.standardize, "Z-score attributes first");
  fit_cmd->add_option("--preset", fit.preset, "pca, lda, cpca or ccpca")
      ->check(CLI::IsMember({"pca", "lda", "cpca", "ccpca"}));
  fit_cmd->add_option("--target", fit.target, "Target group name or index for pca/cpca/ccpca");
  fit_cmd->add_option("--out-proj", fit.out_proj, "Write M (attributes x axes) as CSV");
  fit_cmd->add_option("--out-embedding", fit.out_embedding, "Write Z = XM as CSV");
  fit_cmd->add_flag("--strict", fit.strict, "Exit 4 when the solver did not converge");
  fit_cmd->add_flag("--no-varimax", fit.no_varimax, "Skip the varimax rotation");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval-backward", "Mimicked-gesture evaluation of backward selection");
  eval_cmd->add_option("--n", ev.n, "Rows")->capture_default_str();
  eval_cmd->add_option("--d", ev.d, "Attributes")->capture_default_str();
  eval_cmd->add_option("--c", ev.c, "Groups")->capture_default_str();
  eval_cmd->add_option("--m", ev.m, "Evaluation budgets, comma separated")->delimiter(',');
  eval_cmd->add_option("--trials", ev.trials, "Gestures per budget")->capture_default_str();
  eval_cmd->add_option("--seed", ev.seed, "RNG seed")->capture_default_str();
  eval_cmd->add_option("--m-opt", ev.m_opt, "Budget defining the reference optimum")->capture_default_str();
  eval_cmd->add_option("--out", ev.out, "Report path (stdout when absent)");

  ServeArgs sv;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP/WebSocket server");
  serve_cmd->add_option("--host", sv.host, "Bind address")->capture_default_str();
  serve_cmd->add_option("--port", sv.port, "TCP port")->capture_default_str();
  serve_cmd->add_option("--data", sv.data, "CSV loaded at startup");
  serve_cmd->add_option("--label-col", sv.label_col, "Group label column")->capture_default_str();
  serve_cmd->add_option("--snapshot-dir", sv.snapshot_dir, "Where snapshots are loaded from and flushed to");
  serve_cmd->add_option("--static-dir", sv.static_dir, "UI assets")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kBadFlags;
  }

  try {
    if (*fit_cmd) return cmd_fit(fit);
    if (*eval_cmd) return cmd_eval(ev);
    if (*serve_cmd) return cmd_serve(sv);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadFlags;
  } catch (const ulca::Error& e) {
    std::cerr << "error [" << ulca::errc_name(e.code()) << "]: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kOk;
}
