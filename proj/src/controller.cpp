#include "ulca/controller.hpp"

#include "ulca/csv_io.hpp"
#include "ulca/error.hpp"
#include "ulca/json_codec.hpp"

namespace ulca {
namespace {

using nlohmann::json;
namespace jc = ulca::codec;

const json& payload_of(const json& msg) {
  if (msg.contains("payload") && msg["payload"].is_object()) return msg["payload"];
  return msg;
}

int int_field(const json& p, const char* key) {
  if (!p.contains(key) || !p[key].is_number_integer()) {
    throw Error(Errc::BadMessage, std::string("field '") + key + "' must be an integer");
  }
  return p[key].get<int>();
}

double number_field(const json& p, const char* key) {
  if (!p.contains(key) || !p[key].is_number()) {
    throw Error(Errc::BadMessage, std::string("field '") + key + "' must be a number");
  }
  return p[key].get<double>();
}

std::string string_field(const json& p, const char* key) {
  if (!p.contains(key) || !p[key].is_string()) {
    throw Error(Errc::BadMessage, std::string("field '") + key + "' must be a string");
  }
  return p[key].get<std::string>();
}

bool supersedes(const std::string& type) {
  return type == "gesture_move" || type == "gesture_scale" || type == "cancel";
}

std::optional<double> optional_alpha(const json& p) {
  if (!p.contains("alpha") || p["alpha"].is_null()) return std::nullopt;
  if (p["alpha"].is_string() && p["alpha"] == "auto") return std::nullopt;
  return number_field(p, "alpha");
}

UlcaParams preset_params(const json& p, const Session& s) {
  const std::string name = string_field(p, "name");
  const int c = s.dataset().num_groups();
  const int dprime = p.contains("dprime") ? int_field(p, "dprime") : s.params().dprime;
  const int target = p.contains("target") ? int_field(p, "target") : 0;
  if (name == "lda") return presets::lda(c, dprime);
  if (name == "pca") return presets::pca(c, target, dprime);
  if (name == "ccpca") return presets::ccpca(c, target, optional_alpha(p), dprime);
  if (name == "cpca") {
    std::vector<int> background;
    for (int j = 0; j < c; ++j) {
      if (j != target) background.push_back(j);
    }
    return presets::cpca(c, target, background, optional_alpha(p), dprime);
  }
  throw Error(Errc::BadMessage, "unknown preset '" + name + "'");
}

json cost_json(const BackwardResult& r, bool committed) {
  return {{"cost", r.cost},
          {"cost_unclamped", r.cost_unclamped},
          {"cost_init", r.cost_init},
          {"evaluations", r.iterations},
          {"cancelled", r.cancelled},
          {"committed", committed},
          {"theta", jc::params_to_json(r.params)}};
}

}  // namespace

Controller::Controller(Session session) : session_(std::make_unique<Session>(std::move(session))) {}

bool Controller::has_session() const {
  std::shared_lock lock(state_mutex_);
  return session_ != nullptr;
}

json Controller::make(const std::string& type, json payload, const json& reply_to) {
  return {{"type", type}, {"payload", std::move(payload)}, {"reply_to", reply_to}};
}

std::uint64_t Controller::precheck(const json& msg) {
  std::lock_guard lock(run_mutex_);
  if (msg.is_object() && msg.contains("type") && msg["type"].is_string() &&
      supersedes(msg["type"].get<std::string>())) {
    ++epoch_;
    if (running_cancel_) running_cancel_->store(true);
  }
  return epoch_;
}

json Controller::state_unlocked() const {
  json st;
  st["protocol"] = kProtocolVersion;
  st["busy"] = busy_.load();
  if (!session_) {
    st["dataset"] = nullptr;
    st["upload_required"] = true;
    return st;
  }
  const Session& s = *session_;
  const Dataset& data = s.dataset();
  const Projection& proj = s.fit().projection;
  st["upload_required"] = false;
  st["dataset"] = {{"path", s.dataset_path()},
                   {"hash", hash_hex(s.dataset_hash())},
                   {"n", data.rows()},
                   {"d", data.cols()},
                   {"attribute_names", data.attribute_names},
                   {"group_names", data.group_names}};
  st["points"] = jc::matrix_to_json(s.embedding());
  st["labels"] = data.labels;
  json ellipses = json::array();
  if (s.geometry()) {
    for (const auto& e : s.geometry()->ellipses) ellipses.push_back(jc::ellipse_to_json(e));
    st["distances"] = jc::matrix_to_json(s.geometry()->distances);
  } else {
    st["distances"] = nullptr;
  }
  st["ellipses"] = std::move(ellipses);
  st["loadings"] = {{"attribute_names", data.attribute_names},
                    {"columns", jc::columns_to_json(s.display_projection())}};
  st["params"] = jc::params_to_json(s.params());
  st["params_used"] = jc::params_to_json(s.fit().params_used);
  st["solver"] = jc::solver_to_json(s.solver_config());
  st["projection"] = {{"objective", proj.objective},
                      {"alpha_used", proj.alpha_used},
                      {"backend", std::string(backend_name(proj.backend))},
                      {"iterations", proj.iterations},
                      {"converged", proj.converged},
                      {"ratio_mode", s.fit().ratio_mode}};
  json axes = json::array();
  for (const auto& a : s.drawn_axes()) {
    axes.push_back({{"v", jc::vector_to_json(a.v)}, {"loading", jc::vector_to_json(a.loading)}});
  }
  st["drawn_axes"] = std::move(axes);
  st["snapshots"] = s.snapshot_names();
  st["confidence"] = s.confidence();
  st["cost"] = last_cost_;
  return st;
}

json Controller::state_json() const {
  std::shared_lock lock(state_mutex_);
  return state_unlocked();
}

void Controller::push_state(const std::string& cause, const json& reply_to, bool broadcast,
                            const Sink& sink) const {
  json st = state_json();
  st["cause"] = cause;
  sink(Outgoing{broadcast, make("state", std::move(st), reply_to)});
}

void Controller::handle(const json& msg, std::uint64_t ticket, const Sink& sink) {
  const json reply_to = msg.is_object() && msg.contains("seq") ? msg["seq"] : json(nullptr);
  try {
    if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string()) {
      throw Error(Errc::BadMessage, "message needs a string 'type'");
    }
    const std::string type = msg["type"].get<std::string>();
    const json& p = payload_of(msg);

    if (type == "hello") {
      sink(Outgoing{false, make("hello", {{"protocol", kProtocolVersion}, {"server", "ulca"}},
                                reply_to)});
      push_state(type, reply_to, false, sink);
      return;
    }
    if (type == "list_snapshots" || type == "cancel") {
      push_state(type, reply_to, false, sink);
      return;
    }
    if (type != "set_params" && type != "gesture_move" && type != "gesture_scale" &&
        type != "draw_axis" && type != "save" && type != "restore") {
      throw Error(Errc::BadMessage, "unknown message type '" + type + "'");
    }
    if (!session_) throw Error(Errc::NoDataset, "no dataset loaded");
    Session& s = *session_;

    if (type == "set_params") {
      UlcaParams next = s.params();
      if (p.contains("preset")) next = preset_params(p["preset"], s);
      if (p.contains("params")) next = jc::params_from_json(p["params"], next);
      std::optional<SolverConfig> solver;
      if (p.contains("solver")) solver = jc::solver_from_json(p["solver"]);
      std::optional<double> confidence;
      if (p.contains("confidence")) confidence = number_field(p, "confidence");
      {
        std::unique_lock lock(state_mutex_);
        const UlcaParams prev_params = s.params();
        const SolverConfig prev_solver = s.solver_config();
        try {
          if (solver) s.set_solver_config(*solver);
          s.update_params(next);
          if (confidence) s.set_confidence(*confidence);
        } catch (...) {
          if (solver) s.set_solver_config(prev_solver);
          if (!(s.params() == prev_params)) s.update_params(prev_params);
          throw;
        }
        last_cost_ = nullptr;
      }
      push_state(type, reply_to, true, sink);
    } else if (type == "gesture_move" || type == "gesture_scale") {
      Gesture g;
      g.group = int_field(p, "group");
      if (type == "gesture_move") {
        g.kind = GestureKind::MoveCentroid;
        g.target = Eigen::Vector2d(number_field(p, "x"), number_field(p, "y"));
      } else {
        g.kind = GestureKind::ScaleEllipse;
        g.factor = number_field(p, "factor");
      }
      run_gesture(g, ticket, reply_to, sink);
    } else if (type == "draw_axis") {
      Eigen::VectorXd v(2);
      v << number_field(p, "vx"), number_field(p, "vy");
      {
        std::unique_lock lock(state_mutex_);
        s.draw_axis(v);
      }
      push_state(type, reply_to, true, sink);
    } else if (type == "save") {
      const bool overwrite = p.contains("overwrite") && p["overwrite"].is_boolean() &&
                             p["overwrite"].get<bool>();
      {
        std::unique_lock lock(state_mutex_);
        s.save_snapshot(string_field(p, "name"), overwrite);
      }
      push_state(type, reply_to, true, sink);
    } else if (type == "restore") {
      {
        std::unique_lock lock(state_mutex_);
        s.restore_snapshot(string_field(p, "name"));
        last_cost_ = nullptr;
      }
      push_state(type, reply_to, true, sink);
    }
  } catch (const Error& e) {
    sink(Outgoing{false, make("error",
                              {{"seq", reply_to},
                               {"code", std::string(errc_name(e.code()))},
                               {"message", e.what()}},
                              reply_to)});
  } catch (const nlohmann::json::exception& e) {
    sink(Outgoing{false, make("error", {{"seq", reply_to}, {"code", "BAD_MESSAGE"}, {"message", e.what()}},
                              reply_to)});
  } catch (const std::exception& e) {
    sink(Outgoing{false, make("error", {{"seq", reply_to}, {"code", "INTERNAL"}, {"message", e.what()}},
                              reply_to)});
  }
}

void Controller::run_gesture(const Gesture& gesture, std::uint64_t ticket, const json& reply_to,
                             const Sink& sink) {
  Session& s = *session_;
  const InteractionSpec spec = s.interaction_for(gesture);
  std::atomic<bool> cancel{false};
  {
    std::lock_guard lock(run_mutex_);
    if (ticket != epoch_) throw Error(Errc::Cancelled, "superseded by a later gesture");
    running_cancel_ = &cancel;
  }
  busy_.store(true);
  struct Reset {
    Controller* c;
    ~Reset() {
      std::lock_guard lock(c->run_mutex_);
      c->running_cancel_ = nullptr;
      c->busy_.store(false);
    }
  } reset{this};

  const ProgressFn progress = [&](int evals, double best) {
    if (evals % kProgressEvery == 0) {
      sink(Outgoing{true, make("progress", {{"evaluations", evals}, {"best_cost", best}}, reply_to)});
    }
  };
  const BackwardResult result =
      s.run_backward(spec, BackwardConfig::defaults_for(gesture.kind), &cancel, progress);
  if (result.cancelled) throw Error(Errc::Cancelled, "search cancelled; state unchanged");
  {
    std::unique_lock lock(state_mutex_);
    const auto change = s.commit(result);
    last_cost_ = cost_json(result, change.has_value());
  }
  push_state(gesture.kind == GestureKind::MoveCentroid ? "gesture_move" : "gesture_scale", reply_to,
             true, sink);
}

std::vector<Outgoing> Controller::handle_message(const std::string& raw) {
  std::vector<Outgoing> out;
  const Sink sink = [&](Outgoing o) { out.push_back(std::move(o)); };
  json msg;
  try {
    msg = json::parse(raw);
  } catch (const json::exception& e) {
    sink(Outgoing{false, make("error",
                              {{"seq", nullptr}, {"code", "BAD_MESSAGE"}, {"message", e.what()}},
                              nullptr)});
    return out;
  }
  const auto ticket = precheck(msg);
  handle(msg, ticket, sink);
  return out;
}

void Controller::load_dataset(const std::string& csv, const std::string& label_column,
                              const std::string& source_name, const Sink& sink) {
  Dataset data = csv::parse_dataset(csv, label_column);
  const int c = data.num_groups();
  auto next = std::make_unique<Session>(std::move(data), presets::lda(c), SolverConfig{}, source_name);
  {
    std::unique_lock lock(state_mutex_);
    session_ = std::move(next);
    last_cost_ = nullptr;
  }
  push_state("dataset", nullptr, true, sink);
}

json Controller::snapshot_list_json() const {
  std::shared_lock lock(state_mutex_);
  return {{"snapshots", session_ ? session_->snapshot_names() : std::vector<std::string>{}}};
}

std::vector<std::pair<std::string, std::string>> Controller::snapshots() const {
  std::shared_lock lock(state_mutex_);
  if (!session_) return {};
  return session_->snapshots();
}

int Controller::import_snapshots(const std::vector<std::pair<std::string, std::string>>& items) {
  std::unique_lock lock(state_mutex_);
  if (!session_) return 0;
  const std::string hash = hash_hex(session_->dataset_hash());
  int added = 0;
  for (const auto& [name, doc] : items) {
    try {
      const json parsed = json::parse(doc);
      if (parsed.at("dataset").at("hash").get<std::string>() != hash) continue;
      session_->import_snapshot(name, doc, true);
      ++added;
    } catch (const std::exception&) {
      continue;
    }
  }
  return added;
}

}  // namespace ulca
