#include <doctest.h>
#include <json.hpp>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "ulca/controller.hpp"
#include "ulca/csv_io.hpp"

using namespace ulca;
using nlohmann::json;

namespace {

Controller wine_controller() { return Controller(Session(fixture::wine(), presets::lda(3), {}, "wine.csv")); }

std::vector<Outgoing> send(Controller& c, const json& msg) { return c.handle_message(msg.dump()); }

json only_state(const std::vector<Outgoing>& out) {
  REQUIRE(out.size() == 1);
  REQUIRE(out[0].message["type"] == "state");
  return out[0].message["payload"];
}

Eigen::MatrixXd points_of(const json& state) {
  Eigen::MatrixXd Z(static_cast<Eigen::Index>(state["points"].size()), 2);
  for (std::size_t i = 0; i < state["points"].size(); ++i) {
    Z(static_cast<Eigen::Index>(i), 0) = state["points"][i][0].get<double>();
    Z(static_cast<Eigen::Index>(i), 1) = state["points"][i][1].get<double>();
  }
  return Z;
}

double group_variance(const json& state, int g) {
  const Eigen::MatrixXd Z = points_of(state);
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < state["labels"].size(); ++i) {
    if (state["labels"][i] == g) rows.push_back(static_cast<Eigen::Index>(i));
  }
  Eigen::MatrixXd P(static_cast<Eigen::Index>(rows.size()), 2);
  for (std::size_t k = 0; k < rows.size(); ++k) P.row(static_cast<Eigen::Index>(k)) = Z.row(rows[k]);
  return oracle::naive_covariance(P).trace();
}

std::string error_code(const std::vector<Outgoing>& out) {
  REQUIRE(out.size() == 1);
  REQUIRE(out[0].message["type"] == "error");
  return out[0].message["payload"]["code"].get<std::string>();
}

}  // namespace

TEST_CASE("hello answers with the protocol and a state") {
  auto c = wine_controller();
  const auto out = send(c, {{"type", "hello"}, {"seq", 1}});
  REQUIRE(out.size() == 2);
  CHECK(out[0].message["type"] == "hello");
  CHECK(out[0].message["payload"]["protocol"] == kProtocolVersion);
  CHECK(out[1].message["type"] == "state");
  CHECK_FALSE(out[1].broadcast);
  CHECK(out[1].message["reply_to"] == 1);
}

TEST_CASE("state payload carries the display data") {
  auto c = wine_controller();
  const json st = c.state_json();
  CHECK(st["points"].size() == 178);
  CHECK(st["labels"].size() == 178);
  CHECK(st["ellipses"].size() == 3);
  CHECK(st["distances"].size() == 3);
  CHECK(st["loadings"]["columns"].size() == 2);
  CHECK(st["loadings"]["columns"][0].size() == 13);
  CHECK(st["loadings"]["attribute_names"][6] == "flavanoids");
  CHECK(st["params"]["alpha"].is_null());
  CHECK(st["projection"]["ratio_mode"] == true);
  CHECK(st["upload_required"] == false);
  CHECK(st["cost"].is_null());
}

TEST_CASE("unchanged set_params pushes one state with the same points") {
  auto c = wine_controller();
  const Eigen::MatrixXd before = points_of(c.state_json());
  const auto out = send(c, {{"type", "set_params"}, {"seq", 4}, {"payload", {{"params", c.state_json()["params"]}}}});
  const json st = only_state(out);
  CHECK(out[0].broadcast);
  CHECK(out[0].message["reply_to"] == 4);
  CHECK((points_of(st) - before).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("presets and parameter errors") {
  auto c = wine_controller();
  const auto out = send(c, {{"type", "set_params"},
                            {"seq", 2},
                            {"payload", {{"preset", {{"name", "cpca"}, {"target", 1}, {"alpha", 2.0}}}}}});
  const json st = only_state(out);
  CHECK(st["params"]["alpha"] == 2.0);
  CHECK(st["params"]["w_bg"] == json::array({1.0, 0.0, 1.0}));

  const auto bad = send(c, {{"type", "set_params"}, {"seq", 3}, {"payload", {{"params", {{"dprime", 40}}}}}});
  CHECK(error_code(bad) == "DIMENSION_MISMATCH");
  CHECK(bad[0].message["payload"]["seq"] == 3);
  CHECK(c.state_json()["params"]["alpha"] == 2.0);

  CHECK(error_code(send(c, {{"type", "set_params"}, {"payload", {{"preset", {{"name", "ica"}}}}}})) ==
        "BAD_MESSAGE");
}

TEST_CASE("malformed input is a bad message") {
  auto c = wine_controller();
  CHECK(error_code(c.handle_message("{nope")) == "BAD_MESSAGE");
  CHECK(error_code(send(c, {{"seq", 9}})) == "BAD_MESSAGE");
  CHECK(error_code(send(c, {{"type", "explode"}, {"seq", 9}})) == "BAD_MESSAGE");
  CHECK(error_code(send(c, {{"type", "gesture_move"}, {"payload", {{"group", 0}}}})) == "BAD_MESSAGE");
  CHECK(error_code(send(c, {{"type", "gesture_scale"}, {"payload", {{"group", 7}, {"factor", 2}}}})) ==
        "INVALID_ARGUMENT");
}

TEST_CASE("unit scale gesture reports zero cost") {
  auto c = wine_controller();
  const auto out = send(c, {{"type", "gesture_scale"}, {"seq", 5}, {"payload", {{"group", 1}, {"factor", 1.0}}}});
  const json& st = out.back().message["payload"];
  REQUIRE(out.back().message["type"] == "state");
  CHECK(st["cost"]["cost"] == 0.0);
  CHECK(st["cost"]["committed"] == false);
}

TEST_CASE("superseded gesture is cancelled") {
  auto c = wine_controller();
  const json gesture = {{"type", "gesture_scale"}, {"seq", 6}, {"payload", {{"group", 0}, {"factor", 1.5}}}};
  const auto ticket = c.precheck(gesture);
  (void)c.precheck(json{{"type", "cancel"}});
  std::vector<Outgoing> out;
  c.handle(gesture, ticket, [&](Outgoing o) { out.push_back(std::move(o)); });
  CHECK(error_code(out) == "CANCELLED");
  CHECK(c.state_json()["cost"].is_null());
}

TEST_CASE("draw, save and restore") {
  auto c = wine_controller();
  const json drawn = only_state(send(c, {{"type", "draw_axis"}, {"payload", {{"vx", 1.0}, {"vy", 0.0}}}}));
  REQUIRE(drawn["drawn_axes"].size() == 1);
  CHECK(drawn["drawn_axes"][0]["loading"] == drawn["loadings"]["columns"][0]);

  only_state(send(c, {{"type", "save"}, {"payload", {{"name", "first"}}}}));
  CHECK(error_code(send(c, {{"type", "save"}, {"payload", {{"name", "first"}}}})) == "DUPLICATE_NAME");
  only_state(send(c, {{"type", "set_params"}, {"payload", {{"preset", {{"name", "pca"}, {"target", 2}}}}}}));
  const json restored = only_state(send(c, {{"type", "restore"}, {"payload", {{"name", "first"}}}}));
  CHECK(restored["params"] == c.state_json()["params"]);
  CHECK(restored["params"]["w_bw"] == json::array({1.0, 1.0, 1.0}));
  CHECK(error_code(send(c, {{"type", "restore"}, {"payload", {{"name", "zzz"}}}})) == "UNKNOWN_SNAPSHOT");
  const json listed = only_state(send(c, {{"type", "list_snapshots"}}));
  CHECK(listed["snapshots"] == json::array({"first"}));
  CHECK_FALSE(send(c, {{"type", "list_snapshots"}})[0].broadcast);
}

TEST_CASE("controller without data asks for an upload") {
  Controller c;
  const json st = c.state_json();
  CHECK(st["upload_required"] == true);
  CHECK(st["dataset"].is_null());
  CHECK(error_code(send(c, {{"type", "draw_axis"}, {"payload", {{"vx", 1}, {"vy", 0}}}})) == "NO_DATASET");
  std::vector<Outgoing> out;
  c.load_dataset(ulca::csv::read_file(ULCA_DATA_DIR "/wine.csv"), "label", "upload.csv",
                 [&](Outgoing o) { out.push_back(std::move(o)); });
  const json st2 = only_state(out);
  CHECK(st2["dataset"]["n"] == 178);
  CHECK(st2["cause"] == "dataset");
}

TEST_CASE("Wine walkthrough replay") {
  auto c = wine_controller();
  json st = c.state_json();
  const double l12 = st["distances"][1][2].get<double>();
  const auto& e1 = st["ellipses"][1]["center"];
  const auto& e2 = st["ellipses"][2]["center"];
  const double x = e1[0].get<double>() + 0.1 * (e2[0].get<double>() - e1[0].get<double>());
  const double y = e1[1].get<double>() + 0.1 * (e2[1].get<double>() - e1[1].get<double>());
  const auto moved = send(c, {{"type", "gesture_move"}, {"seq", 10}, {"payload", {{"group", 2}, {"x", x}, {"y", y}}}});
  REQUIRE(moved.back().message["type"] == "state");
  st = moved.back().message["payload"];
  CHECK(st["distances"][1][2].get<double>() < l12);
  CHECK(st["cost"]["committed"] == true);

  const json boost = {{"w_tg", {0.0, 0.0, 1.0}}, {"w_bg", {1.0, 1.0, 0.0}}};
  st = only_state(send(c, {{"type", "set_params"}, {"seq", 11}, {"payload", {{"params", boost}}}}));
  const double v2 = group_variance(st, 2);
  CHECK(v2 > group_variance(st, 0));
  CHECK(v2 > group_variance(st, 1));
}
