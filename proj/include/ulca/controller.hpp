#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ulca/session.hpp"

namespace ulca {

inline constexpr int kProtocolVersion = 1;
/// Backward-selection progress is pushed every this many evaluations.
inline constexpr int kProgressEvery = 5;

/// One server-to-client message. The transport stamps the per-connection seq.
struct Outgoing {
  bool broadcast = false;  // false: only the client that sent the request
  nlohmann::json message;  // {type, payload, reply_to}
};

using Sink = std::function<void(Outgoing)>;

/// Protocol logic behind the WebSocket and HTTP endpoints, independent of the
/// transport. handle() mutates the session and must be called from a single
/// thread; precheck() and the state readers may be called from any thread.
class Controller {
 public:
  Controller() = default;
  explicit Controller(Session session);

  bool has_session() const;

  /// Cheap inspection on the receiving thread. Gestures and `cancel` raise the
  /// cancellation flag of any running search. Returns the ticket to pass to handle().
  std::uint64_t precheck(const nlohmann::json& msg);

  /// Executes one client message, emitting replies and pushes through `sink`.
  void handle(const nlohmann::json& msg, std::uint64_t ticket, const Sink& sink);

  /// Parse, precheck and handle in one call; malformed input yields BAD_MESSAGE.
  std::vector<Outgoing> handle_message(const std::string& raw);

  /// Full state payload as pushed in `state` messages.
  nlohmann::json state_json() const;
  bool busy() const { return busy_.load(); }

  /// Replaces the session with one built from CSV text (LDA preset). Snapshots
  /// of the previous dataset are dropped.
  void load_dataset(const std::string& csv, const std::string& label_column,
                    const std::string& source_name, const Sink& sink);

  nlohmann::json snapshot_list_json() const;
  std::vector<std::pair<std::string, std::string>> snapshots() const;
  /// Adds stored snapshots; ones taken on other data are skipped. Returns the number added.
  int import_snapshots(const std::vector<std::pair<std::string, std::string>>& items);

 private:
  static nlohmann::json make(const std::string& type, nlohmann::json payload,
                             const nlohmann::json& reply_to);
  nlohmann::json state_unlocked() const;
  void push_state(const std::string& cause, const nlohmann::json& reply_to, bool broadcast,
                  const Sink& sink) const;
  void run_gesture(const Gesture& gesture, std::uint64_t ticket, const nlohmann::json& reply_to,
                   const Sink& sink);

  std::unique_ptr<Session> session_;
  mutable std::shared_mutex state_mutex_;  // exclusive only while committing

  std::mutex run_mutex_;
  std::uint64_t epoch_ = 0;
  std::atomic<bool>* running_cancel_ = nullptr;
  std::atomic<bool> busy_{false};

  nlohmann::json last_cost_;  // null until a gesture finishes
};

}  // namespace ulca
