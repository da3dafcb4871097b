#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ulca/controller.hpp"

namespace ulca {

struct ServerConfig {
  std::string host = "127.0.0.1";
  unsigned short port = 8080;  // 0 picks a free port
  std::optional<std::filesystem::path> data_path;
  std::string label_column = "label";
  std::optional<std::filesystem::path> snapshot_dir;
  std::filesystem::path static_dir = "web";
  bool handle_signals = true;
  /// Queued outgoing messages per WebSocket client before it is dropped.
  std::size_t max_backlog = 256;
  std::size_t max_upload_bytes = 64u << 20;
};

/// HTTP + WebSocket front end for one session.
///   GET  /               UI entry page (static_dir/index.html or a placeholder)
///   GET  /api/state      current state payload
///   POST /api/dataset    CSV body, label column from ?label_col=
///   GET  /api/snapshots  snapshot names in insertion order
///   POST /api/snapshots  {"name", "action": "save"|"restore", "overwrite"}
///   GET  /ws             WebSocket, protocol version kProtocolVersion
class Server {
 public:
  /// Loads the dataset and stored snapshots, then binds. Throws Error(BadData)
  /// for unreadable data and Error(PortInUse) when the port is taken.
  explicit Server(ServerConfig cfg);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  unsigned short port() const;
  /// Serves until stop() or SIGINT/SIGTERM, then flushes snapshots.
  void run();
  /// Safe from any thread.
  void stop();

  Controller& controller();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

using SnapshotList = std::vector<std::pair<std::string, std::string>>;

/// Snapshots live in one ordered file, dir/snapshots.json.
void write_snapshot_file(const std::filesystem::path& dir, const SnapshotList& snapshots);
SnapshotList read_snapshot_file(const std::filesystem::path& dir);

}  // namespace ulca
