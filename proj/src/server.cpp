#include "ulca/server.hpp"

#include <condition_variable>
#include <csignal>
#include <deque>
#include <fstream>
#include <functional>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "ulca/csv_io.hpp"
#include "ulca/error.hpp"

namespace ulca {
namespace {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using nlohmann::json;

constexpr const char* kPlaceholderPage = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>ULCA</title></head>
<body>
<h1>ULCA server</h1>
<p>The browser interface is not installed. The API is live:</p>
<ul>
<li><a href="/api/state">GET /api/state</a></li>
<li><a href="/api/snapshots">GET /api/snapshots</a></li>
<li>POST /api/dataset?label_col=NAME (CSV body)</li>
<li>WebSocket at /ws</li>
</ul>
</body></html>
)";

/// Runs jobs one at a time, in submission order.
class Worker {
 public:
  Worker() : thread_([this] { loop(); }) {}
  ~Worker() { stop(); }

  void post(std::function<void()> job) {
    {
      std::lock_guard lock(mutex_);
      if (stopping_) return;
      jobs_.push_back(std::move(job));
    }
    cv_.notify_one();
  }

  /// Finishes the running job, drops the rest.
  void stop() {
    {
      std::lock_guard lock(mutex_);
      stopping_ = true;
      jobs_.clear();
    }
    cv_.notify_one();
    if (thread_.joinable()) thread_.join();
  }

 private:
  void loop() {
    for (;;) {
      std::function<void()> job;
      {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return stopping_ || !jobs_.empty(); });
        if (stopping_) return;
        job = std::move(jobs_.front());
        jobs_.pop_front();
      }
      job();
    }
  }

  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> jobs_;
  bool stopping_ = false;
  std::thread thread_;
};

class WsSession;

/// Connected WebSocket clients. Touched only on the I/O thread.
struct Hub {
  std::set<std::shared_ptr<WsSession>> clients;
  void broadcast(const json& msg);
};

struct Shared {
  net::io_context& ioc;
  Controller& controller;
  Worker& worker;
  Hub& hub;
  const ServerConfig& cfg;

  /// Sink for worker-side output; delivery happens on the I/O thread in post order.
  Sink sink_for(std::weak_ptr<WsSession> origin, std::function<void(Outgoing)> direct = {});
};

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket&& socket, Shared& shared) : ws_(std::move(socket)), shared_(shared) {}

  void run(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->shared_.hub.clients.insert(self);
      self->do_read();
    });
  }

  void send(json msg) {
    if (closed_) return;
    msg["seq"] = ++seq_;
    if (queue_.size() >= shared_.cfg.max_backlog) {
      drop();
      return;
    }
    queue_.push_back(msg.dump());
    if (queue_.size() == 1) do_write();
  }

 private:
  void do_read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->closed_ = true;
        self->shared_.hub.clients.erase(self);
        return;
      }
      self->on_message(beast::buffers_to_string(self->buffer_.data()));
      self->buffer_.consume(self->buffer_.size());
      self->do_read();
    });
  }

  void on_message(const std::string& raw) {
    json msg;
    try {
      msg = json::parse(raw);
    } catch (const json::exception& e) {
      send({{"type", "error"},
            {"payload", {{"seq", nullptr}, {"code", "BAD_MESSAGE"}, {"message", e.what()}}},
            {"reply_to", nullptr}});
      return;
    }
    const auto ticket = shared_.controller.precheck(msg);
    Sink sink = shared_.sink_for(weak_from_this());
    Controller& controller = shared_.controller;
    shared_.worker.post([&controller, msg = std::move(msg), ticket, sink = std::move(sink)] {
      controller.handle(msg, ticket, sink);
    });
  }

  void do_write() {
    ws_.text(true);
    ws_.async_write(net::buffer(queue_.front()),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      if (ec) {
                        self->closed_ = true;
                        self->shared_.hub.clients.erase(self);
                        return;
                      }
                      self->queue_.pop_front();
                      if (!self->queue_.empty()) self->do_write();
                    });
  }

  void drop() {
    closed_ = true;
    queue_.clear();
    shared_.hub.clients.erase(shared_from_this());
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().shutdown(tcp::socket::shutdown_both, ec);
  }

  websocket::stream<beast::tcp_stream> ws_;
  Shared& shared_;
  beast::flat_buffer buffer_;
  std::deque<std::string> queue_;
  std::uint64_t seq_ = 0;
  bool closed_ = false;
};

void Hub::broadcast(const json& msg) {
  const auto snapshot = clients;  // send() may drop a client
  for (const auto& c : snapshot) c->send(msg);
}

Sink Shared::sink_for(std::weak_ptr<WsSession> origin, std::function<void(Outgoing)> direct) {
  Hub* hub = &this->hub;
  net::io_context* io = &ioc;
  return [hub, io, origin, direct](Outgoing out) {
    if (!out.broadcast && direct) {
      direct(std::move(out));
      return;
    }
    net::post(*io, [hub, origin, out = std::move(out)] {
      if (out.broadcast) {
        hub->broadcast(out.message);
      } else if (auto c = origin.lock()) {
        c->send(out.message);
      }
    });
  };
}

std::string_view mime_type(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".html") return "text/html; charset=utf-8";
  if (ext == ".js" || ext == ".mjs") return "text/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  return "application/octet-stream";
}

std::string query_param(std::string_view target, std::string_view key) {
  const auto q = target.find('?');
  if (q == std::string_view::npos) return {};
  std::string_view rest = target.substr(q + 1);
  while (!rest.empty()) {
    const auto amp = rest.find('&');
    const std::string_view pair = rest.substr(0, amp);
    const auto eq = pair.find('=');
    if (pair.substr(0, eq) == key && eq != std::string_view::npos) {
      std::string value;
      const std::string_view raw = pair.substr(eq + 1);
      for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] == '+') {
          value += ' ';
        } else if (raw[i] == '%' && i + 2 < raw.size()) {
          value += static_cast<char>(std::stoi(std::string(raw.substr(i + 1, 2)), nullptr, 16));
          i += 2;
        } else {
          value += raw[i];
        }
      }
      return value;
    }
    if (amp == std::string_view::npos) break;
    rest.remove_prefix(amp + 1);
  }
  return {};
}

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket&& socket, Shared& shared) : stream_(std::move(socket)), shared_(shared) {}

  void run() { do_read(); }

 private:
  using Response = http::response<http::string_body>;

  void do_read() {
    parser_.emplace();
    parser_->body_limit(shared_.cfg.max_upload_bytes);
    stream_.expires_after(std::chrono::seconds(60));
    http::async_read(stream_, buffer_, *parser_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) {
                       if (ec) return;
                       self->on_request(self->parser_->release());
                     });
  }

  void on_request(http::request<http::string_body> req) {
    const std::string target(req.target());
    const std::string path = target.substr(0, target.find('?'));
    if (websocket::is_upgrade(req)) {
      if (path == "/ws") {
        stream_.expires_never();
        std::make_shared<WsSession>(stream_.release_socket(), shared_)->run(std::move(req));
      }
      return;
    }
    version_ = req.version();
    keep_alive_ = req.keep_alive();

    if (req.method() == http::verb::get && path == "/api/state") {
      respond(http::status::ok, shared_.controller.state_json().dump(), "application/json");
    } else if (req.method() == http::verb::get && path == "/api/snapshots") {
      respond(http::status::ok, shared_.controller.snapshot_list_json().dump(), "application/json");
    } else if (req.method() == http::verb::post && path == "/api/dataset") {
      std::string label = query_param(target, "label_col");
      if (label.empty()) label = shared_.cfg.label_column;
      post_dataset(std::move(req.body()), std::move(label));
    } else if (req.method() == http::verb::post && path == "/api/snapshots") {
      post_snapshot(req.body());
    } else if (req.method() == http::verb::get) {
      serve_static(path);
    } else {
      respond_error(http::status::method_not_allowed, "BAD_MESSAGE", "unsupported method");
    }
  }

  void post_dataset(std::string body, std::string label) {
    auto self = shared_from_this();
    Sink broadcast = shared_.sink_for({}, [](Outgoing) {});
    shared_.worker.post([self, body = std::move(body), label = std::move(label), broadcast] {
      http::status status = http::status::ok;
      json reply;
      try {
        self->shared_.controller.load_dataset(body, label, "upload", broadcast);
        reply = self->shared_.controller.state_json();
      } catch (const Error& e) {
        status = http::status::bad_request;
        reply = {{"code", std::string(errc_name(e.code()))}, {"message", e.what()}};
      }
      net::post(self->shared_.ioc, [self, status, text = reply.dump()] {
        self->respond(status, text, "application/json");
      });
    });
  }

  void post_snapshot(const std::string& body) {
    json req;
    try {
      req = json::parse(body);
      if (!req.is_object()) throw Error(Errc::BadMessage, "body must be a JSON object");
    } catch (const std::exception& e) {
      respond_error(http::status::bad_request, "BAD_MESSAGE", e.what());
      return;
    }
    const std::string action = req.value("action", std::string("save"));
    if (action != "save" && action != "restore") {
      respond_error(http::status::bad_request, "BAD_MESSAGE", "action must be save or restore");
      return;
    }
    json msg = {{"type", action}, {"payload", req}, {"seq", nullptr}};
    auto self = shared_from_this();
    auto failure = std::make_shared<json>();
    Sink sink = shared_.sink_for({}, [failure](Outgoing out) {
      if (out.message.value("type", "") == "error") *failure = out.message["payload"];
    });
    const auto ticket = shared_.controller.precheck(msg);
    shared_.worker.post([self, msg = std::move(msg), ticket, sink, failure] {
      self->shared_.controller.handle(msg, ticket, sink);
      const bool ok = failure->is_null();
      const std::string code = ok ? "" : failure->value("code", "");
      const http::status status = ok ? http::status::ok
                                  : code == "UNKNOWN_SNAPSHOT" ? http::status::not_found
                                  : code == "DUPLICATE_NAME"   ? http::status::conflict
                                                               : http::status::bad_request;
      const std::string text = ok ? self->shared_.controller.snapshot_list_json().dump() : failure->dump();
      net::post(self->shared_.ioc, [self, status, text] { self->respond(status, text, "application/json"); });
    });
  }

  void serve_static(const std::string& path) {
    const std::string rel = path == "/" ? "index.html" : path.substr(1);
    if (rel.find("..") != std::string::npos) {
      respond_error(http::status::bad_request, "BAD_MESSAGE", "invalid path");
      return;
    }
    const auto file = shared_.cfg.static_dir / rel;
    std::error_code ec;
    if (std::filesystem::is_regular_file(file, ec)) {
      respond(http::status::ok, csv::read_file(file), mime_type(file));
    } else if (rel == "index.html") {
      respond(http::status::ok, kPlaceholderPage, "text/html; charset=utf-8");
    } else {
      respond_error(http::status::not_found, "NOT_FOUND", "no such resource");
    }
  }

  void respond_error(http::status status, std::string_view code, std::string_view message) {
    respond(status, json{{"code", code}, {"message", message}}.dump(), "application/json");
  }

  void respond(http::status status, std::string body, std::string_view content_type) {
    auto res = std::make_shared<Response>(status, version_);
    res->set(http::field::server, "ulca");
    res->set(http::field::content_type, std::string(content_type));
    res->keep_alive(keep_alive_);
    res->body() = std::move(body);
    res->prepare_payload();
    http::async_write(stream_, *res,
                      [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
                        if (ec) return;
                        if (!res->keep_alive()) {
                          beast::error_code ignored;
                          self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
                          return;
                        }
                        self->do_read();
                      });
  }

  beast::tcp_stream stream_;
  Shared& shared_;
  beast::flat_buffer buffer_;
  std::optional<http::request_parser<http::string_body>> parser_;
  unsigned version_ = 11;
  bool keep_alive_ = false;
};

}  // namespace

void write_snapshot_file(const std::filesystem::path& dir, const SnapshotList& snapshots) {
  std::filesystem::create_directories(dir);
  json items = json::array();
  for (const auto& [name, doc] : snapshots) items.push_back({{"name", name}, {"state", doc}});
  const auto target = dir / "snapshots.json";
  const auto tmp = dir / "snapshots.json.tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::BadData, "cannot write " + tmp.string());
    out << json{{"snapshots", std::move(items)}}.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, target);
}

SnapshotList read_snapshot_file(const std::filesystem::path& dir) {
  const auto file = dir / "snapshots.json";
  std::error_code ec;
  if (!std::filesystem::exists(file, ec)) return {};
  SnapshotList out;
  try {
    const json doc = json::parse(csv::read_file(file));
    for (const auto& item : doc.at("snapshots")) {
      out.emplace_back(item.at("name").get<std::string>(), item.at("state").get<std::string>());
    }
  } catch (const json::exception& e) {
    throw Error(Errc::BadData, "malformed snapshot file " + file.string() + ": " + e.what());
  }
  return out;
}

struct Server::Impl {
  explicit Impl(ServerConfig c)
      : cfg(std::move(c)),
        controller(make_controller(cfg)),
        acceptor(ioc),
        signals(ioc),
        shared{ioc, *controller, worker, hub, cfg} {}

  static std::unique_ptr<Controller> make_controller(const ServerConfig& cfg) {
    if (!cfg.data_path) return std::make_unique<Controller>();
    Dataset data = csv::read_dataset(*cfg.data_path, cfg.label_column);
    const int c = data.num_groups();
    auto out = std::make_unique<Controller>(
        Session(std::move(data), presets::lda(c), SolverConfig{}, cfg.data_path->string()));
    if (cfg.snapshot_dir) out->import_snapshots(read_snapshot_file(*cfg.snapshot_dir));
    return out;
  }

  void accept() {
    acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;  // acceptor closed
      std::make_shared<HttpSession>(std::move(socket), shared)->run();
      accept();
    });
  }

  void shutdown() {
    if (stopped) return;
    stopped = true;
    beast::error_code ec;
    acceptor.close(ec);
    signals.cancel(ec);
    controller->precheck(json{{"type", "cancel"}});
    ioc.stop();
  }

  ServerConfig cfg;
  std::unique_ptr<Controller> controller;
  net::io_context ioc{1};
  tcp::acceptor acceptor;
  net::signal_set signals;
  Worker worker;
  Hub hub;
  Shared shared;
  bool stopped = false;
};

Server::Server(ServerConfig cfg) : impl_(std::make_unique<Impl>(std::move(cfg))) {
  Impl& im = *impl_;
  beast::error_code ec;
  const auto address = net::ip::make_address(im.cfg.host, ec);
  if (ec) throw Error(Errc::InvalidArgument, "bad host address '" + im.cfg.host + "'");
  const tcp::endpoint endpoint(address, im.cfg.port);
  im.acceptor.open(endpoint.protocol(), ec);
  if (!ec) im.acceptor.set_option(net::socket_base::reuse_address(true), ec);
  if (!ec) im.acceptor.bind(endpoint, ec);
  if (ec == net::error::address_in_use) {
    throw Error(Errc::PortInUse, "port " + std::to_string(im.cfg.port) + " is already in use");
  }
  if (!ec) im.acceptor.listen(net::socket_base::max_listen_connections, ec);
  if (ec) throw Error(Errc::InvalidArgument, "cannot listen: " + ec.message());
}

Server::~Server() {
  impl_->worker.stop();
}

unsigned short Server::port() const { return impl_->acceptor.local_endpoint().port(); }

Controller& Server::controller() { return *impl_->controller; }

void Server::run() {
  Impl& im = *impl_;
  if (im.cfg.handle_signals) {
    im.signals.add(SIGINT);
    im.signals.add(SIGTERM);
    im.signals.async_wait([&im](beast::error_code ec, int) {
      if (!ec) im.shutdown();
    });
  }
  im.accept();
  im.ioc.run();
  im.worker.stop();
  if (im.cfg.snapshot_dir && im.controller->has_session()) {
    write_snapshot_file(*im.cfg.snapshot_dir, im.controller->snapshots());
  }
}

void Server::stop() {
  net::post(impl_->ioc, [im = impl_.get()] { im->shutdown(); });
}

}  // namespace ulca
