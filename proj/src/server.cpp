#include "maglens/server.hpp"

#include "maglens/session.hpp"
#include "maglens/summary.hpp"

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/signal_set.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <zlib.h>

#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <iostream>
#include <mutex>
#include <thread>

namespace maglens {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Frames

namespace {

void put_u16(std::string& s, std::size_t at, std::uint16_t v) {
  s[at] = static_cast<char>(v & 0xff);
  s[at + 1] = static_cast<char>(v >> 8);
}

void put_u32(std::string& s, std::size_t at, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s[at + i] = static_cast<char>((v >> (8 * i)) & 0xff);
}

std::uint32_t get_u32(std::string_view s, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[at + i])) << (8 * i);
  return v;
}

std::uint16_t get_u16(std::string_view s, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(s[at]) |
                                    (static_cast<unsigned char>(s[at + 1]) << 8));
}

}  // namespace

std::string encode_frame(const Framebuffer& fb, std::uint32_t sequence, FrameEncoding encoding) {
  std::string out(kFrameHeaderBytes, '\0');
  put_u32(out, 0, sequence);
  put_u16(out, 4, static_cast<std::uint16_t>(fb.width));
  put_u16(out, 6, static_cast<std::uint16_t>(fb.height));
  out[8] = static_cast<char>(encoding);
  put_u32(out, 12, static_cast<std::uint32_t>(fb.rgba.size()));
  if (encoding == FrameEncoding::Raw) {
    out.append(reinterpret_cast<const char*>(fb.rgba.data()), fb.rgba.size());
    return out;
  }
  uLongf len = compressBound(static_cast<uLong>(fb.rgba.size()));
  std::string packed(len, '\0');
  if (compress2(reinterpret_cast<Bytef*>(packed.data()), &len, fb.rgba.data(),
                static_cast<uLong>(fb.rgba.size()), 6) != Z_OK) {
    throw std::runtime_error("frame compression failed");
  }
  packed.resize(len);
  return out + packed;
}

FrameHeader decode_frame_header(std::string_view message) {
  if (message.size() < kFrameHeaderBytes) throw std::runtime_error("frame shorter than its header");
  FrameHeader h;
  h.sequence = get_u32(message, 0);
  h.width = get_u16(message, 4);
  h.height = get_u16(message, 6);
  const auto enc = static_cast<unsigned char>(message[8]);
  if (enc > 1) throw std::runtime_error("unknown frame encoding");
  h.encoding = static_cast<FrameEncoding>(enc);
  h.raw_length = get_u32(message, 12);
  return h;
}

Framebuffer decode_frame(std::string_view message) {
  const auto h = decode_frame_header(message);
  Framebuffer fb(h.width, h.height);
  if (h.raw_length != fb.rgba.size()) throw std::runtime_error("frame length does not match its resolution");
  const auto payload = message.substr(kFrameHeaderBytes);
  if (h.encoding == FrameEncoding::Raw) {
    if (payload.size() != fb.rgba.size()) throw std::runtime_error("raw payload length mismatch");
    std::memcpy(fb.rgba.data(), payload.data(), payload.size());
    return fb;
  }
  uLongf len = static_cast<uLongf>(fb.rgba.size());
  if (uncompress(fb.rgba.data(), &len, reinterpret_cast<const Bytef*>(payload.data()),
                 static_cast<uLong>(payload.size())) != Z_OK ||
      len != fb.rgba.size()) {
    throw std::runtime_error("deflate payload is corrupt");
  }
  return fb;
}

// ---------------------------------------------------------------------------
// JSON events

namespace {

json pose_to_json(const Pose& p) { return p.to_array(); }

Pose pose_from_json(const json& j) {
  if (!j.is_array() || j.size() != 7) throw std::invalid_argument("pose must be an array of 7 numbers");
  std::array<double, 7> v{};
  for (std::size_t i = 0; i < 7; ++i) {
    v[i] = j.at(i).get<double>();
    if (!std::isfinite(v[i])) throw std::invalid_argument("pose components must be finite");
  }
  return Pose::from_array(v);
}

json hand_to_json(const HandState& h) {
  const char* edge = h.menu_button_edge == ButtonEdge::Pressed    ? "press"
                     : h.menu_button_edge == ButtonEdge::Released ? "release"
                                                                  : "none";
  return {{"pose", pose_to_json(h.pose)}, {"grab", h.grab_active}, {"trigger", h.trigger_active}, {"menu", edge}};
}

HandState hand_from_json(const json& j) {
  HandState h;
  if (j.contains("pose")) h.pose = pose_from_json(j.at("pose"));
  h.grab_active = j.value("grab", false);
  h.trigger_active = j.value("trigger", false);
  const std::string edge = j.value("menu", std::string("none"));
  if (edge == "press") {
    h.menu_button_edge = ButtonEdge::Pressed;
  } else if (edge == "release") {
    h.menu_button_edge = ButtonEdge::Released;
  } else if (edge != "none") {
    throw std::invalid_argument("menu edge must be none, press or release");
  }
  return h;
}

}  // namespace

json event_to_json(const InputEvent& e) {
  return {{"type", "InputEvent"},
          {"t", e.timestamp_ms},
          {"head", pose_to_json(e.head)},
          {"dominant", hand_to_json(e.dominant)},
          {"non_dominant", hand_to_json(e.non_dominant)}};
}

InputEvent event_from_json(const json& j) {
  InputEvent e;
  e.timestamp_ms = j.at("t").get<double>();
  if (j.contains("head")) e.head = pose_from_json(j.at("head"));
  if (j.contains("dominant")) e.dominant = hand_from_json(j.at("dominant"));
  if (j.contains("non_dominant")) e.non_dominant = hand_from_json(j.at("non_dominant"));
  return e;
}

// ---------------------------------------------------------------------------
// Server

namespace {

struct RenderJob {
  std::shared_ptr<const SceneState> scene;
  Camera camera;
  TransferFunction tf = TransferFunction::default_tf();
  std::uint64_t version = 0;
};

class Connection;

}  // namespace

struct Server::Impl {
  explicit Impl(ServerOptions o) : options(std::move(o)), camera(options.camera), tf(options.tf) {}

  ServerOptions options;
  net::io_context ioc{1};
  tcp::acceptor acceptor{ioc};
  std::optional<net::signal_set> signals;

  // Engine state, touched only on the network thread.
  SceneState scene;
  InteractionMode mode;
  Camera camera;
  TransferFunction tf;
  std::uint64_t version = 0;
  std::weak_ptr<Connection> active;

  // Latest snapshot for the render thread.
  std::mutex job_mutex;
  std::condition_variable job_cv;
  RenderJob job;
  bool stopping = false;
  std::atomic<bool> have_client{false};
  std::atomic<FrameEncoding> encoding{FrameEncoding::Raw};
  std::thread render_thread;

  void publish() {
    ++version;
    std::lock_guard lock(job_mutex);
    job = RenderJob{std::make_shared<const SceneState>(scene), camera, tf, version};
  }

  void load_scene_text(const std::string& text, const std::string& base_dir) {
    scene = SceneState::parse(text, base_dir);
    mode = InteractionMode{};
  }

  void accept();
  void render_loop();
};

namespace {

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, Server::Impl& server) : ws_(std::move(socket)), server_(server) {}

  void start() {
    http::async_read(ws_.next_layer(), buffer_, request_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_request(ec); });
  }

  // Network thread only.
  void send_text(json j) {
    j["seq"] = ++seq_;
    enqueue(false, std::make_shared<std::string>(j.dump()));
  }

  void send_frame(std::shared_ptr<std::string> frame) {
    if (!open_ || pending_frames_ > 0) return;
    put_u32(*frame, 0, ++seq_);
    ++pending_frames_;
    enqueue(true, std::move(frame));
  }

  void close() {
    if (!open_) return;
    open_ = false;
    ws_.async_close(websocket::close_code::going_away, [self = shared_from_this()](beast::error_code) {});
  }

  FrameEncoding encoding() const { return encoding_; }

 private:
  void on_request(beast::error_code ec) {
    if (ec) return;
    const std::string target(request_.target());
    const auto q = target.find('?');
    const std::string path = target.substr(0, q);
    if (!websocket::is_upgrade(request_) || path != "/session") {
      auto res = std::make_shared<http::response<http::string_body>>(http::status::not_found, request_.version());
      res->set(http::field::content_type, "text/plain");
      res->body() = "websocket endpoint is /session\n";
      res->prepare_payload();
      http::async_write(ws_.next_layer(), *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
        beast::error_code ignored;
        self->ws_.next_layer().socket().shutdown(tcp::socket::shutdown_both, ignored);
      });
      return;
    }
    if (q != std::string::npos && target.find("encoding=deflate", q) != std::string::npos) {
      encoding_ = FrameEncoding::Deflate;
    }
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(request_, [self = shared_from_this()](beast::error_code ec) { self->on_accept(ec); });
  }

  void on_accept(beast::error_code ec) {
    if (ec) return;
    open_ = true;
    if (server_.active.lock()) {
      send_text({{"type", "Error"}, {"code", "busy"}, {"message", "another client is connected"}, {"ack", nullptr}});
      closing_after_writes_ = true;
      return;
    }
    server_.active = shared_from_this();
    server_.encoding = encoding_;
    server_.have_client = true;
    send_summary(nullptr, false);
    read();
  }

  void read() {
    ws_.async_read(in_, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
  }

  void on_read(beast::error_code ec) {
    if (ec) {
      open_ = false;
      if (server_.active.lock().get() == this) server_.have_client = false;
      return;
    }
    const bool text = ws_.got_text();
    const std::string msg = beast::buffers_to_string(in_.data());
    in_.consume(in_.size());
    if (!text) {
      error("malformed", "binary messages are not accepted", nullptr);
    } else {
      handle(msg);
    }
    read();
  }

  void error(const std::string& code, const std::string& message, const json& ack) {
    send_text({{"type", "Error"}, {"code", code}, {"message", message}, {"ack", ack}});
  }

  void send_summary(const json& ack, bool structural) {
    json j = scene_summary(server_.scene, server_.mode, server_.options.config);
    j["ack"] = ack;
    j["structural"] = structural;
    send_text(std::move(j));
  }

  void handle(const std::string& text) {
    json msg;
    try {
      msg = json::parse(text);
    } catch (const json::exception& e) {
      error("malformed", std::string("invalid JSON: ") + e.what(), nullptr);
      return;
    }
    const json ack = msg.is_object() && msg.contains("id") ? msg["id"] : json(nullptr);
    if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string()) {
      error("malformed", "message needs a string 'type'", ack);
      return;
    }
    const std::string type = msg["type"];
    try {
      if (type == "InputEvent") {
        const InputEvent e = event_from_json(msg);
        auto out = step(std::move(server_.scene), std::move(server_.mode), e, server_.options.config);
        server_.scene = std::move(out.scene);
        server_.mode = std::move(out.mode);
        server_.publish();
        if (!out.feedback.empty()) send_text({{"type", "Feedback"}, {"events", feedback_json(out.feedback)}});
        send_summary(ack, out.structural);
      } else if (type == "SetCamera") {
        Camera c = server_.camera;
        c.fov_deg = msg.value("fov", c.fov_deg);
        c.width = msg.value("width", c.width);
        c.height = msg.value("height", c.height);
        if (auto e = c.check_invariants(); !e.empty() || c.width > 4096 || c.height > 4096) {
          error("malformed", e.empty() ? "resolution above 4096" : e, ack);
          return;
        }
        server_.camera = c;
        server_.publish();
        send_summary(ack, false);
      } else if (type == "SetTransferFunction") {
        std::vector<TfPoint> pts;
        for (const auto& p : msg.at("points")) pts.push_back({p.at(0), p.at(1), p.at(2)});
        server_.tf = TransferFunction(std::move(pts));
        server_.publish();
        send_summary(ack, false);
      } else if (type == "LoadScene") {
        load_scene(msg);
        server_.publish();
        send_summary(ack, true);
      } else if (type == "RequestState") {
        send_summary(ack, false);
      } else {
        error("malformed", "unknown message type '" + type + "'", ack);
      }
    } catch (const json::exception& e) {
      error("malformed", e.what(), ack);
    } catch (const FormatError& e) {
      error("malformed", e.what(), ack);
    } catch (const std::invalid_argument& e) {
      error("malformed", e.what(), ack);
    } catch (const std::exception& e) {
      error("internal", e.what(), ack);
    }
  }

  void load_scene(const json& msg) {
    const std::string& base = server_.options.base_dir;
    if (msg.contains("script")) {
      const auto script = SessionScript::parse(msg.at("script").get<std::string>(), base);
      server_.scene = script.initial_scene();
      server_.mode = InteractionMode{};
      server_.camera = script.camera;
      server_.tf = script.tf;
      server_.options.config = script.config;
    } else if (msg.contains("scene")) {
      server_.load_scene_text(msg.at("scene").get<std::string>(), base);
    } else if (msg.contains("raw")) {
      Record r;
      r.keyword = "volume";
      r.add("raw", msg.at("raw").get<std::string>()).add("meta", msg.at("meta").get<std::string>());
      server_.load_scene_text(r.to_line() + "\n", base);
    } else {
      const std::string phantom = msg.value("phantom", std::string("default"));
      if (phantom != "default") {
        server_.load_scene_text("volume kind=phantom\n" + phantom, base);
      } else {
        server_.load_scene_text("volume phantom=default\n", base);
      }
    }
  }

  void enqueue(bool binary, std::shared_ptr<std::string> data) {
    queue_.push_back({binary, std::move(data)});
    if (!writing_) write_next();
  }

  void write_next() {
    if (queue_.empty()) {
      writing_ = false;
      if (closing_after_writes_) close();
      return;
    }
    writing_ = true;
    auto& [binary, data] = queue_.front();
    ws_.binary(binary);
    ws_.async_write(net::buffer(*data), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (self->queue_.front().first) --self->pending_frames_;
      self->queue_.pop_front();
      if (ec) {
        self->open_ = false;
        self->queue_.clear();
        self->writing_ = false;
        return;
      }
      self->write_next();
    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  Server::Impl& server_;
  beast::flat_buffer buffer_;
  beast::flat_buffer in_;
  http::request<http::string_body> request_;
  std::deque<std::pair<bool, std::shared_ptr<std::string>>> queue_;
  bool writing_ = false;
  bool open_ = false;
  bool closing_after_writes_ = false;
  int pending_frames_ = 0;
  std::uint32_t seq_ = 0;
  FrameEncoding encoding_ = FrameEncoding::Raw;
};

}  // namespace

void Server::Impl::accept() {
  acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
    if (ec) return;  // acceptor closed
    std::make_shared<Connection>(std::move(socket), *this)->start();
    accept();
  });
}

void Server::Impl::render_loop() {
  using clock = std::chrono::steady_clock;
  const auto period = std::chrono::duration_cast<clock::duration>(
      std::chrono::duration<double>(1.0 / std::max(0.1, options.frames_per_second)));
  std::uint64_t rendered_version = 0;
  std::shared_ptr<std::string> frame;
  auto next = clock::now();
  for (;;) {
    RenderJob current;
    {
      std::unique_lock lock(job_mutex);
      if (job_cv.wait_until(lock, next, [&] { return stopping; })) return;
      current = job;
    }
    next += period;
    if (clock::now() > next) next = clock::now();
    if (!have_client || !current.scene) continue;
    if (!frame || current.version != rendered_version) {
      Camera cam = current.camera;
      cam.pose = current.scene->head;
      RenderSettings settings;
      settings.workers = options.render_workers;
      const Framebuffer fb = render_frame(*current.scene, cam, current.tf, settings);
      frame = std::make_shared<std::string>(encode_frame(fb, 0, encoding));
      rendered_version = current.version;
    }
    auto copy = std::make_shared<std::string>(*frame);
    net::post(ioc, [this, copy] {
      if (auto c = active.lock()) c->send_frame(copy);
    });
  }
}

Server::Server(ServerOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

Server::~Server() { stop(); }

void Server::run() {
  Impl& s = *impl_;
  s.load_scene_text(s.options.scene_text, s.options.base_dir);
  s.publish();

  const auto address = net::ip::make_address(s.options.address);
  tcp::endpoint endpoint(address, s.options.port);
  s.acceptor.open(endpoint.protocol());
  s.acceptor.set_option(net::socket_base::reuse_address(true));
  s.acceptor.bind(endpoint);
  s.acceptor.listen(net::socket_base::max_listen_connections);
  bound_port_ = s.acceptor.local_endpoint().port();

  if (s.options.handle_signals) {
    s.signals.emplace(s.ioc, SIGINT, SIGTERM);
    s.signals->async_wait([this](beast::error_code, int) { stop(); });
  }
  s.accept();
  s.render_thread = std::thread([&s] { s.render_loop(); });
  s.ioc.run();
  {
    std::lock_guard lock(s.job_mutex);
    s.stopping = true;
  }
  s.job_cv.notify_all();
  if (s.render_thread.joinable()) s.render_thread.join();
  bound_port_ = 0;
}

void Server::stop() {
  if (!impl_) return;
  {
    std::lock_guard lock(impl_->job_mutex);
    impl_->stopping = true;
  }
  impl_->job_cv.notify_all();
  impl_->ioc.stop();
}

}  // namespace maglens
