#pragma once

#include "maglens/interaction.hpp"
#include "maglens/render.hpp"
#include "maglens/scene.hpp"

#include <json.hpp>

#include <array>
#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace maglens {

// Bind address override for `serve`.
inline constexpr const char* kBindAddressEnv = "MAGLENS_BIND_ADDRESS";

struct ServerOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 8080;  // 0 picks a free port
  std::string scene_text;      // initial scene, scene-file syntax
  std::string base_dir = ".";
  Camera camera;
  TransferFunction tf = TransferFunction::default_tf();
  InteractionConfig config;
  double frames_per_second = 10.0;
  int render_workers = 0;
  bool handle_signals = false;  // stop on SIGINT/SIGTERM
};

enum class FrameEncoding : std::uint8_t { Raw = 0, Deflate = 1 };

// Binary frame header, 16 bytes little-endian:
//   u32 sequence, u16 width, u16 height, u8 encoding, u8[3] zero,
//   u32 raw length (width * height * 4).
inline constexpr std::size_t kFrameHeaderBytes = 16;

struct FrameHeader {
  std::uint32_t sequence = 0;
  std::uint16_t width = 0;
  std::uint16_t height = 0;
  FrameEncoding encoding = FrameEncoding::Raw;
  std::uint32_t raw_length = 0;
};

std::string encode_frame(const Framebuffer& fb, std::uint32_t sequence, FrameEncoding encoding);
FrameHeader decode_frame_header(std::string_view message);
// Decodes the payload back to RGBA; throws std::runtime_error on bad input.
Framebuffer decode_frame(std::string_view message);

// JSON <-> InputEvent wire form.
nlohmann::json event_to_json(const InputEvent& e);
InputEvent event_from_json(const nlohmann::json& j);

// WebSocket server on /session. One controlling connection at a time; the
// reducer runs on the network thread in arrival order, a render thread
// pushes frames from the latest scene snapshot.
class Server {
 public:
  explicit Server(ServerOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds, then serves until stop(). Throws on bind failure.
  void run();
  void stop();
  // Actual listening port once bound (0 before).
  unsigned short port() const { return bound_port_.load(); }
  bool listening() const { return bound_port_.load() != 0; }

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
  std::atomic<unsigned short> bound_port_{0};
};

}  // namespace maglens
