// Socket transports: the WebSocket server behind the control API and the
// UDP OSC endpoints. Each owns one I/O thread; callbacks run on that thread
// and must only hand work over to the control context.
#pragma once

#include "rbs/osc.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>

namespace rbs::net {

using ClientId = std::uint64_t;

class PortInUse : public std::runtime_error {
 public:
  explicit PortInUse(std::uint16_t port)
      : std::runtime_error("port " + std::to_string(port) + " is already in use"), port_(port) {}
  std::uint16_t port() const noexcept { return port_; }

 private:
  std::uint16_t port_;
};

/// WebSocket server on 127.0.0.1. Port 0 picks a free port.
class WsServer {
 public:
  using MessageHandler = std::function<void(ClientId, std::string)>;
  using CloseHandler = std::function<void(ClientId)>;

  /// Binds immediately (throws PortInUse) and starts serving.
  WsServer(std::uint16_t port, MessageHandler on_message, CloseHandler on_close = {});
  ~WsServer();
  WsServer(const WsServer&) = delete;
  WsServer& operator=(const WsServer&) = delete;

  std::uint16_t port() const;
  /// Thread-safe; frames to one client go out in call order. Unknown or
  /// closed clients are ignored.
  void send(ClientId client, std::string text);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Receives OSC datagrams and hands each decoded packet to `on_packet`.
/// Undecodable datagrams are counted and dropped.
class OscReceiver {
 public:
  OscReceiver(std::uint16_t port, std::function<void(osc::Packet)> on_packet);
  ~OscReceiver();
  OscReceiver(const OscReceiver&) = delete;
  OscReceiver& operator=(const OscReceiver&) = delete;

  std::uint16_t port() const;
  std::uint64_t malformed() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Sends each message as its own datagram. Send errors are logged, never
/// thrown.
class OscSender {
 public:
  OscSender(const std::string& host, std::uint16_t port);
  ~OscSender();
  void send(const osc::Message& message);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace rbs::net
