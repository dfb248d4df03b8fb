#include "rbs/net.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

#include <array>
#include <atomic>
#include <deque>
#include <map>
#include <thread>

namespace rbs::net {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using udp = asio::ip::udp;

// --- WebSocket server -------------------------------------------------------

namespace {

class Session : public std::enable_shared_from_this<Session> {
 public:
  using Closed = std::function<void(ClientId)>;

  Session(tcp::socket socket, ClientId id, WsServer::MessageHandler& on_message, Closed on_closed)
      : ws_(std::move(socket)), id_(id), on_message_(on_message), on_closed_(std::move(on_closed)) {}

  void start() {
    ws_.text(true);
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
      if (ec) return self->finish();
      self->read();
    });
  }

  void queue(std::string text) {
    if (closed_) return;
    outbox_.push_back(std::move(text));
    if (outbox_.size() == 1) write();
  }

  void close() {
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().close(ec);
  }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->finish();
      std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      self->on_message_(self->id_, std::move(text));
      self->read();
    });
  }

  void write() {
    ws_.async_write(asio::buffer(outbox_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->finish();
      self->outbox_.pop_front();
      if (!self->outbox_.empty()) self->write();
    });
  }

  void finish() {
    if (closed_) return;
    closed_ = true;
    outbox_.clear();
    on_closed_(id_);
  }

  websocket::stream<beast::tcp_stream> ws_;
  ClientId id_;
  WsServer::MessageHandler& on_message_;
  Closed on_closed_;
  beast::flat_buffer buffer_;
  std::deque<std::string> outbox_;
  bool closed_ = false;
};

}  // namespace

struct WsServer::Impl {
  asio::io_context ioc;
  tcp::acceptor acceptor{ioc};
  MessageHandler on_message;
  CloseHandler on_close;
  // Touched only on the I/O thread.
  std::map<ClientId, std::shared_ptr<Session>> sessions;
  ClientId next_id = 1;
  std::thread thread;
  std::atomic<bool> stopped{false};
  std::uint16_t port = 0;

  void accept() {
    acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec) {
        if (ec != asio::error::operation_aborted) spdlog::warn("api: accept failed: {}", ec.message());
        if (!acceptor.is_open()) return;
      } else {
        const ClientId id = next_id++;
        auto s = std::make_shared<Session>(std::move(socket), id, on_message, [this](ClientId c) {
          sessions.erase(c);
          if (on_close) on_close(c);
        });
        sessions.emplace(id, s);
        s->start();
        spdlog::info("api: client {} connected", id);
      }
      accept();
    });
  }
};

WsServer::WsServer(std::uint16_t port, MessageHandler on_message, CloseHandler on_close)
    : impl_(std::make_unique<Impl>()) {
  impl_->on_message = std::move(on_message);
  impl_->on_close = std::move(on_close);
  const tcp::endpoint endpoint(asio::ip::make_address("127.0.0.1"), port);
  beast::error_code ec;
  impl_->acceptor.open(endpoint.protocol(), ec);
  if (!ec) impl_->acceptor.set_option(asio::socket_base::reuse_address(true), ec);
  if (!ec) impl_->acceptor.bind(endpoint, ec);
  if (ec == asio::error::address_in_use) throw PortInUse(port);
  if (!ec) impl_->acceptor.listen(asio::socket_base::max_listen_connections, ec);
  if (ec) throw std::runtime_error("api: cannot listen on port " + std::to_string(port) + ": " + ec.message());
  impl_->port = impl_->acceptor.local_endpoint().port();
  impl_->accept();
  impl_->thread = std::thread([this] { impl_->ioc.run(); });
}

WsServer::~WsServer() { stop(); }

std::uint16_t WsServer::port() const { return impl_->port; }

void WsServer::send(ClientId client, std::string text) {
  if (impl_->stopped) return;
  asio::post(impl_->ioc, [this, client, text = std::move(text)]() mutable {
    auto it = impl_->sessions.find(client);
    if (it != impl_->sessions.end()) it->second->queue(std::move(text));
  });
}

void WsServer::stop() {
  if (impl_->stopped.exchange(true)) return;
  asio::post(impl_->ioc, [this] {
    beast::error_code ec;
    impl_->acceptor.close(ec);
    for (auto& [id, s] : impl_->sessions) s->close();
  });
  // Give sessions a moment to unwind, then force the loop down.
  std::thread stopper([this] {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    impl_->ioc.stop();
  });
  if (impl_->thread.joinable()) impl_->thread.join();
  stopper.join();
  impl_->sessions.clear();
}

// --- OSC over UDP -----------------------------------------------------------

struct OscReceiver::Impl {
  asio::io_context ioc;
  udp::socket socket{ioc};
  std::array<std::uint8_t, 65536> buffer{};
  udp::endpoint sender;
  std::function<void(osc::Packet)> on_packet;
  std::atomic<std::uint64_t> malformed{0};
  std::thread thread;
  bool stopped = false;
  std::uint16_t port = 0;

  void receive() {
    socket.async_receive_from(asio::buffer(buffer), sender, [this](beast::error_code ec, std::size_t n) {
      if (ec == asio::error::operation_aborted || !socket.is_open()) return;
      if (!ec) {
        try {
          on_packet(osc::decode(std::span<const std::uint8_t>(buffer.data(), n)));
        } catch (const osc::Error& e) {
          ++malformed;
          spdlog::debug("osc: dropped datagram: {}", e.what());
        }
      }
      receive();
    });
  }
};

OscReceiver::OscReceiver(std::uint16_t port, std::function<void(osc::Packet)> on_packet)
    : impl_(std::make_unique<Impl>()) {
  impl_->on_packet = std::move(on_packet);
  beast::error_code ec;
  const udp::endpoint endpoint(asio::ip::make_address("0.0.0.0"), port);
  impl_->socket.open(endpoint.protocol(), ec);
  if (!ec) impl_->socket.bind(endpoint, ec);
  if (ec == asio::error::address_in_use) throw PortInUse(port);
  if (ec) throw std::runtime_error("osc: cannot bind port " + std::to_string(port) + ": " + ec.message());
  impl_->port = impl_->socket.local_endpoint().port();
  impl_->receive();
  impl_->thread = std::thread([this] { impl_->ioc.run(); });
}

OscReceiver::~OscReceiver() { stop(); }

std::uint16_t OscReceiver::port() const { return impl_->port; }
std::uint64_t OscReceiver::malformed() const { return impl_->malformed.load(); }

void OscReceiver::stop() {
  if (impl_->stopped) return;
  impl_->stopped = true;
  asio::post(impl_->ioc, [this] {
    beast::error_code ec;
    impl_->socket.close(ec);
  });
  if (impl_->thread.joinable()) impl_->thread.join();
}

struct OscSender::Impl {
  asio::io_context ioc;
  udp::socket socket{ioc};
  udp::endpoint target;
};

OscSender::OscSender(const std::string& host, std::uint16_t port) : impl_(std::make_unique<Impl>()) {
  udp::resolver resolver(impl_->ioc);
  impl_->target = *resolver.resolve(udp::v4(), host, std::to_string(port)).begin();
  impl_->socket.open(udp::v4());
  impl_->socket.non_blocking(true);
}

OscSender::~OscSender() = default;

void OscSender::send(const osc::Message& message) {
  const auto bytes = osc::encode_message(message);
  beast::error_code ec;
  impl_->socket.send_to(asio::buffer(bytes), impl_->target, 0, ec);
  if (ec && ec != asio::error::would_block) spdlog::debug("osc: send failed: {}", ec.message());
}

}  // namespace rbs::net
