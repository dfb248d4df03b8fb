// Threaded session: a control thread (ticks, OSC, API), an audio thread
// (block processing against a null output device) and the transport threads.
//
// With ClockKind::Wall both loops are paced by the system clock and never wait
// for each other. ClockKind::Fake runs the same threads in lockstep on the
// sample grid used by the offline renderer, so the captured output matches
// render_samples() exactly.
#pragma once

#include "rbs/config.hpp"
#include "rbs/control_api.hpp"
#include "rbs/engine.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <limits>
#include <memory>
#include <mutex>
#include <variant>
#include <vector>

namespace rbs {

enum class ClockKind { Wall, Fake };

struct RuntimeOptions {
  ClockKind clock = ClockKind::Wall;
  double duration = std::numeric_limits<double>::infinity();  // s
  bool osc = true;
  bool api = true;
  bool capture = false;  // needs a finite duration
};

namespace net {
class WsServer;
class OscReceiver;
class OscSender;
}  // namespace net

class Runtime {
 public:
  Runtime(const SessionConfig& config, TrajectoryScript script, RuntimeOptions options);
  ~Runtime();

  /// Blocks until the duration has been rendered or stop() is called.
  void run();
  /// Thread-safe.
  void stop();

  /// Bound ports (useful when the config asks for port 0).
  std::uint16_t api_port() const;
  std::uint16_t osc_in_port() const;

  const std::vector<float>& captured() const { return capture_; }
  std::uint64_t samples() const { return samples_done_.load(); }
  /// Valid once run() has returned.
  const ControlLoop& control() const { return *control_; }

 private:
  struct ApiText {
    api::ClientId client;
    std::string text;
  };
  struct ApiClosed {
    api::ClientId client;
  };
  using Inbound = std::variant<osc::Packet, ApiText, ApiClosed>;

  void post(Inbound item);
  void control_thread();
  void audio_thread();
  void control_step();
  // Lockstep helpers; only the fake clock ever waits.
  void advance(std::atomic<std::uint64_t>& counter, std::uint64_t value);
  void await(const std::atomic<std::uint64_t>& counter, std::uint64_t value);

  SessionConfig config_;
  RuntimeOptions options_;
  std::uint64_t total_samples_;
  std::unique_ptr<SharedChannels> shared_;
  std::unique_ptr<ControlLoop> control_;
  std::unique_ptr<AudioLoop> audio_;
  std::unique_ptr<api::ControlApi> api_;
  std::unique_ptr<net::WsServer> server_;
  std::unique_ptr<net::OscReceiver> osc_in_;
  std::unique_ptr<net::OscSender> osc_out_;

  std::mutex inbox_mutex_;
  std::vector<Inbound> inbox_;
  std::vector<Inbound> draining_;

  std::mutex step_mutex_;
  std::condition_variable step_cv_;
  std::atomic<bool> stop_{false};
  std::atomic<std::uint64_t> samples_done_{0};
  std::atomic<std::uint64_t> ticks_done_{0};
  std::vector<float> capture_;
};

}  // namespace rbs
