#include "rbs/runtime.hpp"

#include "rbs/net.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <condition_variable>
#include <cmath>
#include <thread>

namespace rbs {

using Clock = std::chrono::steady_clock;

Runtime::Runtime(const SessionConfig& config, TrajectoryScript script, RuntimeOptions options)
    : config_(config), options_(options), shared_(std::make_unique<SharedChannels>()) {
  validate(config_);
  validate_script(config_, script);
  if (!(options_.duration >= 0.0)) {
    throw ConfigError(ConfigErrorKind::ConfigInvalid, "duration", "must be a non-negative number of seconds");
  }
  if (options_.capture && !std::isfinite(options_.duration)) {
    throw ConfigError(ConfigErrorKind::ConfigInvalid, "duration", "capturing needs a finite duration");
  }
  total_samples_ = std::isfinite(options_.duration)
                       ? static_cast<std::uint64_t>(std::llround(options_.duration * config_.sample_rate))
                       : std::numeric_limits<std::uint64_t>::max();

  control_ = std::make_unique<ControlLoop>(config_, std::move(script), *shared_);
  audio_ = std::make_unique<AudioLoop>(config_, load_feeds(config_), *shared_);
  api_ = std::make_unique<api::ControlApi>(*control_);
  if (options_.capture) capture_.reserve(total_samples_ * audio_->channels());

  if (options_.api) {
    server_ = std::make_unique<net::WsServer>(
        config_.api_port, [this](net::ClientId c, std::string text) { post(ApiText{c, std::move(text)}); },
        [this](net::ClientId c) { post(ApiClosed{c}); });
    spdlog::info("control api listening on ws://127.0.0.1:{}", server_->port());
  }
  if (options_.osc) {
    osc_in_ = std::make_unique<net::OscReceiver>(config_.osc.in_port, [this](osc::Packet p) { post(std::move(p)); });
    osc_out_ = std::make_unique<net::OscSender>(config_.osc.out_host, config_.osc.out_port);
    spdlog::info("osc in on udp {}, out to {}:{}", osc_in_->port(), config_.osc.out_host, config_.osc.out_port);
  }
}

Runtime::~Runtime() {
  stop();
  if (server_) server_->stop();
  if (osc_in_) osc_in_->stop();
}

std::uint16_t Runtime::api_port() const { return server_ ? server_->port() : 0; }
std::uint16_t Runtime::osc_in_port() const { return osc_in_ ? osc_in_->port() : 0; }

void Runtime::post(Inbound item) {
  std::lock_guard lock(inbox_mutex_);
  inbox_.push_back(std::move(item));
}

void Runtime::stop() {
  stop_ = true;
  std::lock_guard lock(step_mutex_);
  step_cv_.notify_all();
}

void Runtime::advance(std::atomic<std::uint64_t>& counter, std::uint64_t value) {
  if (options_.clock == ClockKind::Wall) {
    counter.store(value);
    return;
  }
  std::lock_guard lock(step_mutex_);
  counter.store(value);
  step_cv_.notify_all();
}

void Runtime::await(const std::atomic<std::uint64_t>& counter, std::uint64_t value) {
  std::unique_lock lock(step_mutex_);
  step_cv_.wait(lock, [&] { return counter.load() >= value || stop_; });
}

void Runtime::control_step() {
  {
    std::lock_guard lock(inbox_mutex_);
    draining_.swap(inbox_);
  }
  for (auto& item : draining_) {
    if (auto* packet = std::get_if<osc::Packet>(&item)) {
      control_->ingress(*packet);
    } else if (auto* text = std::get_if<ApiText>(&item)) {
      auto reply = api_->handle_text(text->client, text->text);
      if (server_) server_->send(text->client, std::move(reply));
    } else {
      api_->disconnect(std::get<ApiClosed>(item).client);
    }
  }
  draining_.clear();

  control_->tick();
  if (osc_out_) {
    for (const auto& m : control_->egress()) osc_out_->send(m);
  }
  for (auto& [client, frame] : api_->after_tick()) {
    if (server_) server_->send(client, std::move(frame));
  }
}

void Runtime::control_thread() {
  const auto start = Clock::now();
  for (std::uint64_t k = 0; !stop_; ++k) {
    const std::uint64_t due = tick_sample(config_, k);
    if (due >= total_samples_) break;
    if (options_.clock == ClockKind::Fake) {
      // Run tick k only once the audio side has rendered every sample before it.
      await(samples_done_, due);
    } else {
      std::this_thread::sleep_until(start + std::chrono::duration_cast<Clock::duration>(
                                                std::chrono::duration<double>(double(k) / config_.control_rate)));
    }
    if (stop_) break;
    control_step();
    advance(ticks_done_, k + 1);
  }
}

void Runtime::audio_thread() {
  const auto start = Clock::now();
  const std::size_t channels = audio_->channels();
  std::uint64_t needed = 0;  // ticks that must precede the next block
  while (!stop_) {
    const std::uint64_t n = samples_done_.load();
    if (n >= total_samples_) break;
    const auto frames = static_cast<std::size_t>(std::min<std::uint64_t>(config_.block_size, total_samples_ - n));
    if (options_.clock == ClockKind::Fake) {
      while (tick_sample(config_, needed) <= n && tick_sample(config_, needed) < total_samples_) ++needed;
      await(ticks_done_, needed);
      if (stop_) break;
    } else {
      // Null device: consume one block per block period.
      std::this_thread::sleep_until(start + std::chrono::duration_cast<Clock::duration>(
                                                std::chrono::duration<double>(double(n) / config_.sample_rate)));
    }
    audio_->process(frames);
    if (options_.capture) {
      const auto& out = audio_->output();
      for (std::size_t i = 0; i < frames; ++i) {
        for (std::size_t c = 0; c < channels; ++c) {
          capture_.push_back(out(Eigen::Index(c), Eigen::Index(i)));
        }
      }
    }
    advance(samples_done_, n + frames);
  }
}

void Runtime::run() {
  std::thread audio([this] { audio_thread(); });
  std::thread control([this] { control_thread(); });
  audio.join();
  // The control thread may still be waiting for samples that will never come.
  stop();
  control.join();
  spdlog::info("rendered {} samples in {} ticks; {} non-finite samples replaced", samples_done_.load(),
               control_->ticks(), audio_->nonfinite());
}

}  // namespace rbs
