#include "rbs/engine.hpp"

#include "rbs/wav.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace rbs {

namespace {

double db_to_linear(double db) { return std::pow(10.0, db / 20.0); }

std::string strip_route_prefix(const std::string& where) {
  return where.starts_with("route.") ? where.substr(6) : where;
}

}  // namespace

// --- ParamDirectory ---------------------------------------------------------

ParamDirectory::ParamDirectory(const SessionConfig& config) {
  entries_["blend.mix"] = {{SinkKind::Mix, {}, 0}, *engine_param("blend.mix"), config.mix};
  entries_["drone.gain_db"] = {{SinkKind::DroneGain, {}, 0}, *engine_param("drone.gain_db"), 0.0};
  for (std::uint32_t i = 0; i < kin::kJoints; ++i) {
    const std::string address = "voice" + std::to_string(i) + ".gain_db";
    entries_[address] = {{SinkKind::VoiceGain, {}, i}, *engine_param(address), config.voice_gain_db[i]};
  }
  for (std::uint32_t n = 0; n < config.graph.size(); ++n) {
    const auto& spec = config.graph[n];
    const auto params = dsp::node_params(spec.kind);
    for (std::uint32_t p = 0; p < params.size(); ++p) {
      auto it = spec.params.find(std::string(params[p].name));
      const double initial = it == spec.params.end() ? params[p].default_value : it->second;
      entries_[spec.id + "." + std::string(params[p].name)] = {{SinkKind::Graph, {n, p}, 0}, params[p], initial};
    }
  }
}

const ParamDirectory::Entry* ParamDirectory::find(std::string_view address) const {
  auto it = entries_.find(address);
  return it == entries_.end() ? nullptr : &it->second;
}

// --- ControlLoop ------------------------------------------------------------

ControlLoop::ControlLoop(const SessionConfig& config, TrajectoryScript script, SharedChannels& shared)
    : config_(config), script_(std::move(script)), shared_(shared), directory_(config_),
      dt_(1.0 / config_.control_rate),
      collaborator_(config_.collaborator[0], config_.collaborator[1], config_.collaborator[2]),
      mapping_(config_.mapping), env_(config_.env) {
  joints_.q = config_.initial_q;
  chain_ = kin::forward_kinematics(joints_, config_.kinematics);
  previous_tcp_ = chain_.tcp.position;
  proximity_ = (collaborator_ - chain_.tcp.position).norm();
  collab_distance_ = collaborator_.norm();
  for (const auto& [address, entry] : directory_.entries()) targets_[address] = entry.initial;

  AudioSignals& s = shared_.signals.back();
  s.joint_speed.fill(0.0);
  for (int i = 0; i < 3; ++i) s.tcp[std::size_t(i)] = chain_.tcp.position[i];
  s.tick = 0;
  shared_.signals.publish();
  egress_.reserve(1 + kin::kJoints);
}

void ControlLoop::ingress(const osc::Packet& packet) {
  if (const auto* msg = std::get_if<osc::Message>(&packet.value)) {
    ingress(*msg);
    return;
  }
  for (const auto& element : std::get<osc::Bundle>(packet.value).elements) ingress(element);
}

void ControlLoop::ingress(const osc::Message& msg) {
  try {
    if (msg.address == "/collab/pos") {
      if (msg.args.size() != 3) throw std::invalid_argument("expected 3 numeric arguments");
      set_collaborator(kin::Vec3(osc::arg_as_float(msg, 0), osc::arg_as_float(msg, 1), osc::arg_as_float(msg, 2)));
      return;
    }
    if (msg.address.starts_with("/env/")) {
      if (msg.args.size() != 1) throw std::invalid_argument("expected 1 numeric argument");
      set_env(msg.address.substr(5), osc::arg_as_float(msg, 0));
      return;
    }
  } catch (const std::exception& e) {
    ++stats_.osc_malformed;
    spdlog::warn("osc: malformed {}: {}", msg.address, e.what());
    return;
  }
  ++stats_.osc_unknown;
  spdlog::debug("osc: ignoring {}", msg.address);
}

void ControlLoop::set_collaborator(const kin::Vec3& position, double ramp_s) {
  if (!position.allFinite()) throw ValidationError("position", "coordinates must be finite");
  if (!(ramp_s >= 0.0) || !std::isfinite(ramp_s)) throw ValidationError("ramp_s", "must be a non-negative duration");
  if (ramp_s > 0.0) {
    glide_ = Glide{collaborator_, position, time(), ramp_s};
  } else {
    glide_.reset();
    collaborator_ = position;
  }
}

double ControlLoop::set_param(std::string_view address, double value, double smooth_ms) {
  const auto* entry = directory_.find(address);
  if (!entry) throw ValidationError("address", "no parameter '" + std::string(address) + "'");
  if (!std::isfinite(value)) throw ValidationError("value", "must be finite");
  if (!(smooth_ms >= 0.0) || !std::isfinite(smooth_ms)) throw ValidationError("smooth_ms", "must be non-negative");
  const double accepted = std::clamp(value, entry->info.min, entry->info.max);
  send(address, accepted, smooth_ms);
  return accepted;
}

const mapping::Route& ControlLoop::set_route(const mapping::Route& route) {
  try {
    mapping::validate_route(
        route, [&](std::string_view sink) { return sink_exists(sink); },
        [&](std::string_view name) { return env_.contains(std::string(name)); }, "route");
  } catch (const mapping::Error& e) {
    throw ValidationError(strip_route_prefix(e.where()), e.what());
  }
  auto it = std::find_if(mapping_.routes.begin(), mapping_.routes.end(),
                         [&](const mapping::Route& r) { return r.sink == route.sink; });
  if (it != mapping_.routes.end()) {
    *it = route;
    return *it;
  }
  mapping_.routes.push_back(route);
  return mapping_.routes.back();
}

void ControlLoop::delete_route(std::string_view sink) {
  auto it = std::find_if(mapping_.routes.begin(), mapping_.routes.end(),
                         [&](const mapping::Route& r) { return r.sink == sink; });
  if (it == mapping_.routes.end()) throw ValidationError("sink", "no route drives '" + std::string(sink) + "'");
  mapping_.routes.erase(it);
}

void ControlLoop::set_env(const std::string& name, double value) {
  if (name.empty() || name.find('/') != std::string::npos) throw ValidationError("name", "invalid signal name");
  if (!std::isfinite(value)) throw ValidationError("value", "must be finite");
  env_[name] = value;
}

void ControlLoop::apply(const ScriptAction& action) {
  std::visit(
      [&](const auto& a) {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, CollaboratorEvent>) {
          set_collaborator(kin::Vec3(a.position[0], a.position[1], a.position[2]), a.ramp_s);
        } else if constexpr (std::is_same_v<T, ParamEvent>) {
          set_param(a.address, a.value, a.smooth_ms);
        } else if constexpr (std::is_same_v<T, RouteEvent>) {
          set_route(a.route);
        } else if constexpr (std::is_same_v<T, DeleteRouteEvent>) {
          delete_route(a.sink);
        } else {
          set_env(a.name, a.value);
        }
      },
      action);
}

void ControlLoop::apply_due_events() {
  // Event t is due at the first tick whose time is >= t.
  while (next_event_ < script_.events.size() &&
         script_.events[next_event_].t * config_.control_rate <= double(tick_) + 1e-9) {
    try {
      apply(script_.events[next_event_].action);
    } catch (const ValidationError& e) {
      ++stats_.script_errors;
      spdlog::warn("script event {} rejected: {}", next_event_, e.what());
    }
    ++next_event_;
  }
}

bool ControlLoop::send(std::string_view address, double value, double smooth_ms) {
  const auto* entry = directory_.find(address);
  if (!entry || !std::isfinite(value)) return false;
  value = std::clamp(value, entry->info.min, entry->info.max);
  auto it = targets_.find(address);
  if (it->second == value) return true;
  if (!shared_.updates.push(EngineUpdate{entry->target, value, smooth_ms})) {
    ++stats_.queue_full;
    return false;
  }
  it->second = value;
  ++stats_.updates_sent;
  return true;
}

void ControlLoop::tick() {
  apply_due_events();
  const double t = time();
  if (glide_) {
    const double s = std::clamp((t - glide_->start) / glide_->duration, 0.0, 1.0);
    collaborator_ = glide_->from + s * (glide_->to - glide_->from);
    if (s >= 1.0) glide_.reset();
  }

  kin::CollaboratorState collab;
  collab.position = collaborator_;
  collab.timestamp = t;
  const auto step = kin::steer_towards(joints_, collab, config_.steering, dt_, config_.kinematics);
  if (step.near_singular) ++stats_.near_singular_ticks;
  joints_ = step.state;
  joints_.timestamp = t;
  chain_ = kin::forward_kinematics(joints_, config_.kinematics);

  const kin::Vec3& tcp = chain_.tcp.position;
  tcp_speed_ = have_previous_tcp_ ? (tcp - previous_tcp_).norm() / dt_ : 0.0;
  previous_tcp_ = tcp;
  have_previous_tcp_ = true;
  proximity_ = kin::proximity(collab, chain_.tcp);
  collab_distance_ = collaborator_.norm();

  for (const auto& route : mapping_.routes) {
    double x = 0.0;
    const auto& src = route.source;
    switch (src.kind) {
      case mapping::SignalKind::JointSpeed: x = std::abs(joints_.qdot[src.joint]); break;
      case mapping::SignalKind::JointPos: x = joints_.q[src.joint]; break;
      case mapping::SignalKind::TcpSpeed: x = tcp_speed_; break;
      case mapping::SignalKind::TcpHeight: x = tcp.z(); break;
      case mapping::SignalKind::Proximity: x = proximity_; break;
      case mapping::SignalKind::CollabDistance: x = collab_distance_; break;
      case mapping::SignalKind::Env: {
        auto it = env_.find(src.env_name);
        if (it == env_.end()) {
          ++stats_.mapping_errors;
          continue;
        }
        x = it->second;
        break;
      }
    }
    send(route.sink, mapping::evaluate_route(route, x), route.smooth_ms);
  }

  AudioSignals& s = shared_.signals.back();
  for (int i = 0; i < kin::kJoints; ++i) s.joint_speed[std::size_t(i)] = std::abs(joints_.qdot[i]);
  for (int i = 0; i < 3; ++i) s.tcp[std::size_t(i)] = tcp[i];
  s.tick = tick_;
  shared_.signals.publish();
  meters_ = shared_.meters.read();

  build_egress();
  ++tick_;
}

void ControlLoop::build_egress() {
  egress_.clear();
  const auto& tcp = chain_.tcp;
  egress_.push_back({"/tcp/pose",
                     {float(tcp.position.x()), float(tcp.position.y()), float(tcp.position.z()), float(tcp.rpy[0]),
                      float(tcp.rpy[1]), float(tcp.rpy[2])}});
  for (int i = 0; i < kin::kJoints; ++i) {
    const auto& rpy = chain_.links[std::size_t(i)].rpy;
    egress_.push_back({"/link/" + std::to_string(i) + "/rpy", {float(rpy[0]), float(rpy[1]), float(rpy[2])}});
  }
}

// --- AudioLoop --------------------------------------------------------------

AudioLoop::AudioLoop(const SessionConfig& config, std::vector<FeedData> feeds, SharedChannels& shared)
    : shared_(shared), sample_rate_(config.sample_rate), block_size_(config.block_size),
      voice_params_(config.voices), drone_params_(config.drone),
      drone_gain_db_(0.0, config.sample_rate), mix_(config.mix, config.sample_rate),
      graph_(config.graph, engine_inputs(feeds.size()), config.sample_rate, config.block_size),
      output_node_(*graph_.node_index(config.output_node)), layout_(config.spatial.layout()),
      spatializer_(layout_, config.spatial.params) {
  for (std::size_t i = 0; i < kin::kJoints; ++i) {
    voice_states_.emplace_back(voice_seed(config.seed, i));
    voice_gain_db_[i] = dsp::SmoothedParam(config.voice_gain_db[i], sample_rate_);
  }
  for (std::size_t f = 0; f < feeds.size(); ++f) {
    feeds_.emplace_back(feeds[f], f < config.feeds.size() ? config.feeds[f].loop : true);
  }
  source_.listener = Eigen::Vector2d(config.spatial.listener[0], config.spatial.listener[1]);

  voices_.assign(kin::kJoints, std::vector<float>(block_size_, 0.0f));
  feed_buffers_.assign(feeds_.size(), std::vector<float>(block_size_, 0.0f));
  consequential_.assign(block_size_, 0.0f);
  synthetic_.assign(block_size_, 0.0f);
  blend_.assign(block_size_, 0.0f);
  // Same order as engine_inputs().
  externals_.emplace_back(blend_.data(), block_size_);
  externals_.emplace_back(consequential_.data(), block_size_);
  externals_.emplace_back(synthetic_.data(), block_size_);
  for (const auto& v : voices_) externals_.emplace_back(v.data(), block_size_);
  for (const auto& f : feed_buffers_) externals_.emplace_back(f.data(), block_size_);
  out_ = SampleArray<float>::Zero(static_cast<Eigen::Index>(layout_.channel_count()),
                                  static_cast<Eigen::Index>(block_size_));
}

void AudioLoop::apply(const EngineUpdate& u) {
  switch (u.target.kind) {
    case SinkKind::Graph: graph_.set_param(u.target.handle, u.value, u.smooth_ms); break;
    case SinkKind::Mix: mix_.set_target(std::clamp(u.value, 0.0, 1.0), u.smooth_ms); break;
    case SinkKind::VoiceGain:
      if (u.target.index < voice_gain_db_.size()) voice_gain_db_[u.target.index].set_target(u.value, u.smooth_ms);
      break;
    case SinkKind::DroneGain: drone_gain_db_.set_target(u.value, u.smooth_ms); break;
  }
}

namespace {

// out += x * gain, with the gain smoothed per sample while it moves.
void accumulate(std::span<float> x, dsp::SmoothedParam& gain_db, std::span<float> out) {
  if (gain_db.settled()) {
    const auto g = static_cast<float>(db_to_linear(gain_db.current()));
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] *= g;
      out[i] += x[i];
    }
    return;
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = static_cast<float>(x[i] * db_to_linear(gain_db.next()));
    out[i] += x[i];
  }
}

}  // namespace

void AudioLoop::process(std::size_t frames) {
  frames_ = frames = std::min(frames, block_size_);
  EngineUpdate update;
  while (shared_.updates.pop(update)) apply(update);
  const AudioSignals& sig = shared_.signals.read();

  std::span<float> cons(consequential_.data(), frames);
  std::span<float> syn(synthetic_.data(), frames);
  std::fill(cons.begin(), cons.end(), 0.0f);
  std::fill(syn.begin(), syn.end(), 0.0f);
  for (std::size_t i = 0; i < kin::kJoints; ++i) {
    std::span<float> v(voices_[i].data(), frames);
    motor_voice(sig.joint_speed[i], voice_params_[i], voice_states_[i], sample_rate_, v);
    accumulate(v, voice_gain_db_[i], cons);
  }
  for (std::size_t f = 0; f < feeds_.size(); ++f) {
    std::span<float> x(feed_buffers_[f].data(), frames);
    feeds_[f].next(x);
    for (std::size_t i = 0; i < frames; ++i) cons[i] += x[i];
  }
  drone(sig.tcp[2], drone_params_, drone_state_, sample_rate_, std::span<float>(blend_.data(), frames));
  accumulate(std::span<float>(blend_.data(), frames), drone_gain_db_, syn);

  for (std::size_t i = 0; i < frames; ++i) {
    const auto m = static_cast<float>(mix_.next());
    blend_[i] = (1.0f - m) * cons[i] + m * syn[i];
  }

  graph_.process(externals_, frames);
  source_.position = Eigen::Vector3d(sig.tcp[0], sig.tcp[1], sig.tcp[2]);
  spatializer_.process(graph_.output(output_node_, frames), source_, out_);

  AudioMeters& meters = shared_.meters.back();
  const std::size_t channels = std::min(layout_.channel_count(), kMaxChannels);
  for (std::size_t c = 0; c < channels; ++c) {
    float* row = out_.data() + c * block_size_;
    double acc = 0.0;
    for (std::size_t i = 0; i < frames; ++i) {
      if (!std::isfinite(row[i])) {
        row[i] = 0.0f;
        ++nonfinite_;
      }
      acc += double(row[i]) * double(row[i]);
    }
    meters.rms[c] = frames > 0 ? std::sqrt(acc / double(frames)) : 0.0;
  }
  meters.channels = channels;
  meters.block = blocks_;
  meters.nonfinite = nonfinite_;
  shared_.meters.publish();
  ++blocks_;
}

// --- Engine -----------------------------------------------------------------

std::uint32_t voice_seed(std::uint64_t session_seed, std::size_t voice) {
  // splitmix64 finalizer
  std::uint64_t z = session_seed + 0x9e3779b97f4a7c15ull * (voice + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  z ^= z >> 31;
  return static_cast<std::uint32_t>(z >> 32);
}

std::vector<AudioLoop::FeedData> load_feeds(const SessionConfig& config) {
  std::vector<AudioLoop::FeedData> feeds;
  for (const auto& f : config.feeds) {
    feeds.push_back(std::make_shared<const std::vector<float>>(wav::load_mono(f.path, config.sample_rate)));
  }
  return feeds;
}

void validate_script(const SessionConfig& config, const TrajectoryScript& script) {
  std::set<std::string, std::less<>> envs;
  for (const auto& [name, value] : config.env) envs.insert(name);
  double last = 0.0;
  for (std::size_t i = 0; i < script.events.size(); ++i) {
    const std::string path = "script.events[" + std::to_string(i) + "]";
    const auto& ev = script.events[i];
    if (!std::isfinite(ev.t) || ev.t < 0.0) throw ConfigError(ConfigErrorKind::ConfigInvalid, path + ".t", "bad time");
    if (ev.t < last) throw ConfigError(ConfigErrorKind::ScriptUnordered, path + ".t", "event times must be non-decreasing");
    last = ev.t;
    if (const auto* p = std::get_if<ParamEvent>(&ev.action)) {
      if (!sink_exists(config, p->address)) {
        throw ConfigError(ConfigErrorKind::ConfigInvalid, path + ".param.address", "no parameter '" + p->address + "'");
      }
    } else if (const auto* r = std::get_if<RouteEvent>(&ev.action)) {
      try {
        mapping::validate_route(
            r->route, [&](std::string_view s) { return sink_exists(config, s); },
            [&](std::string_view n) { return envs.contains(n); }, path + ".route");
      } catch (const mapping::Error& e) {
        throw ConfigError(ConfigErrorKind::ConfigInvalid, e.where(), e.what());
      }
    } else if (const auto* e = std::get_if<EnvEvent>(&ev.action)) {
      envs.insert(e->name);
    }
  }
}

Engine::Engine(const SessionConfig& config, TrajectoryScript script)
    : Engine(config, std::move(script), load_feeds(config)) {}

Engine::Engine(const SessionConfig& config, TrajectoryScript script, std::vector<AudioLoop::FeedData> feeds)
    : config_(config), shared_(std::make_unique<SharedChannels>()) {
  validate(config_);
  validate_script(config_, script);
  control_ = std::make_unique<ControlLoop>(config_, std::move(script), *shared_);
  audio_ = std::make_unique<AudioLoop>(config_, std::move(feeds), *shared_);
}

std::uint64_t tick_sample(const SessionConfig& config, std::uint64_t k) {
  return static_cast<std::uint64_t>(std::ceil(double(k) * config.sample_rate / config.control_rate - 1e-9));
}

std::size_t Engine::step(std::size_t max_frames, std::vector<float>* capture) {
  while (tick_sample(control_->ticks()) <= samples_) control_->tick();
  const std::size_t frames = std::min(max_frames, config_.block_size);
  audio_->process(frames);
  if (capture) append_interleaved(audio_->output(), frames, *capture);
  samples_ += frames;
  return frames;
}

void append_interleaved(const SampleArray<float>& block, std::size_t frames, std::vector<float>& out) {
  const auto channels = static_cast<std::size_t>(block.rows());
  const std::size_t base = out.size();
  out.resize(base + frames * channels);
  for (std::size_t i = 0; i < frames; ++i) {
    for (std::size_t c = 0; c < channels; ++c) out[base + i * channels + c] = block(Eigen::Index(c), Eigen::Index(i));
  }
}

std::vector<float> render_samples(const SessionConfig& config, const TrajectoryScript& script, double duration) {
  if (!std::isfinite(duration) || duration < 0.0) {
    throw ConfigError(ConfigErrorKind::ConfigInvalid, "duration", "must be a non-negative number of seconds");
  }
  Engine engine(config, script);
  const auto total = static_cast<std::uint64_t>(std::llround(duration * config.sample_rate));
  std::vector<float> out;
  out.reserve(total * engine.audio().channels());
  while (engine.samples() < total) engine.step(static_cast<std::size_t>(total - engine.samples()), &out);
  return out;
}

std::vector<std::uint8_t> render_offline(const SessionConfig& config, const TrajectoryScript& script, double duration) {
  const auto samples = render_samples(config, script, duration);
  return wav::encode_float32(samples, static_cast<int>(config.spatial.layout().channel_count()),
                             static_cast<std::uint32_t>(config.sample_rate));
}

}  // namespace rbs
