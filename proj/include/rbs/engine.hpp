// The two halves of the engine and the offline driver.
//
// ControlLoop owns robot, collaborator and mapping state and runs at the
// control rate. AudioLoop owns all DSP state and renders blocks. They share
// only a bounded wait-free parameter queue (control -> audio) and two triple
// buffers (signals control -> audio, meters audio -> control).
#pragma once

#include "rbs/audio.hpp"
#include "rbs/config.hpp"
#include "rbs/dsp.hpp"
#include "rbs/kinematics.hpp"
#include "rbs/mapping.hpp"
#include "rbs/osc.hpp"
#include "rbs/sources.hpp"
#include "rbs/spatializer.hpp"
#include "rbs/triple_buffer.hpp"

#include <boost/lockfree/spsc_queue.hpp>

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace rbs {

enum class SinkKind : std::uint8_t { Graph, Mix, VoiceGain, DroneGain };

struct SinkTarget {
  SinkKind kind = SinkKind::Graph;
  dsp::ParamHandle handle;  // Graph only
  std::uint32_t index = 0;  // VoiceGain only
};

struct EngineUpdate {
  SinkTarget target;
  double value = 0.0;
  double smooth_ms = dsp::kDefaultSmoothingMs;
};

/// Every addressable parameter of a session: engine parameters plus all graph
/// node parameters.
class ParamDirectory {
 public:
  struct Entry {
    SinkTarget target;
    dsp::ParamInfo info;
    double initial = 0.0;
  };

  explicit ParamDirectory(const SessionConfig& config);
  const Entry* find(std::string_view address) const;
  const std::map<std::string, Entry, std::less<>>& entries() const { return entries_; }

 private:
  std::map<std::string, Entry, std::less<>> entries_;
};

struct AudioSignals {
  std::array<double, kin::kJoints> joint_speed{};
  std::array<double, 3> tcp{};
  std::uint64_t tick = 0;
};

struct AudioMeters {
  std::array<double, kMaxChannels> rms{};
  std::size_t channels = 0;
  std::uint64_t block = 0;
  std::uint64_t nonfinite = 0;  // samples replaced by silence so far
};

inline constexpr std::size_t kUpdateQueueCapacity = 4096;
using UpdateQueue = boost::lockfree::spsc_queue<EngineUpdate, boost::lockfree::capacity<kUpdateQueueCapacity>>;

struct SharedChannels {
  UpdateQueue updates;
  TripleBuffer<AudioSignals> signals;
  TripleBuffer<AudioMeters> meters;
};

struct ControlStats {
  std::uint64_t osc_unknown = 0;
  std::uint64_t osc_malformed = 0;
  std::uint64_t queue_full = 0;
  std::uint64_t mapping_errors = 0;
  std::uint64_t near_singular_ticks = 0;
  std::uint64_t updates_sent = 0;
  std::uint64_t script_errors = 0;
};

/// Raised by ControlLoop mutations that fail validation. `field` names the
/// offending input (e.g. "sink", "address", "route.in").
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string field, const std::string& reason)
      : std::runtime_error(field + ": " + reason), field_(std::move(field)), reason_(reason) {}
  const std::string& field() const noexcept { return field_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string field_;
  std::string reason_;
};

class ControlLoop {
 public:
  ControlLoop(const SessionConfig& config, TrajectoryScript script, SharedChannels& shared);

  /// Applies one inbound OSC packet (bundles are flattened).
  void ingress(const osc::Packet& packet);
  void ingress(const osc::Message& message);

  /// Runs one control tick: due script events, collaborator glide, steering,
  /// signals, mapping, parameter updates, signal publication and OSC egress.
  void tick();

  /// Messages built by the most recent tick: "/tcp/pose" then "/link/<i>/rpy".
  const std::vector<osc::Message>& egress() const { return egress_; }

  // Mutations shared by scripts, OSC and the control API. They throw
  // ValidationError and take effect on the next tick.
  void set_collaborator(const kin::Vec3& position, double ramp_s = 0.0);
  /// Returns the accepted (clamped) value.
  double set_param(std::string_view address, double value, double smooth_ms = dsp::kDefaultSmoothingMs);
  /// Replaces the route driving the same sink, or appends. Returns the route.
  const mapping::Route& set_route(const mapping::Route& route);
  void delete_route(std::string_view sink);
  void set_env(const std::string& name, double value);

  const SessionConfig& config() const { return config_; }
  const ParamDirectory& directory() const { return directory_; }
  std::uint64_t ticks() const { return tick_; }
  /// Time of the next tick, s.
  double time() const { return double(tick_) / config_.control_rate; }
  const kin::JointState& joints() const { return joints_; }
  const kin::ChainPoses& chain() const { return chain_; }
  const kin::Vec3& collaborator() const { return collaborator_; }
  double proximity() const { return proximity_; }
  double tcp_speed() const { return tcp_speed_; }
  double collab_distance() const { return collab_distance_; }
  const mapping::MappingSpec& mapping() const { return mapping_; }
  const std::map<std::string, double>& env() const { return env_; }
  /// Latest parameter target per address, as sent to the audio side.
  const std::map<std::string, double, std::less<>>& targets() const { return targets_; }
  const AudioMeters& meters() const { return meters_; }
  const ControlStats& stats() const { return stats_; }
  bool sink_exists(std::string_view address) const { return directory_.find(address) != nullptr; }

 private:
  struct Glide {
    kin::Vec3 from = kin::Vec3::Zero();
    kin::Vec3 to = kin::Vec3::Zero();
    double start = 0.0;
    double duration = 0.0;
  };

  void apply_due_events();
  void apply(const ScriptAction& action);
  bool send(std::string_view address, double value, double smooth_ms);
  void build_egress();

  SessionConfig config_;
  TrajectoryScript script_;
  std::size_t next_event_ = 0;
  SharedChannels& shared_;
  ParamDirectory directory_;
  double dt_;

  kin::JointState joints_;
  kin::ChainPoses chain_;
  kin::Vec3 collaborator_;
  std::optional<Glide> glide_;
  kin::Vec3 previous_tcp_;
  bool have_previous_tcp_ = false;
  double proximity_ = 0.0;
  double tcp_speed_ = 0.0;
  double collab_distance_ = 0.0;

  mapping::MappingSpec mapping_;
  std::map<std::string, double> env_;
  std::map<std::string, double, std::less<>> targets_;
  AudioMeters meters_;
  ControlStats stats_;
  std::uint64_t tick_ = 0;
  std::vector<osc::Message> egress_;
};

class AudioLoop {
 public:
  using FeedData = std::shared_ptr<const std::vector<float>>;

  AudioLoop(const SessionConfig& config, std::vector<FeedData> feeds, SharedChannels& shared);

  std::size_t channels() const { return layout_.channel_count(); }
  std::size_t block_size() const { return block_size_; }

  /// Renders `frames` (<= block size) into output(). Performs no allocation
  /// and takes no locks.
  void process(std::size_t frames);

  /// channels x block_size; only the first `frames` columns of the last
  /// process() call are meaningful.
  const SampleArray<float>& output() const { return out_; }
  std::span<const float> consequential() const { return {consequential_.data(), frames_}; }
  std::span<const float> synthetic() const { return {synthetic_.data(), frames_}; }
  std::span<const float> blended() const { return {blend_.data(), frames_}; }
  const dsp::Graph& graph() const { return graph_; }
  const dsp::SmoothedParam& mix() const { return mix_; }
  std::uint64_t blocks() const { return blocks_; }
  std::uint64_t nonfinite() const { return nonfinite_; }

 private:
  void apply(const EngineUpdate& update);

  SharedChannels& shared_;
  double sample_rate_;
  std::size_t block_size_;
  std::size_t frames_ = 0;
  std::array<MotorVoiceParams, kin::kJoints> voice_params_;
  std::vector<MotorVoiceState> voice_states_;
  std::array<dsp::SmoothedParam, kin::kJoints> voice_gain_db_;
  DroneParams drone_params_;
  DroneState drone_state_;
  dsp::SmoothedParam drone_gain_db_;
  dsp::SmoothedParam mix_;
  std::vector<FileFeed> feeds_;
  dsp::Graph graph_;
  std::size_t output_node_;
  spatial::SpeakerLayout layout_;
  spatial::Spatializer spatializer_;
  spatial::SourcePosition source_;

  std::vector<std::vector<float>> voices_;
  std::vector<std::vector<float>> feed_buffers_;
  std::vector<float> consequential_;
  std::vector<float> synthetic_;
  std::vector<float> blend_;
  std::vector<std::span<const float>> externals_;
  SampleArray<float> out_;
  std::uint64_t blocks_ = 0;
  std::uint64_t nonfinite_ = 0;
};

/// Checks script events against the session (parameter addresses, routes,
/// ordering). Throws ConfigError.
void validate_script(const SessionConfig& config, const TrajectoryScript& script);

/// Per-voice noise seeds derived from the session seed.
std::uint32_t voice_seed(std::uint64_t session_seed, std::size_t voice);

/// Loads every configured file feed at the session sample rate.
std::vector<AudioLoop::FeedData> load_feeds(const SessionConfig& config);

/// First sample at or after which control tick k runs.
std::uint64_t tick_sample(const SessionConfig& config, std::uint64_t k);

/// Both halves wired together, driven on one thread on the exact sample grid:
/// before the block starting at sample n, every tick k with
/// tick_sample(k) <= n has run.
class Engine {
 public:
  Engine(const SessionConfig& config, TrajectoryScript script = {});
  Engine(const SessionConfig& config, TrajectoryScript script, std::vector<AudioLoop::FeedData> feeds);

  ControlLoop& control() { return *control_; }
  AudioLoop& audio() { return *audio_; }
  const ControlLoop& control() const { return *control_; }
  const AudioLoop& audio() const { return *audio_; }

  std::uint64_t tick_sample(std::uint64_t k) const { return rbs::tick_sample(config_, k); }
  std::uint64_t samples() const { return samples_; }

  /// Runs due ticks and one block of up to `max_frames`; appends interleaved
  /// output to `capture` when given. Returns the frame count.
  std::size_t step(std::size_t max_frames, std::vector<float>* capture = nullptr);

 private:
  SessionConfig config_;
  std::unique_ptr<SharedChannels> shared_;
  std::unique_ptr<ControlLoop> control_;
  std::unique_ptr<AudioLoop> audio_;
  std::uint64_t samples_ = 0;
};

/// Interleaves frames [0, frames) of `block` onto `out`.
void append_interleaved(const SampleArray<float>& block, std::size_t frames, std::vector<float>& out);

/// Renders `duration` seconds; interleaved float samples.
std::vector<float> render_samples(const SessionConfig& config, const TrajectoryScript& script, double duration);
/// As render_samples, encoded as a float32 WAV. Throws ConfigError
/// (ConfigInvalid, ScriptUnordered).
std::vector<std::uint8_t> render_offline(const SessionConfig& config, const TrajectoryScript& script, double duration);

}  // namespace rbs
