// Session configuration and trajectory scripts, both stored as JSON.
//
// load_config() fills every missing key with its default and validates the
// whole document; save_config() always writes the complete, normalized form,
// so save(load(x)) is the canonical version of x.
#pragma once

#include "rbs/dsp.hpp"
#include "rbs/kinematics.hpp"
#include "rbs/mapping.hpp"
#include "rbs/sources.hpp"
#include "rbs/spatializer.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace rbs {

enum class ConfigErrorKind { SyntaxError, ConfigInvalid, ScriptUnordered, FileUnreadable };

std::string_view to_string(ConfigErrorKind kind);

class ConfigError : public std::runtime_error {
 public:
  /// `path` is a field path like "graph.nodes[1].params.q"; `line` is set for
  /// syntax errors only.
  ConfigError(ConfigErrorKind kind, std::string path, const std::string& reason, int line = 0);
  ConfigErrorKind kind() const noexcept { return kind_; }
  const std::string& path() const noexcept { return path_; }
  const std::string& reason() const noexcept { return reason_; }
  int line() const noexcept { return line_; }

 private:
  ConfigErrorKind kind_;
  std::string path_;
  std::string reason_;
  int line_;
};

enum class RunMode { Realtime, Offline };

struct FeedConfig {
  std::string path;  // relative paths resolve against the config file
  bool loop = true;
  bool operator==(const FeedConfig&) const = default;
};

struct SpatialConfig {
  std::vector<double> ring_deg = {45.0, 135.0, 225.0, 315.0};
  bool point_source = true;
  spatial::SpatialParams params;
  std::array<double, 2> listener = {0.0, 0.0};

  spatial::SpeakerLayout layout() const;
  bool operator==(const SpatialConfig&) const = default;
};

struct OscConfig {
  std::uint16_t in_port = 9000;
  std::uint16_t out_port = 9001;
  std::string out_host = "127.0.0.1";
  bool operator==(const OscConfig&) const = default;
};

inline constexpr std::size_t kMaxChannels = 32;

struct SessionConfig {
  double sample_rate = 48000.0;
  std::size_t block_size = 256;
  double control_rate = 100.0;
  RunMode mode = RunMode::Offline;
  std::uint64_t seed = 1;

  kin::KinematicParams kinematics = kin::ur10_params();
  kin::Joints initial_q = default_initial_q();
  kin::SteeringOptions steering;
  std::array<double, 3> collaborator = {1.0, 0.0, 0.6};

  std::array<MotorVoiceParams, kin::kJoints> voices{};
  std::array<double, kin::kJoints> voice_gain_db = {-12.0, -12.0, -12.0, -12.0, -12.0, -12.0};
  DroneParams drone;
  std::vector<FeedConfig> feeds;
  double mix = 0.5;

  std::vector<dsp::NodeSpec> graph = default_graph();
  std::string output_node = "master";
  mapping::MappingSpec mapping = default_mapping();
  std::map<std::string, double> env;

  SpatialConfig spatial;
  OscConfig osc;
  std::uint16_t api_port = 8080;

  static kin::Joints default_initial_q();
  static std::vector<dsp::NodeSpec> default_graph();
  static mapping::MappingSpec default_mapping();

  /// Samples between control ticks.
  double tick_interval() const { return sample_rate / control_rate; }

  bool operator==(const SessionConfig&) const = default;
};

/// Graph inputs supplied by the engine, in this order: "blend", "consequential",
/// "synthetic", "voice0".."voice5", then "feed0".. for each file feed.
std::vector<std::string> engine_inputs(std::size_t feed_count);

/// Engine parameters living outside the graph: "blend.mix",
/// "voice<i>.gain_db" and "drone.gain_db".
std::optional<dsp::ParamInfo> engine_param(std::string_view address);

/// True when `address` names an engine or graph parameter of `config`.
bool sink_exists(const SessionConfig& config, std::string_view address);

/// Throws ConfigError(ConfigInvalid) naming the first offending field.
void validate(const SessionConfig& config);

SessionConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const SessionConfig& config);

SessionConfig parse_config(std::string_view text);
std::string serialize_config(const SessionConfig& config);

SessionConfig load_config(const std::filesystem::path& path);
void save_config(const SessionConfig& config, const std::filesystem::path& path);

// --- Trajectory scripts -----------------------------------------------------

struct CollaboratorEvent {
  std::array<double, 3> position{};
  double ramp_s = 0.0;  // linear glide from the current position
  bool operator==(const CollaboratorEvent&) const = default;
};

struct ParamEvent {
  std::string address;
  double value = 0.0;
  double smooth_ms = dsp::kDefaultSmoothingMs;
  bool operator==(const ParamEvent&) const = default;
};

struct RouteEvent {
  mapping::Route route;
  bool operator==(const RouteEvent&) const = default;
};

struct DeleteRouteEvent {
  std::string sink;
  bool operator==(const DeleteRouteEvent&) const = default;
};

struct EnvEvent {
  std::string name;
  double value = 0.0;
  bool operator==(const EnvEvent&) const = default;
};

using ScriptAction = std::variant<CollaboratorEvent, ParamEvent, RouteEvent, DeleteRouteEvent, EnvEvent>;

struct ScriptEvent {
  double t = 0.0;  // s
  ScriptAction action;
  bool operator==(const ScriptEvent&) const = default;
};

struct TrajectoryScript {
  std::vector<ScriptEvent> events;
  bool operator==(const TrajectoryScript&) const = default;
};

/// Throws ScriptUnordered when event times decrease.
TrajectoryScript parse_script(std::string_view text);
TrajectoryScript load_script(const std::filesystem::path& path);
std::string serialize_script(const TrajectoryScript& script);

std::string read_text(const std::filesystem::path& path);

}  // namespace rbs
