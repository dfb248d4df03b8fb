// Routes kinematic and environment signals to DSP parameter targets through
// range normalization, a response curve and denormalization.
#pragma once

#include <nlohmann/json.hpp>

#include <compare>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rbs::mapping {

enum class SignalKind { JointSpeed, JointPos, TcpSpeed, TcpHeight, Proximity, CollabDistance, Env };

struct SignalId {
  SignalKind kind = SignalKind::TcpSpeed;
  int joint = 0;         // JointSpeed / JointPos only
  std::string env_name;  // Env only

  static SignalId joint_speed(int i) { return {SignalKind::JointSpeed, i, {}}; }
  static SignalId joint_pos(int i) { return {SignalKind::JointPos, i, {}}; }
  static SignalId tcp_speed() { return {SignalKind::TcpSpeed, 0, {}}; }
  static SignalId tcp_height() { return {SignalKind::TcpHeight, 0, {}}; }
  static SignalId proximity() { return {SignalKind::Proximity, 0, {}}; }
  static SignalId collab_distance() { return {SignalKind::CollabDistance, 0, {}}; }
  static SignalId env(std::string name) { return {SignalKind::Env, 0, std::move(name)}; }

  auto operator<=>(const SignalId&) const = default;
};

/// Text forms: "joint_speed[i]", "joint_pos[i]", "tcp_speed", "tcp_height",
/// "proximity", "collab_distance", "env:<name>".
std::string to_string(const SignalId& id);
std::optional<SignalId> parse_signal(std::string_view text);

enum class CurveKind { Linear, Exponential, Logarithmic };

inline constexpr double kDefaultCurveK = 4.0;

struct Curve {
  CurveKind kind = CurveKind::Linear;
  double k = kDefaultCurveK;  // unused by Linear

  bool operator==(const Curve& other) const {
    return kind == other.kind && (kind == CurveKind::Linear || k == other.k);
  }
};

/// linear: y = x; exponential(k): y = (e^{kx} - 1) / (e^k - 1);
/// logarithmic(k): the inverse of exponential(k), y = ln(1 + x (e^k - 1)) / k.
/// Endpoints 0 and 1 map to themselves exactly.
double apply_curve(double x, const Curve& curve);

struct Range {
  double lo = 0.0;
  double hi = 1.0;
  bool operator==(const Range&) const = default;
};

struct Route {
  SignalId source;
  Range in_range;
  Curve curve;
  Range out_range;
  bool clamp = true;
  double smooth_ms = 20.0;
  std::string sink;

  bool operator==(const Route&) const = default;
};

struct MappingSpec {
  std::vector<Route> routes;
  bool operator==(const MappingSpec&) const = default;
};

enum class ErrorKind { SyntaxError, UnknownSink, DuplicateSink, BadRange, BadCurve, UnknownSignal, MissingSignal };

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  /// `where` is a field path such as "routes[2].in"; `line` is the 1-based
  /// source line for syntax errors, 0 otherwise.
  Error(ErrorKind kind, std::string where, const std::string& detail, int line = 0);
  ErrorKind kind() const noexcept { return kind_; }
  const std::string& where() const noexcept { return where_; }
  int line() const noexcept { return line_; }

 private:
  ErrorKind kind_;
  std::string where_;
  int line_;
};

/// Decides whether a sink address names a real parameter.
using SinkResolver = std::function<bool(std::string_view)>;
/// Decides whether an env signal name is declared.
using EnvResolver = std::function<bool(std::string_view)>;

/// Validates a single route (ranges, curve, signal) and, when given, its sink.
void validate_route(const Route& route, const SinkResolver& sinks = {}, const EnvResolver& envs = {},
                    const std::string& where = "route");
void validate(const MappingSpec& spec, const SinkResolver& sinks = {}, const EnvResolver& envs = {});

Route route_from_json(const nlohmann::json& j, const std::string& where = "route");
nlohmann::json route_to_json(const Route& route);

/// Parses {"routes": [...]} or a bare route array.
MappingSpec from_json(const nlohmann::json& j);
nlohmann::json to_json(const MappingSpec& spec);

/// Parses a mapping document. Syntax errors carry the offending line.
MappingSpec parse_mapping(std::string_view text, const SinkResolver& sinks = {}, const EnvResolver& envs = {});
/// Canonical text form; parse_mapping(serialize(s)) == s.
std::string serialize(const MappingSpec& spec);

using SignalSnapshot = std::map<SignalId, double>;

struct SinkValue {
  std::string sink;
  double value = 0.0;
  double smooth_ms = 0.0;
  bool operator==(const SinkValue&) const = default;
};

/// Value of a single route for input x: clamp to in_range, normalize, curve,
/// denormalize to out_range.
double evaluate_route(const Route& route, double x);

/// Evaluates every route in order. Throws MissingSignal when a route source
/// is absent from the snapshot.
std::vector<SinkValue> evaluate(const MappingSpec& spec, const SignalSnapshot& signals);

/// Line number (1-based) of byte offset `offset` in `text`.
int line_of_offset(std::string_view text, std::size_t offset);

}  // namespace rbs::mapping
