#include "rbs/mapping.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

namespace rbs::mapping {

using nlohmann::json;

std::string to_string(const SignalId& id) {
  switch (id.kind) {
    case SignalKind::JointSpeed: return "joint_speed[" + std::to_string(id.joint) + "]";
    case SignalKind::JointPos: return "joint_pos[" + std::to_string(id.joint) + "]";
    case SignalKind::TcpSpeed: return "tcp_speed";
    case SignalKind::TcpHeight: return "tcp_height";
    case SignalKind::Proximity: return "proximity";
    case SignalKind::CollabDistance: return "collab_distance";
    case SignalKind::Env: return "env:" + id.env_name;
  }
  return {};
}

std::optional<SignalId> parse_signal(std::string_view text) {
  if (text == "tcp_speed") return SignalId::tcp_speed();
  if (text == "tcp_height") return SignalId::tcp_height();
  if (text == "proximity") return SignalId::proximity();
  if (text == "collab_distance") return SignalId::collab_distance();
  if (text.starts_with("env:")) {
    auto name = text.substr(4);
    if (name.empty()) return std::nullopt;
    return SignalId::env(std::string(name));
  }
  for (auto [prefix, kind] : {std::pair{std::string_view("joint_speed["), SignalKind::JointSpeed},
                              std::pair{std::string_view("joint_pos["), SignalKind::JointPos}}) {
    if (!text.starts_with(prefix) || !text.ends_with("]")) continue;
    auto digits = text.substr(prefix.size(), text.size() - prefix.size() - 1);
    int i = -1;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), i);
    if (ec != std::errc{} || ptr != digits.data() + digits.size() || i < 0 || i > 5) return std::nullopt;
    return SignalId{kind, i, {}};
  }
  return std::nullopt;
}

double apply_curve(double x, const Curve& curve) {
  if (!(x > 0.0)) return 0.0;
  if (x >= 1.0) return 1.0;
  switch (curve.kind) {
    case CurveKind::Linear: return x;
    case CurveKind::Exponential: return std::expm1(curve.k * x) / std::expm1(curve.k);
    case CurveKind::Logarithmic: return std::log1p(x * std::expm1(curve.k)) / curve.k;
  }
  return x;
}

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::SyntaxError: return "SyntaxError";
    case ErrorKind::UnknownSink: return "UnknownSink";
    case ErrorKind::DuplicateSink: return "DuplicateSink";
    case ErrorKind::BadRange: return "BadRange";
    case ErrorKind::BadCurve: return "BadCurve";
    case ErrorKind::UnknownSignal: return "UnknownSignal";
    case ErrorKind::MissingSignal: return "MissingSignal";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, std::string where, const std::string& detail, int line)
    : std::runtime_error(std::string(to_string(kind)) + " at " + where +
                         (line > 0 ? " (line " + std::to_string(line) + ")" : std::string()) + ": " + detail),
      kind_(kind), where_(std::move(where)), line_(line) {}

void validate_route(const Route& route, const SinkResolver& sinks, const EnvResolver& envs, const std::string& where) {
  const auto& in = route.in_range;
  const auto& out = route.out_range;
  if (!std::isfinite(in.lo) || !std::isfinite(in.hi) || !(in.lo < in.hi)) {
    throw Error(ErrorKind::BadRange, where + ".in", "in_range requires finite lo < hi");
  }
  if (!std::isfinite(out.lo) || !std::isfinite(out.hi)) {
    throw Error(ErrorKind::BadRange, where + ".out", "out_range must be finite");
  }
  if (!std::isfinite(route.smooth_ms) || route.smooth_ms < 0) {
    throw Error(ErrorKind::BadRange, where + ".smooth_ms", "smooth_ms must be >= 0");
  }
  if (route.curve.kind != CurveKind::Linear && !(std::isfinite(route.curve.k) && route.curve.k > 0)) {
    throw Error(ErrorKind::BadCurve, where + ".k", "curve k must be positive");
  }
  if (route.source.kind == SignalKind::JointSpeed || route.source.kind == SignalKind::JointPos) {
    if (route.source.joint < 0 || route.source.joint > 5) {
      throw Error(ErrorKind::UnknownSignal, where + ".source", "joint index out of range");
    }
  }
  if (route.source.kind == SignalKind::Env && envs && !envs(route.source.env_name)) {
    throw Error(ErrorKind::UnknownSignal, where + ".source", "undeclared env signal '" + route.source.env_name + "'");
  }
  if (route.sink.empty()) throw Error(ErrorKind::UnknownSink, where + ".sink", "sink is empty");
  if (sinks && !sinks(route.sink)) {
    throw Error(ErrorKind::UnknownSink, where + ".sink", "no parameter '" + route.sink + "'");
  }
}

void validate(const MappingSpec& spec, const SinkResolver& sinks, const EnvResolver& envs) {
  std::set<std::string, std::less<>> seen;
  for (std::size_t i = 0; i < spec.routes.size(); ++i) {
    const std::string where = "routes[" + std::to_string(i) + "]";
    validate_route(spec.routes[i], sinks, envs, where);
    if (!seen.insert(spec.routes[i].sink).second) {
      throw Error(ErrorKind::DuplicateSink, where + ".sink", "sink '" + spec.routes[i].sink + "' already routed");
    }
  }
}

namespace {

Range range_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw Error(ErrorKind::BadRange, where, "expected [lo, hi]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

const json& require(const json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) throw Error(ErrorKind::SyntaxError, where + "." + key, "missing field");
  return *it;
}

}  // namespace

Route route_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorKind::SyntaxError, where, "route must be an object");
  static const std::set<std::string> kKeys = {"source", "in", "curve", "k", "out", "clamp", "smooth_ms", "sink"};
  for (const auto& [key, value] : j.items()) {
    if (!kKeys.contains(key)) throw Error(ErrorKind::SyntaxError, where + "." + key, "unknown field");
  }
  Route r;
  const json& source = require(j, "source", where);
  if (!source.is_string()) throw Error(ErrorKind::SyntaxError, where + ".source", "expected string");
  auto sig = parse_signal(source.get<std::string>());
  if (!sig) throw Error(ErrorKind::UnknownSignal, where + ".source", "unknown signal '" + source.get<std::string>() + "'");
  r.source = *sig;
  r.in_range = range_from_json(require(j, "in", where), where + ".in");
  r.out_range = range_from_json(require(j, "out", where), where + ".out");
  const json& sink = require(j, "sink", where);
  if (!sink.is_string()) throw Error(ErrorKind::SyntaxError, where + ".sink", "expected string");
  r.sink = sink.get<std::string>();

  const std::string curve = j.value("curve", std::string("linear"));
  if (curve == "linear") {
    r.curve.kind = CurveKind::Linear;
  } else if (curve == "exponential") {
    r.curve.kind = CurveKind::Exponential;
  } else if (curve == "logarithmic") {
    r.curve.kind = CurveKind::Logarithmic;
  } else {
    throw Error(ErrorKind::BadCurve, where + ".curve", "unknown curve '" + curve + "'");
  }
  if (auto k = j.find("k"); k != j.end()) {
    if (!k->is_number()) throw Error(ErrorKind::BadCurve, where + ".k", "expected number");
    r.curve.k = k->get<double>();
  }
  if (auto c = j.find("clamp"); c != j.end()) {
    if (!c->is_boolean() || !c->get<bool>()) {
      throw Error(ErrorKind::SyntaxError, where + ".clamp", "only clamp = true is supported");
    }
  }
  if (auto s = j.find("smooth_ms"); s != j.end()) {
    if (!s->is_number()) throw Error(ErrorKind::BadRange, where + ".smooth_ms", "expected number");
    r.smooth_ms = s->get<double>();
  }
  return r;
}

json route_to_json(const Route& route) {
  json j;
  j["source"] = to_string(route.source);
  j["in"] = {route.in_range.lo, route.in_range.hi};
  switch (route.curve.kind) {
    case CurveKind::Linear: j["curve"] = "linear"; break;
    case CurveKind::Exponential: j["curve"] = "exponential"; break;
    case CurveKind::Logarithmic: j["curve"] = "logarithmic"; break;
  }
  if (route.curve.kind != CurveKind::Linear) j["k"] = route.curve.k;
  j["out"] = {route.out_range.lo, route.out_range.hi};
  j["clamp"] = true;
  j["smooth_ms"] = route.smooth_ms;
  j["sink"] = route.sink;
  return j;
}

MappingSpec from_json(const json& j) {
  const json* routes = &j;
  if (j.is_object()) {
    auto it = j.find("routes");
    if (it == j.end()) throw Error(ErrorKind::SyntaxError, "routes", "missing field");
    routes = &*it;
  }
  if (!routes->is_array()) throw Error(ErrorKind::SyntaxError, "routes", "expected an array");
  MappingSpec spec;
  for (std::size_t i = 0; i < routes->size(); ++i) {
    spec.routes.push_back(route_from_json((*routes)[i], "routes[" + std::to_string(i) + "]"));
  }
  return spec;
}

json to_json(const MappingSpec& spec) {
  json routes = json::array();
  for (const auto& r : spec.routes) routes.push_back(route_to_json(r));
  return json{{"routes", routes}};
}

int line_of_offset(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

MappingSpec parse_mapping(std::string_view text, const SinkResolver& sinks, const EnvResolver& envs) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    // byte is 1-based and points just past the offending character.
    const std::size_t at = e.byte > 0 ? e.byte - 1 : 0;
    throw Error(ErrorKind::SyntaxError, "document", e.what(), line_of_offset(text, at));
  }
  MappingSpec spec = from_json(doc);
  validate(spec, sinks, envs);
  return spec;
}

std::string serialize(const MappingSpec& spec) { return to_json(spec).dump(2) + "\n"; }

double evaluate_route(const Route& route, double x) {
  const double lo = route.in_range.lo;
  const double hi = route.in_range.hi;
  const double clamped = std::isnan(x) ? lo : std::clamp(x, lo, hi);
  const double t = (clamped - lo) / (hi - lo);
  return std::lerp(route.out_range.lo, route.out_range.hi, apply_curve(t, route.curve));
}

std::vector<SinkValue> evaluate(const MappingSpec& spec, const SignalSnapshot& signals) {
  std::vector<SinkValue> out;
  out.reserve(spec.routes.size());
  for (std::size_t i = 0; i < spec.routes.size(); ++i) {
    const Route& route = spec.routes[i];
    auto it = signals.find(route.source);
    if (it == signals.end()) {
      throw Error(ErrorKind::MissingSignal, "routes[" + std::to_string(i) + "].source",
                  "signal '" + to_string(route.source) + "' not in snapshot");
    }
    out.push_back({route.sink, evaluate_route(route, it->second), route.smooth_ms});
  }
  return out;
}

}  // namespace rbs::mapping
