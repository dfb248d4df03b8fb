#include "rbs/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

namespace rbs {

using nlohmann::json;

std::string_view to_string(ConfigErrorKind kind) {
  switch (kind) {
    case ConfigErrorKind::SyntaxError: return "SyntaxError";
    case ConfigErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ConfigErrorKind::ScriptUnordered: return "ScriptUnordered";
    case ConfigErrorKind::FileUnreadable: return "FileUnreadable";
  }
  return "Unknown";
}

ConfigError::ConfigError(ConfigErrorKind kind, std::string path, const std::string& reason, int line)
    : std::runtime_error(std::string(to_string(kind)) + (path.empty() ? std::string() : " at " + path) +
                         (line > 0 ? " (line " + std::to_string(line) + ")" : std::string()) + ": " + reason),
      kind_(kind), path_(std::move(path)), reason_(reason), line_(line) {}

namespace {

[[noreturn]] void invalid(const std::string& path, const std::string& reason) {
  throw ConfigError(ConfigErrorKind::ConfigInvalid, path, reason);
}

std::string join(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

std::string indexed(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

std::string fmt_range(double lo, double hi) {
  std::ostringstream os;
  os << "must lie in [" << lo << ", " << hi << "]";
  return os.str();
}

// Reads one JSON object, tracking which keys were consumed so that unknown
// keys can be reported with their full path.
class Obj {
 public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) invalid(path_.empty() ? "document" : path_, "expected an object");
  }

  const std::string& path() const { return path_; }
  std::string at(std::string_view key) const { return join(path_, key); }

  const json* find(std::string_view key) {
    used_.emplace(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  double number(std::string_view key, double fallback, double lo = -std::numeric_limits<double>::infinity(),
                double hi = std::numeric_limits<double>::infinity()) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_number()) invalid(at(key), "expected a number");
    const double x = v->get<double>();
    if (!(x >= lo && x <= hi)) invalid(at(key), fmt_range(lo, hi));
    return x;
  }

  std::uint64_t integer(std::string_view key, std::uint64_t fallback, std::uint64_t lo, std::uint64_t hi) {
    const json* v = find(key);
    if (!v) return fallback;
    if (v->is_number_unsigned()) {
      const auto x = v->get<std::uint64_t>();
      if (x < lo || x > hi) invalid(at(key), fmt_range(double(lo), double(hi)));
      return x;
    }
    if (v->is_number_integer()) invalid(at(key), fmt_range(double(lo), double(hi)));
    invalid(at(key), "expected a non-negative integer");
  }

  bool boolean(std::string_view key, bool fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_boolean()) invalid(at(key), "expected true or false");
    return v->get<bool>();
  }

  std::string string(std::string_view key, const std::string& fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_string()) invalid(at(key), "expected a string");
    return v->get<std::string>();
  }

  template <std::size_t N>
  std::array<double, N> numbers(std::string_view key, const std::array<double, N>& fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_array() || v->size() != N) invalid(at(key), "expected " + std::to_string(N) + " numbers");
    std::array<double, N> out{};
    for (std::size_t i = 0; i < N; ++i) {
      if (!(*v)[i].is_number()) invalid(indexed(at(key), i), "expected a number");
      out[i] = (*v)[i].get<double>();
    }
    return out;
  }

  /// Reports the first key that was never consumed.
  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.contains(key)) invalid(at(key), "unknown field");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string, std::less<>> used_;
};

kin::Joints to_joints(const std::array<double, kin::kJoints>& a) {
  kin::Joints q;
  for (int i = 0; i < kin::kJoints; ++i) q[i] = a[static_cast<std::size_t>(i)];
  return q;
}

std::array<double, kin::kJoints> from_joints(const kin::Joints& q) {
  std::array<double, kin::kJoints> a{};
  for (int i = 0; i < kin::kJoints; ++i) a[static_cast<std::size_t>(i)] = q[i];
  return a;
}

std::string_view to_string(RunMode mode) { return mode == RunMode::Realtime ? "realtime" : "offline"; }

void read_audio(Obj o, SessionConfig& c) {
  c.sample_rate = o.number("sample_rate", c.sample_rate);
  c.block_size = static_cast<std::size_t>(o.integer("block_size", c.block_size, 0, 1u << 20));
  c.control_rate = o.number("control_rate", c.control_rate);
  o.finish();
}

void read_robot(Obj o, SessionConfig& c) {
  if (const json* dh = o.find("dh")) {
    if (!dh->is_array() || dh->size() != kin::kJoints) invalid(o.at("dh"), "expected 6 rows");
    for (std::size_t i = 0; i < kin::kJoints; ++i) {
      Obj row((*dh)[i], indexed(o.at("dh"), i));
      auto& r = c.kinematics.dh[i];
      r.a = row.number("a", r.a);
      r.d = row.number("d", r.d);
      r.alpha = row.number("alpha", r.alpha);
      row.finish();
    }
  }
  c.kinematics.lower = to_joints(o.numbers<kin::kJoints>("lower", from_joints(c.kinematics.lower)));
  c.kinematics.upper = to_joints(o.numbers<kin::kJoints>("upper", from_joints(c.kinematics.upper)));
  c.kinematics.max_joint_speed = o.number("max_joint_speed", c.kinematics.max_joint_speed);
  c.initial_q = to_joints(o.numbers<kin::kJoints>("initial_q", from_joints(c.initial_q)));
  o.finish();
}

void read_steering(Obj o, kin::SteeringOptions& s) {
  s.gain = o.number("gain", s.gain);
  s.damping = o.number("damping", s.damping);
  s.standoff = o.number("standoff", s.standoff);
  s.max_condition = o.number("max_condition", s.max_condition);
  o.finish();
}

void read_voice(Obj o, MotorVoiceParams& v, double& gain_db) {
  v.base_freq = o.number("base_freq", v.base_freq);
  v.freq_per_radps = o.number("freq_per_radps", v.freq_per_radps);
  v.n_harmonics = static_cast<int>(o.integer("n_harmonics", static_cast<std::uint64_t>(v.n_harmonics), 1, 64));
  v.harmonic_rolloff = o.number("harmonic_rolloff", v.harmonic_rolloff);
  v.noise_level = o.number("noise_level", v.noise_level);
  v.idle_floor = o.number("idle_floor", v.idle_floor);
  v.amp_per_radps = o.number("amp_per_radps", v.amp_per_radps);
  gain_db = o.number("gain_db", gain_db);
  o.finish();
}

dsp::NodeSpec read_node(Obj o) {
  dsp::NodeSpec n;
  const json* id = o.find("id");
  if (!id || !id->is_string()) invalid(o.at("id"), "expected a string");
  n.id = id->get<std::string>();
  const std::string kind = o.string("kind", "");
  auto k = dsp::parse_node_kind(kind);
  if (!k) invalid(o.at("kind"), "unknown node kind '" + kind + "'");
  n.kind = *k;
  if (const json* inputs = o.find("inputs")) {
    if (!inputs->is_array()) invalid(o.at("inputs"), "expected an array of ids");
    for (std::size_t i = 0; i < inputs->size(); ++i) {
      if (!(*inputs)[i].is_string()) invalid(indexed(o.at("inputs"), i), "expected a string");
      n.inputs.push_back((*inputs)[i].get<std::string>());
    }
  }
  const json* params = o.find("params");
  const json empty = json::object();
  Obj p(params ? *params : empty, o.at("params"));
  for (const auto& info : dsp::node_params(n.kind)) {
    n.params[std::string(info.name)] = p.number(info.name, info.default_value, info.min, info.max);
  }
  p.finish();
  if (const json* mode = o.find("mode")) {
    if (n.kind != dsp::NodeKind::Biquad) invalid(o.at("mode"), "only biquad nodes take a mode");
    auto m = mode->is_string() ? dsp::parse_biquad_kind(mode->get<std::string>()) : std::nullopt;
    if (!m) invalid(o.at("mode"), "expected lowpass, highpass or bandpass");
    n.mode = *m;
  }
  o.finish();
  return n;
}

void read_graph(Obj o, SessionConfig& c) {
  if (const json* nodes = o.find("nodes")) {
    if (!nodes->is_array()) invalid(o.at("nodes"), "expected an array");
    c.graph.clear();
    for (std::size_t i = 0; i < nodes->size(); ++i) c.graph.push_back(read_node(Obj((*nodes)[i], indexed(o.at("nodes"), i))));
  }
  c.output_node = o.string("output", c.output_node);
  o.finish();
}

void read_spatial(Obj o, SpatialConfig& s) {
  if (const json* ring = o.find("ring_deg")) {
    if (!ring->is_array()) invalid(o.at("ring_deg"), "expected an array of azimuths");
    s.ring_deg.clear();
    for (std::size_t i = 0; i < ring->size(); ++i) {
      if (!(*ring)[i].is_number()) invalid(indexed(o.at("ring_deg"), i), "expected a number");
      s.ring_deg.push_back((*ring)[i].get<double>());
    }
  }
  s.point_source = o.boolean("point_source", s.point_source);
  const std::string rolloff = o.string("rolloff", std::string(spatial::to_string(s.params.rolloff)));
  auto r = spatial::parse_rolloff(rolloff);
  if (!r) invalid(o.at("rolloff"), "expected none or inverse");
  s.params.rolloff = *r;
  s.params.reference_distance = o.number("reference_distance", s.params.reference_distance);
  s.params.point_send = o.number("point_send", s.params.point_send);
  s.listener = o.numbers<2>("listener", s.listener);
  o.finish();
}

void read_osc(Obj o, OscConfig& osc) {
  osc.in_port = static_cast<std::uint16_t>(o.integer("in_port", osc.in_port, 0, 65535));
  osc.out_port = static_cast<std::uint16_t>(o.integer("out_port", osc.out_port, 0, 65535));
  osc.out_host = o.string("out_host", osc.out_host);
  o.finish();
}

json node_to_json(const dsp::NodeSpec& n) {
  json params = json::object();
  for (const auto& info : dsp::node_params(n.kind)) {
    auto it = n.params.find(std::string(info.name));
    params[std::string(info.name)] = it == n.params.end() ? info.default_value : it->second;
  }
  json j = {{"id", n.id}, {"kind", dsp::to_string(n.kind)}, {"inputs", n.inputs}, {"params", params}};
  if (n.kind == dsp::NodeKind::Biquad) j["mode"] = dsp::to_string(n.mode);
  return j;
}

bool valid_env_name(std::string_view name) {
  return !name.empty() && name.find('/') == std::string_view::npos;
}

}  // namespace

// --- Defaults ---------------------------------------------------------------

kin::Joints SessionConfig::default_initial_q() {
  kin::Joints q;
  q << 0.0, -1.3, 1.6, -1.87, -1.5708, 0.0;
  return q;
}

std::vector<dsp::NodeSpec> SessionConfig::default_graph() {
  dsp::NodeSpec lp;
  lp.id = "lp1";
  lp.kind = dsp::NodeKind::Biquad;
  lp.inputs = {"blend"};
  lp.params = {{"cutoff_hz", 2000.0}, {"q", 0.7071}};
  dsp::NodeSpec master;
  master.id = "master";
  master.kind = dsp::NodeKind::Gain;
  master.inputs = {"lp1"};
  master.params = {{"gain_db", 0.0}};
  return {lp, master};
}

mapping::MappingSpec SessionConfig::default_mapping() {
  using mapping::Route;
  using mapping::SignalId;
  mapping::MappingSpec spec;
  Route attenuation;
  attenuation.source = SignalId::collab_distance();
  attenuation.in_range = {0.3, 2.0};
  attenuation.out_range = {-24.0, 0.0};
  attenuation.sink = "master.gain_db";
  spec.routes.push_back(attenuation);
  Route cutoff;
  cutoff.source = SignalId::tcp_speed();
  cutoff.in_range = {0.0, 1.5};
  cutoff.out_range = {400.0, 6000.0};
  cutoff.sink = "lp1.cutoff_hz";
  spec.routes.push_back(cutoff);
  for (int i = 0; i < kin::kJoints; ++i) {
    Route voice;
    voice.source = SignalId::joint_speed(i);
    voice.in_range = {0.0, 1.0};
    voice.out_range = {-18.0, -12.0};
    voice.sink = "voice" + std::to_string(i) + ".gain_db";
    spec.routes.push_back(voice);
  }
  return spec;
}

spatial::SpeakerLayout SpatialConfig::layout() const {
  spatial::SpeakerLayout l;
  l.has_point_source = point_source;
  for (double deg : ring_deg) l.ring.push_back(deg * std::numbers::pi / 180.0);
  return l;
}

std::vector<std::string> engine_inputs(std::size_t feed_count) {
  std::vector<std::string> names = {"blend", "consequential", "synthetic"};
  for (int i = 0; i < kin::kJoints; ++i) names.push_back("voice" + std::to_string(i));
  for (std::size_t i = 0; i < feed_count; ++i) names.push_back("feed" + std::to_string(i));
  return names;
}

std::optional<dsp::ParamInfo> engine_param(std::string_view address) {
  if (address == "blend.mix") return dsp::ParamInfo{"mix", 0.0, 1.0, 0.5};
  if (address == "drone.gain_db") return dsp::ParamInfo{"gain_db", -120.0, 24.0, 0.0};
  if (address.size() == 14 && address.starts_with("voice") && address.ends_with(".gain_db") && address[5] >= '0' &&
      address[5] < '0' + kin::kJoints) {
    return dsp::ParamInfo{"gain_db", -120.0, 24.0, -12.0};
  }
  return std::nullopt;
}

bool sink_exists(const SessionConfig& config, std::string_view address) {
  if (engine_param(address)) return true;
  const auto dot = address.find('.');
  if (dot == std::string_view::npos) return false;
  const auto id = address.substr(0, dot);
  const auto param = address.substr(dot + 1);
  for (const auto& node : config.graph) {
    if (node.id != id) continue;
    for (const auto& info : dsp::node_params(node.kind)) {
      if (info.name == param) return true;
    }
  }
  return false;
}

// --- Validation -------------------------------------------------------------

void validate(const SessionConfig& c) {
  if (!(c.sample_rate >= 8000.0 && c.sample_rate <= 384000.0)) invalid("audio.sample_rate", fmt_range(8000, 384000));
  if (c.sample_rate != std::floor(c.sample_rate)) invalid("audio.sample_rate", "must be a whole number of Hz");
  if (c.block_size < 1 || c.block_size > 8192) invalid("audio.block_size", fmt_range(1, 8192));
  if (!(c.control_rate > 0.0)) invalid("audio.control_rate", "must be positive");
  if (c.control_rate > c.sample_rate / double(c.block_size)) {
    invalid("audio.control_rate", "must not exceed sample_rate / block_size");
  }

  if (!c.kinematics.valid()) invalid("robot", "joint limits need lower < upper and a positive max_joint_speed");
  for (int i = 0; i < kin::kJoints; ++i) {
    if (!(c.initial_q[i] >= c.kinematics.lower[i] && c.initial_q[i] <= c.kinematics.upper[i])) {
      invalid(indexed("robot.initial_q", std::size_t(i)), "outside the joint limits");
    }
  }
  if (!(c.steering.gain > 0 && c.steering.gain <= 1)) invalid("steering.gain", "must lie in (0, 1]");
  if (!(c.steering.damping > 0)) invalid("steering.damping", "must be positive");
  if (!(c.steering.standoff >= 0)) invalid("steering.standoff", "must be non-negative");
  if (!(c.steering.max_condition > 1)) invalid("steering.max_condition", "must exceed 1");

  for (std::size_t i = 0; i < c.voices.size(); ++i) {
    if (!c.voices[i].valid()) invalid(indexed("voices", i), "voice parameters out of range");
    if (!(c.voice_gain_db[i] >= -120 && c.voice_gain_db[i] <= 24)) {
      invalid(indexed("voices", i) + ".gain_db", fmt_range(-120, 24));
    }
  }
  if (!(c.drone.base_freq > 0 && c.drone.base_freq < c.sample_rate / 2)) invalid("drone.base_freq", "must lie below Nyquist");
  if (!std::isfinite(c.drone.octaves_per_m)) invalid("drone.octaves_per_m", "must be finite");
  if (!(c.drone.level >= 0 && c.drone.level <= 1)) invalid("drone.level", fmt_range(0, 1));
  if (!(c.mix >= 0 && c.mix <= 1)) invalid("blend.mix", fmt_range(0, 1));
  for (std::size_t i = 0; i < c.feeds.size(); ++i) {
    if (c.feeds[i].path.empty()) invalid(indexed("feeds", i) + ".path", "must not be empty");
  }

  for (std::size_t i = 0; i < c.graph.size(); ++i) {
    const auto& id = c.graph[i].id;
    if (id == "drone" || engine_param(id + ".gain_db") || id == "blend") {
      invalid(indexed("graph.nodes", i) + ".id", "'" + id + "' is reserved for engine parameters");
    }
  }
  try {
    dsp::Graph g(c.graph, engine_inputs(c.feeds.size()), c.sample_rate, c.block_size);
    if (!g.node_index(c.output_node)) invalid("graph.output", "no node named '" + c.output_node + "'");
  } catch (const dsp::Error& e) {
    invalid("graph.nodes", e.what());
  }

  for (const auto& [name, value] : c.env) {
    if (!valid_env_name(name)) invalid("env", "invalid signal name '" + name + "'");
    if (!std::isfinite(value)) invalid(join("env", name), "must be finite");
  }
  try {
    mapping::validate(
        c.mapping, [&](std::string_view sink) { return sink_exists(c, sink); },
        [&](std::string_view name) { return c.env.contains(std::string(name)); });
  } catch (const mapping::Error& e) {
    invalid("mapping." + e.where(), e.what());
  }

  const auto layout = c.spatial.layout();
  if (!layout.valid()) invalid("spatial.ring_deg", "need at least 2 strictly increasing azimuths in [0, 360)");
  if (layout.channel_count() > kMaxChannels) invalid("spatial.ring_deg", "too many channels");
  if (!(c.spatial.params.reference_distance > 0)) invalid("spatial.reference_distance", "must be positive");
  if (!(c.spatial.params.point_send >= 0 && c.spatial.params.point_send <= 1)) {
    invalid("spatial.point_send", fmt_range(0, 1));
  }
  if (c.osc.out_host.empty()) invalid("osc.out_host", "must not be empty");
}

// --- JSON -------------------------------------------------------------------

SessionConfig config_from_json(const json& j) {
  SessionConfig c;
  Obj root(j, "");
  if (const json* v = root.find("audio")) read_audio(Obj(*v, "audio"), c);
  const std::string mode = root.string("mode", "offline");
  if (mode == "offline") {
    c.mode = RunMode::Offline;
  } else if (mode == "realtime") {
    c.mode = RunMode::Realtime;
  } else {
    invalid("mode", "expected realtime or offline");
  }
  c.seed = root.integer("seed", c.seed, 0, std::numeric_limits<std::uint64_t>::max());
  if (const json* v = root.find("robot")) read_robot(Obj(*v, "robot"), c);
  if (const json* v = root.find("steering")) read_steering(Obj(*v, "steering"), c.steering);
  if (const json* v = root.find("collaborator")) {
    Obj o(*v, "collaborator");
    c.collaborator = o.numbers<3>("position", c.collaborator);
    o.finish();
  }
  if (const json* v = root.find("voices")) {
    if (!v->is_array() || v->size() != kin::kJoints) invalid("voices", "expected 6 voices");
    for (std::size_t i = 0; i < kin::kJoints; ++i) read_voice(Obj((*v)[i], indexed("voices", i)), c.voices[i], c.voice_gain_db[i]);
  }
  if (const json* v = root.find("drone")) {
    Obj o(*v, "drone");
    c.drone.base_freq = o.number("base_freq", c.drone.base_freq);
    c.drone.octaves_per_m = o.number("octaves_per_m", c.drone.octaves_per_m);
    c.drone.level = o.number("level", c.drone.level);
    o.finish();
  }
  if (const json* v = root.find("feeds")) {
    if (!v->is_array()) invalid("feeds", "expected an array");
    for (std::size_t i = 0; i < v->size(); ++i) {
      Obj o((*v)[i], indexed("feeds", i));
      FeedConfig f;
      f.path = o.string("path", "");
      f.loop = o.boolean("loop", f.loop);
      o.finish();
      c.feeds.push_back(f);
    }
  }
  if (const json* v = root.find("blend")) {
    Obj o(*v, "blend");
    c.mix = o.number("mix", c.mix);
    o.finish();
  }
  if (const json* v = root.find("graph")) read_graph(Obj(*v, "graph"), c);
  if (const json* v = root.find("mapping")) {
    try {
      c.mapping = mapping::from_json(*v);
    } catch (const mapping::Error& e) {
      invalid("mapping." + e.where(), e.what());
    }
  }
  if (const json* v = root.find("env")) {
    if (!v->is_object()) invalid("env", "expected an object of name: value");
    for (const auto& [name, value] : v->items()) {
      if (!value.is_number()) invalid(join("env", name), "expected a number");
      c.env[name] = value.get<double>();
    }
  }
  if (const json* v = root.find("spatial")) read_spatial(Obj(*v, "spatial"), c.spatial);
  if (const json* v = root.find("osc")) read_osc(Obj(*v, "osc"), c.osc);
  if (const json* v = root.find("api")) {
    Obj o(*v, "api");
    c.api_port = static_cast<std::uint16_t>(o.integer("port", c.api_port, 0, 65535));
    o.finish();
  }
  root.finish();
  validate(c);
  return c;
}

json config_to_json(const SessionConfig& c) {
  json j;
  j["audio"] = {{"sample_rate", c.sample_rate}, {"block_size", c.block_size}, {"control_rate", c.control_rate}};
  j["mode"] = to_string(c.mode);
  j["seed"] = c.seed;

  json dh = json::array();
  for (const auto& r : c.kinematics.dh) dh.push_back({{"a", r.a}, {"d", r.d}, {"alpha", r.alpha}});
  j["robot"] = {{"dh", dh},
                {"lower", from_joints(c.kinematics.lower)},
                {"upper", from_joints(c.kinematics.upper)},
                {"max_joint_speed", c.kinematics.max_joint_speed},
                {"initial_q", from_joints(c.initial_q)}};
  j["steering"] = {{"gain", c.steering.gain},
                   {"damping", c.steering.damping},
                   {"standoff", c.steering.standoff},
                   {"max_condition", c.steering.max_condition}};
  j["collaborator"] = {{"position", c.collaborator}};

  json voices = json::array();
  for (std::size_t i = 0; i < c.voices.size(); ++i) {
    const auto& v = c.voices[i];
    voices.push_back({{"base_freq", v.base_freq},
                      {"freq_per_radps", v.freq_per_radps},
                      {"n_harmonics", v.n_harmonics},
                      {"harmonic_rolloff", v.harmonic_rolloff},
                      {"noise_level", v.noise_level},
                      {"idle_floor", v.idle_floor},
                      {"amp_per_radps", v.amp_per_radps},
                      {"gain_db", c.voice_gain_db[i]}});
  }
  j["voices"] = voices;
  j["drone"] = {{"base_freq", c.drone.base_freq}, {"octaves_per_m", c.drone.octaves_per_m}, {"level", c.drone.level}};
  json feeds = json::array();
  for (const auto& f : c.feeds) feeds.push_back({{"path", f.path}, {"loop", f.loop}});
  j["feeds"] = feeds;
  j["blend"] = {{"mix", c.mix}};

  json nodes = json::array();
  for (const auto& n : c.graph) nodes.push_back(node_to_json(n));
  j["graph"] = {{"nodes", nodes}, {"output", c.output_node}};
  j["mapping"] = mapping::to_json(c.mapping);
  j["env"] = json::object();
  for (const auto& [name, value] : c.env) j["env"][name] = value;

  j["spatial"] = {{"ring_deg", c.spatial.ring_deg},
                  {"point_source", c.spatial.point_source},
                  {"rolloff", spatial::to_string(c.spatial.params.rolloff)},
                  {"reference_distance", c.spatial.params.reference_distance},
                  {"point_send", c.spatial.params.point_send},
                  {"listener", c.spatial.listener}};
  j["osc"] = {{"in_port", c.osc.in_port}, {"out_port", c.osc.out_port}, {"out_host", c.osc.out_host}};
  j["api"] = {{"port", c.api_port}};
  return j;
}

namespace {

json parse_document(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t at = e.byte > 0 ? e.byte - 1 : 0;
    throw ConfigError(ConfigErrorKind::SyntaxError, "", e.what(), mapping::line_of_offset(text, at));
  }
}

}  // namespace

SessionConfig parse_config(std::string_view text) { return config_from_json(parse_document(text)); }

std::string serialize_config(const SessionConfig& config) { return config_to_json(config).dump(2) + "\n"; }

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(ConfigErrorKind::FileUnreadable, path.string(), "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SessionConfig load_config(const std::filesystem::path& path) {
  SessionConfig c = parse_config(read_text(path));
  for (auto& f : c.feeds) {
    std::filesystem::path p(f.path);
    if (p.is_relative()) f.path = (path.parent_path() / p).lexically_normal().string();
  }
  return c;
}

void save_config(const SessionConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(ConfigErrorKind::FileUnreadable, path.string(), "cannot write file");
  out << serialize_config(config);
}

// --- Scripts ----------------------------------------------------------------

TrajectoryScript parse_script(std::string_view text) {
  const json doc = parse_document(text);
  Obj root(doc, "");
  TrajectoryScript script;
  const json* events = root.find("events");
  if (!events || !events->is_array()) invalid("events", "expected an array");
  root.finish();
  double last = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < events->size(); ++i) {
    const std::string path = indexed("events", i);
    Obj o((*events)[i], path);
    ScriptEvent ev;
    ev.t = o.number("t", std::numeric_limits<double>::quiet_NaN(), 0.0);
    if (std::isnan(ev.t)) invalid(o.at("t"), "missing event time");
    if (ev.t < last) {
      throw ConfigError(ConfigErrorKind::ScriptUnordered, o.at("t"), "event times must be non-decreasing");
    }
    last = ev.t;
    int actions = 0;
    if (o.find("collaborator")) {
      CollaboratorEvent c;
      c.position = o.numbers<3>("collaborator", c.position);
      c.ramp_s = o.number("ramp_s", 0.0, 0.0);
      ev.action = c;
      ++actions;
    } else if (o.find("ramp_s")) {
      invalid(o.at("ramp_s"), "only collaborator events take a ramp");
    }
    if (const json* p = o.find("param")) {
      Obj po(*p, o.at("param"));
      ParamEvent pe;
      pe.address = po.string("address", "");
      if (pe.address.empty()) invalid(po.at("address"), "expected a parameter address");
      pe.value = po.number("value", 0.0);
      pe.smooth_ms = po.number("smooth_ms", pe.smooth_ms, 0.0);
      po.finish();
      ev.action = pe;
      ++actions;
    }
    if (const json* r = o.find("route")) {
      try {
        ev.action = RouteEvent{mapping::route_from_json(*r, o.at("route"))};
      } catch (const mapping::Error& e) {
        invalid(e.where(), e.what());
      }
      ++actions;
    }
    if (o.find("delete_route")) {
      ev.action = DeleteRouteEvent{o.string("delete_route", "")};
      ++actions;
    }
    if (const json* e = o.find("env")) {
      Obj eo(*e, o.at("env"));
      EnvEvent ee;
      ee.name = eo.string("name", "");
      if (!valid_env_name(ee.name)) invalid(eo.at("name"), "invalid signal name");
      ee.value = eo.number("value", 0.0);
      eo.finish();
      ev.action = ee;
      ++actions;
    }
    if (actions != 1) invalid(path, "each event needs exactly one of collaborator, param, route, delete_route, env");
    o.finish();
    script.events.push_back(std::move(ev));
  }
  return script;
}

TrajectoryScript load_script(const std::filesystem::path& path) { return parse_script(read_text(path)); }

std::string serialize_script(const TrajectoryScript& script) {
  json events = json::array();
  for (const auto& ev : script.events) {
    json e = {{"t", ev.t}};
    std::visit(
        [&](const auto& a) {
          using T = std::decay_t<decltype(a)>;
          if constexpr (std::is_same_v<T, CollaboratorEvent>) {
            e["collaborator"] = a.position;
            e["ramp_s"] = a.ramp_s;
          } else if constexpr (std::is_same_v<T, ParamEvent>) {
            e["param"] = {{"address", a.address}, {"value", a.value}, {"smooth_ms", a.smooth_ms}};
          } else if constexpr (std::is_same_v<T, RouteEvent>) {
            e["route"] = mapping::route_to_json(a.route);
          } else if constexpr (std::is_same_v<T, DeleteRouteEvent>) {
            e["delete_route"] = a.sink;
          } else {
            e["env"] = {{"name", a.name}, {"value", a.value}};
          }
        },
        ev.action);
    events.push_back(e);
  }
  return json{{"events", events}}.dump(2) + "\n";
}

}  // namespace rbs
