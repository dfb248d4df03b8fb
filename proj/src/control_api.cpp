#include "rbs/control_api.hpp"

#include <spdlog/spdlog.h>

#include <cmath>

namespace rbs::api {

using nlohmann::json;

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedCommand: return "MalformedCommand";
    case ErrorKind::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorKind::UnknownCommand: return "UnknownCommand";
    case ErrorKind::ValidationFailed: return "ValidationFailed";
  }
  return "?";
}

namespace {

struct Failure {
  ErrorKind kind;
  std::string field;
  std::string reason;
};

[[noreturn]] void fail(ErrorKind kind, std::string field, std::string reason) {
  throw Failure{kind, std::move(field), std::move(reason)};
}

double number(const json& c, const char* key) {
  auto it = c.find(key);
  if (it == c.end()) fail(ErrorKind::MalformedCommand, key, "missing");
  if (!it->is_number()) fail(ErrorKind::MalformedCommand, key, "expected a number");
  const double v = it->get<double>();
  if (!std::isfinite(v)) fail(ErrorKind::ValidationFailed, key, "must be finite");
  return v;
}

double number_or(const json& c, const char* key, double fallback) {
  return c.contains(key) ? number(c, key) : fallback;
}

std::string string(const json& c, const char* key) {
  auto it = c.find(key);
  if (it == c.end()) fail(ErrorKind::MalformedCommand, key, "missing");
  if (!it->is_string()) fail(ErrorKind::MalformedCommand, key, "expected a string");
  return it->get<std::string>();
}

json vec(const kin::Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json joints(const kin::Joints& q) {
  json a = json::array();
  for (int i = 0; i < kin::kJoints; ++i) a.push_back(q[i]);
  return a;
}

json pose(const kin::Pose& p) { return {{"position", vec(p.position)}, {"rpy", vec(p.rpy)}}; }

}  // namespace

ControlApi::ControlApi(ControlLoop& control) : control_(control) {}

json ControlApi::snapshot() {
  const auto& c = control_;
  json links = json::array();
  for (const auto& l : c.chain().links) links.push_back(pose(l));
  json rms = json::array();
  for (std::size_t i = 0; i < c.meters().channels; ++i) rms.push_back(c.meters().rms[i]);
  json params = json::object();
  for (const auto& [address, value] : c.targets()) params[address] = value;
  json env = json::object();
  for (const auto& [name, value] : c.env()) env[name] = value;
  const auto& spatial = c.config().spatial;

  return {{"v", kProtocolVersion},
          {"type", "state"},
          {"seq", ++seq_},
          {"tick", c.ticks()},
          {"clock", double(c.ticks()) / c.config().control_rate},
          {"joints", {{"q", joints(c.joints().q)}, {"qdot", joints(c.joints().qdot)}}},
          {"tcp", pose(c.chain().tcp)},
          {"links", links},
          {"collaborator", vec(c.collaborator())},
          {"proximity", c.proximity()},
          {"tcp_speed", c.tcp_speed()},
          {"collab_distance", c.collab_distance()},
          {"mix", c.targets().at("blend.mix")},
          {"params", params},
          {"env", env},
          {"mapping", mapping::to_json(c.mapping())},
          {"meters", {{"rms", rms}, {"block", c.meters().block}}},
          {"layout", {{"ring_deg", spatial.ring_deg}, {"point_source", spatial.point_source}}}};
}

json ControlApi::dispatch(ClientId client, const std::string& cmd, const json& c) {
  try {
    if (cmd == "get_state") return snapshot();

    if (cmd == "set_collaborator") {
      auto it = c.find("position");
      if (it == c.end() || !it->is_array() || it->size() != 3) {
        fail(ErrorKind::MalformedCommand, "position", "expected [x, y, z]");
      }
      kin::Vec3 p;
      for (int i = 0; i < 3; ++i) {
        if (!(*it)[std::size_t(i)].is_number()) fail(ErrorKind::MalformedCommand, "position", "expected numbers");
        p[i] = (*it)[std::size_t(i)].get<double>();
      }
      const double ramp = number_or(c, "ramp_s", 0.0);
      control_.set_collaborator(p, ramp);
      return {{"position", vec(p)}, {"ramp_s", ramp}};
    }

    if (cmd == "set_route") {
      auto it = c.find("route");
      if (it == c.end() || !it->is_object()) fail(ErrorKind::MalformedCommand, "route", "expected a route object");
      mapping::Route route;
      try {
        route = mapping::route_from_json(*it, "route");
      } catch (const mapping::Error& e) {
        const auto& w = e.where();
        fail(ErrorKind::ValidationFailed, w.starts_with("route.") ? w.substr(6) : w, e.what());
      }
      return {{"route", mapping::route_to_json(control_.set_route(route))}};
    }

    if (cmd == "delete_route") {
      const auto sink = string(c, "sink");
      control_.delete_route(sink);
      return {{"sink", sink}};
    }

    if (cmd == "set_param") {
      const auto address = string(c, "address");
      const double value = number(c, "value");
      const double smooth = number_or(c, "smooth_ms", dsp::kDefaultSmoothingMs);
      const double accepted = control_.set_param(address, value, smooth);
      return {{"address", address}, {"value", accepted}, {"smooth_ms", smooth}};
    }

    if (cmd == "set_mix") {
      const double value = number(c, "value");
      return {{"value", control_.set_param("blend.mix", value)}};
    }

    if (cmd == "subscribe_meters") {
      const double rate = number(c, "rate");
      const double max = control_.config().control_rate;
      if (rate < 0.0 || rate > max) {
        fail(ErrorKind::ValidationFailed, "rate", "must lie in [0, " + std::to_string(max) + "] Hz");
      }
      if (rate == 0.0) {
        streams_.erase(client);
      } else {
        auto& s = streams_[client];
        s.rate = rate;
        s.phase = 0.0;
      }
      return {{"rate", rate}};
    }
  } catch (const ValidationError& e) {
    fail(ErrorKind::ValidationFailed, e.field(), e.reason());
  }
  fail(ErrorKind::UnknownCommand, "cmd", "unknown command '" + cmd + "'");
}

json ControlApi::handle(ClientId client, const json& command) {
  json reply = {{"v", kProtocolVersion}, {"id", nullptr}};
  try {
    if (!command.is_object()) fail(ErrorKind::MalformedCommand, "", "expected a JSON object");
    if (auto id = command.find("id"); id != command.end()) reply["id"] = *id;
    auto v = command.find("v");
    if (v == command.end() || !v->is_number_integer()) fail(ErrorKind::MalformedCommand, "v", "missing protocol version");
    if (v->get<std::int64_t>() != kProtocolVersion) {
      fail(ErrorKind::UnsupportedVersion, "v", "this server speaks version " + std::to_string(kProtocolVersion));
    }
    const auto cmd = string(command, "cmd");
    json result = dispatch(client, cmd, command);
    reply["ok"] = true;
    reply["tick"] = control_.ticks();
    reply["result"] = std::move(result);
  } catch (const Failure& f) {
    reply["ok"] = false;
    reply["tick"] = control_.ticks();
    reply["error"] = {{"kind", to_string(f.kind)}, {"field", f.field}, {"reason", f.reason}};
    spdlog::debug("api: client {} {}: {} {}", client, to_string(f.kind), f.field, f.reason);
  }
  return reply;
}

std::string ControlApi::handle_text(ClientId client, std::string_view text) {
  json command;
  try {
    command = json::parse(text);
  } catch (const json::parse_error& e) {
    return json{{"v", kProtocolVersion},
                {"id", nullptr},
                {"ok", false},
                {"tick", control_.ticks()},
                {"error", {{"kind", to_string(ErrorKind::MalformedCommand)}, {"field", ""}, {"reason", e.what()}}}}
        .dump();
  }
  return handle(client, command).dump();
}

std::vector<std::pair<ClientId, std::string>> ControlApi::after_tick() {
  std::vector<std::pair<ClientId, std::string>> frames;
  const double cr = control_.config().control_rate;
  std::string text;
  for (auto& [client, s] : streams_) {
    s.phase += s.rate / cr;
    if (s.phase + 1e-9 < 1.0) continue;
    s.phase -= 1.0;
    // One snapshot per tick shared by every client due now.
    if (text.empty()) text = snapshot().dump();
    frames.emplace_back(client, text);
  }
  return frames;
}

void ControlApi::disconnect(ClientId client) { streams_.erase(client); }

}  // namespace rbs::api
