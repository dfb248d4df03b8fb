// JSON command protocol for live control. Everything here runs on the control
// context: the transport hands in text, ControlApi mutates the ControlLoop and
// hands back reply text plus any stream frames due after each tick.
//
// Envelope: {"v": 1, "id": <any>, "cmd": "<name>", ...arguments}
// Reply:    {"v": 1, "id": <echo>, "ok": true, "tick": n, "result": {...}}
//       or  {"v": 1, "id": <echo>, "ok": false, "tick": n,
//            "error": {"kind": "...", "field": "...", "reason": "..."}}
// Stream:   {"v": 1, "type": "state", ...snapshot}
#pragma once

#include "rbs/engine.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace rbs::api {

inline constexpr int kProtocolVersion = 1;

using ClientId = std::uint64_t;

enum class ErrorKind { MalformedCommand, UnsupportedVersion, UnknownCommand, ValidationFailed };

std::string_view to_string(ErrorKind kind);

class ControlApi {
 public:
  explicit ControlApi(ControlLoop& control);

  /// Applies one command and returns the reply. Never throws for bad input.
  nlohmann::json handle(ClientId client, const nlohmann::json& command);
  std::string handle_text(ClientId client, std::string_view text);

  /// Full state as of the last completed tick. Every call takes a fresh
  /// sequence number.
  nlohmann::json snapshot();

  /// Call once after every control tick; returns the stream frames now due.
  std::vector<std::pair<ClientId, std::string>> after_tick();

  void disconnect(ClientId client);
  std::size_t subscribers() const { return streams_.size(); }

 private:
  struct Stream {
    double rate = 0.0;   // frames per second
    double phase = 0.0;  // accumulated fraction of a frame
  };

  nlohmann::json dispatch(ClientId client, const std::string& cmd, const nlohmann::json& c);

  ControlLoop& control_;
  std::uint64_t seq_ = 0;
  std::map<ClientId, Stream> streams_;
};

}  // namespace rbs::api
