#include "rbs/config.hpp"
#include "rbs/engine.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

using namespace rbs;

namespace {

const std::filesystem::path kFixtures = RBS_FIXTURE_DIR;
const std::filesystem::path kConfigDir = RBS_CONFIG_DIR;

ConfigError config_error(std::string_view text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e;
  }
  FAIL("expected a ConfigError");
  throw;
}

ConfigError script_error(std::string_view text) {
  try {
    parse_script(text);
  } catch (const ConfigError& e) {
    return e;
  }
  FAIL("expected a ConfigError");
  throw;
}

}  // namespace

TEST_CASE("shipped demo config loads and validates") {
  const auto c = load_config(kConfigDir / "demo_session.json");
  CHECK(c.sample_rate == 48000.0);
  CHECK(c.block_size == 256);
  CHECK(c.control_rate == 100.0);
  CHECK(c.spatial.layout().channel_count() == 5);
  CHECK_NOTHROW(validate_script(c, load_script(kConfigDir / "demo_script.json")));
}

TEST_CASE("empty document gives the defaults") {
  CHECK(parse_config("{}") == SessionConfig{});
  // The shipped demo only moves the collaborator's start.
  auto demo = load_config(kConfigDir / "demo_session.json");
  demo.collaborator = SessionConfig{}.collaborator;
  CHECK(demo == SessionConfig{});
}

TEST_CASE("save(load(x)) equals the independently normalized fixture") {
  const auto c = load_config(kFixtures / "config_input.json");
  CHECK(serialize_config(c) == read_text(kFixtures / "config_normalized.json"));
  CHECK(parse_config(serialize_config(c)) == c);
  CHECK(serialize_config(parse_config(serialize_config(c))) == serialize_config(c));
}

TEST_CASE("save_config then load_config round-trips") {
  const auto path = std::filesystem::temp_directory_path() / "rbs_config_roundtrip.json";
  const auto c = load_config(kFixtures / "config_input.json");
  save_config(c, path);
  CHECK(load_config(path) == c);
  std::filesystem::remove(path);
}

TEST_CASE("block_size 0 is a validation error naming the field") {
  const auto e = config_error(R"({"audio": {"block_size": 0}})");
  CHECK(e.kind() == ConfigErrorKind::ConfigInvalid);
  CHECK(e.path() == "audio.block_size");
}

TEST_CASE("field errors carry full paths") {
  struct Case {
    const char* text;
    const char* path;
  };
  const Case cases[] = {
      {R"({"audio": {"control_rate": 1000}})", "audio.control_rate"},
      {R"({"audio": {"sample_rate": 44100.5}})", "audio.sample_rate"},
      {R"({"audio": {"buffer": 3}})", "audio.buffer"},
      {R"({"robot": {"initial_q": [0, 0, 0, 0, 0, 9]}})", "robot.initial_q[5]"},
      {R"({"voices": [{}, {}, {"n_harmonics": 0}, {}, {}, {}]})", "voices[2].n_harmonics"},
      {R"({"graph": {"nodes": [{"id": "a", "kind": "biquad", "inputs": ["blend"], "params": {"q": 50}}],
           "output": "a"}, "mapping": {"routes": []}})", "graph.nodes[0].params.q"},
      {R"({"graph": {"output": "nope"}})", "graph.output"},
      {R"({"graph": {"nodes": [{"id": "voice2", "kind": "gain"}], "output": "voice2"}})", "graph.nodes[0].id"},
      {R"({"mapping": {"routes": [{"source": "tcp_speed", "in": [0, 1], "out": [0, 1], "sink": "lp9.q"}]}})",
       "mapping.routes[0].sink"},
      {R"({"spatial": {"ring_deg": [10]}})", "spatial.ring_deg"},
      {R"({"mode": "fast"})", "mode"},
  };
  for (const auto& c : cases) {
    INFO(c.text);
    const auto e = config_error(c.text);
    CHECK(e.kind() == ConfigErrorKind::ConfigInvalid);
    CHECK(e.path() == c.path);
  }
}

TEST_CASE("syntax errors report the line") {
  const auto e = config_error("{\n  \"seed\": 3,\n  \"mode\" \"offline\"\n}\n");
  CHECK(e.kind() == ConfigErrorKind::SyntaxError);
  CHECK(e.line() == 3);
}

TEST_CASE("unreadable file") {
  try {
    load_config("/nonexistent/rbs.json");
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.kind() == ConfigErrorKind::FileUnreadable);
  }
}

TEST_CASE("relative feed paths resolve against the config file") {
  const auto dir = std::filesystem::temp_directory_path() / "rbs_feed_paths";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "c.json") << R"({"feeds": [{"path": "sounds/motor.wav", "loop": false}]})";
  }
  const auto c = load_config(dir / "c.json");
  REQUIRE(c.feeds.size() == 1);
  CHECK(c.feeds[0].path == (dir / "sounds/motor.wav").string());
  CHECK_FALSE(c.feeds[0].loop);
  std::filesystem::remove_all(dir);
}

TEST_CASE("scripts parse and serialize") {
  const auto s = parse_script(R"({"events": [
    {"t": 0, "collaborator": [1, 0, 1]},
    {"t": 0.5, "param": {"address": "blend.mix", "value": 0.2}},
    {"t": 0.5, "env": {"name": "light", "value": 0.4}},
    {"t": 1, "route": {"source": "env:light", "in": [0, 1], "out": [0, 1], "sink": "blend.mix"}},
    {"t": 2, "delete_route": "blend.mix"},
    {"t": 3, "collaborator": [0.5, 0.5, 0.5], "ramp_s": 2}
  ]})");
  REQUIRE(s.events.size() == 6);
  CHECK(std::get<CollaboratorEvent>(s.events[5].action).ramp_s == 2.0);
  CHECK(std::get<ParamEvent>(s.events[1].action).smooth_ms == dsp::kDefaultSmoothingMs);
  CHECK(parse_script(serialize_script(s)) == s);
  CHECK_NOTHROW(validate_script(SessionConfig{}, s));
}

TEST_CASE("decreasing event times are ScriptUnordered") {
  const auto e = script_error(R"({"events": [{"t": 1, "collaborator": [1, 0, 1]}, {"t": 0.5, "collaborator": [1, 0, 0]}]})");
  CHECK(e.kind() == ConfigErrorKind::ScriptUnordered);
  CHECK(e.path() == "events[1].t");

  TrajectoryScript s;
  s.events.push_back({2.0, CollaboratorEvent{}});
  s.events.push_back({1.0, CollaboratorEvent{}});
  try {
    validate_script(SessionConfig{}, s);
    FAIL("expected ScriptUnordered");
  } catch (const ConfigError& err) {
    CHECK(err.kind() == ConfigErrorKind::ScriptUnordered);
  }
}

TEST_CASE("script events must name real parameters") {
  const auto s = parse_script(R"({"events": [{"t": 0, "param": {"address": "lp1.gain_db", "value": 1}}]})");
  try {
    validate_script(SessionConfig{}, s);
    FAIL("expected ConfigInvalid");
  } catch (const ConfigError& e) {
    CHECK(e.kind() == ConfigErrorKind::ConfigInvalid);
    CHECK(e.path() == "script.events[0].param.address");
  }
  // An env route is fine once an earlier event declared the signal.
  const auto ok = parse_script(R"({"events": [
    {"t": 0, "env": {"name": "wind", "value": 0}},
    {"t": 1, "route": {"source": "env:wind", "in": [0, 1], "out": [0, 1], "sink": "blend.mix"}}]})");
  CHECK_NOTHROW(validate_script(SessionConfig{}, ok));
}

TEST_CASE("script event shape errors") {
  CHECK(script_error(R"({"events": [{"t": 0}]})").path() == "events[0]");
  CHECK(script_error(R"({"events": [{"t": 0, "collaborator": [1, 0]}]})").path() == "events[0].collaborator");
  CHECK(script_error(R"({"events": [{"t": -1, "collaborator": [1, 0, 0]}]})").path() == "events[0].t");
  CHECK(script_error(R"({"evnts": []})").kind() == ConfigErrorKind::ConfigInvalid);
}

TEST_CASE("engine parameter directory") {
  CHECK(engine_param("blend.mix")->max == 1.0);
  CHECK(engine_param("voice5.gain_db"));
  CHECK_FALSE(engine_param("voice6.gain_db"));
  CHECK(sink_exists(SessionConfig{}, "lp1.cutoff_hz"));
  CHECK_FALSE(sink_exists(SessionConfig{}, "lp1.gain_db"));
  CHECK(engine_inputs(2).size() == 11);
}
