#include "rbs/mapping.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <random>
#include <sstream>

using namespace rbs::mapping;
using Catch::Approx;

namespace {

std::string read_fixture(const std::string& name) {
  std::ifstream in(std::string(RBS_FIXTURE_DIR) + "/" + name);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool any_sink(std::string_view s) { return s == "lp1.cutoff_hz" || s == "master.gain_db" || s == "blend.mix"; }

ErrorKind parse_error(std::string_view text, int* line = nullptr) {
  try {
    (void)parse_mapping(text, any_sink);
  } catch (const Error& e) {
    if (line) *line = e.line();
    return e.kind();
  }
  FAIL("expected a mapping error");
  return ErrorKind::SyntaxError;
}

Route route(SignalId src, Range in, Range out, Curve curve = {}) {
  Route r;
  r.source = std::move(src);
  r.in_range = in;
  r.out_range = out;
  r.curve = curve;
  r.sink = "master.gain_db";
  return r;
}

}  // namespace

TEST_CASE("signal names round-trip", "[mapping]") {
  for (const char* name : {"joint_speed[0]", "joint_pos[5]", "tcp_speed", "tcp_height", "proximity",
                           "collab_distance", "env:light"}) {
    auto id = parse_signal(name);
    REQUIRE(id.has_value());
    REQUIRE(to_string(*id) == name);
  }
  REQUIRE_FALSE(parse_signal("joint_speed[6]"));
  REQUIRE_FALSE(parse_signal("joint_speed[x]"));
  REQUIRE_FALSE(parse_signal("env:"));
  REQUIRE_FALSE(parse_signal("speed"));
}

TEST_CASE("curves", "[mapping]") {
  const Curve lin{CurveKind::Linear};
  const Curve ex{CurveKind::Exponential, 2.0};
  const Curve lg{CurveKind::Logarithmic, 2.0};
  for (const auto& c : {lin, ex, lg, Curve{CurveKind::Logarithmic}, Curve{CurveKind::Exponential}}) {
    REQUIRE(apply_curve(0.0, c) == 0.0);
    REQUIRE(apply_curve(1.0, c) == 1.0);
  }
  REQUIRE(apply_curve(0.5, lin) == 0.5);
  // (e^1 - 1) / (e^2 - 1), evaluated with mpmath at 30 digits.
  REQUIRE(apply_curve(0.5, ex) == Approx(0.268941421369995120748840758).epsilon(1e-14));
  for (double x : {0.1, 0.4, 0.9}) REQUIRE(apply_curve(apply_curve(x, ex), lg) == Approx(x).epsilon(1e-12));
}

TEST_CASE("parse_mapping", "[mapping]") {
  SECTION("empty route list") {
    REQUIRE(parse_mapping(R"({"routes": []})").routes.empty());
  }
  SECTION("fixture parses and serializes to its normalized form") {
    const auto spec = parse_mapping(read_fixture("mapping_input.json"), any_sink);
    REQUIRE(spec.routes.size() == 2);
    const Route& r = spec.routes[0];
    REQUIRE(r.source == SignalId::tcp_speed());
    REQUIRE(r.in_range == Range{0, 1.5});
    REQUIRE(r.out_range == Range{200, 4000});
    REQUIRE(r.curve.kind == CurveKind::Linear);
    REQUIRE(r.sink == "lp1.cutoff_hz");
    REQUIRE(serialize(spec) == read_fixture("mapping_normalized.json"));
    REQUIRE(parse_mapping(serialize(spec), any_sink) == spec);
  }
  SECTION("duplicate sinks") {
    REQUIRE(parse_error(R"({"routes": [
      {"source": "tcp_speed", "in": [0, 1], "out": [0, 1], "sink": "master.gain_db"},
      {"source": "proximity", "in": [0, 1], "out": [0, 1], "sink": "master.gain_db"}]})") == ErrorKind::DuplicateSink);
  }
  SECTION("unknown sink, bad range, bad curve, unknown signal") {
    REQUIRE(parse_error(R"({"routes": [{"source": "tcp_speed", "in": [0, 1], "out": [0, 1], "sink": "x.y"}]})") ==
            ErrorKind::UnknownSink);
    REQUIRE(parse_error(R"({"routes": [{"source": "tcp_speed", "in": [1, 1], "out": [0, 1], "sink": "blend.mix"}]})") ==
            ErrorKind::BadRange);
    REQUIRE(parse_error(R"({"routes": [{"source": "tcp_speed", "in": [0, 1], "out": [0], "sink": "blend.mix"}]})") ==
            ErrorKind::BadRange);
    REQUIRE(parse_error(R"({"routes": [{"source": "tcp_speed", "in": [0, 1], "out": [0, 1], "curve": "cubic",
      "sink": "blend.mix"}]})") == ErrorKind::BadCurve);
    REQUIRE(parse_error(R"({"routes": [{"source": "tcp_speed", "in": [0, 1], "out": [0, 1], "curve": "exponential",
      "k": -1, "sink": "blend.mix"}]})") == ErrorKind::BadCurve);
    REQUIRE(parse_error(R"({"routes": [{"source": "speed", "in": [0, 1], "out": [0, 1], "sink": "blend.mix"}]})") ==
            ErrorKind::UnknownSignal);
  }
  SECTION("syntax errors carry the line") {
    int line = 0;
    REQUIRE(parse_error("{\n  \"routes\": [\n    {,}\n  ]\n}", &line) == ErrorKind::SyntaxError);
    REQUIRE(line == 3);
  }
  SECTION("undeclared env signals are rejected when a resolver is given") {
    const std::string text = R"({"routes": [{"source": "env:light", "in": [0, 1], "out": [0, 1], "sink": "blend.mix"}]})";
    REQUIRE(parse_mapping(text, any_sink, [](std::string_view n) { return n == "light"; }).routes.size() == 1);
    REQUIRE_THROWS_AS(parse_mapping(text, any_sink, [](std::string_view) { return false; }), Error);
  }
}

TEST_CASE("evaluate", "[mapping]") {
  MappingSpec spec;
  spec.routes.push_back(route(SignalId::proximity(), {0, 2}, {0, -24}));
  SignalSnapshot signals{{SignalId::proximity(), 0.5}};
  REQUIRE(evaluate(spec, signals).at(0).value == -6.0);
  signals[SignalId::proximity()] = 0.0;
  REQUIRE(evaluate(spec, signals).at(0).value == 0.0);
  signals[SignalId::proximity()] = 17.0;
  REQUIRE(evaluate(spec, signals).at(0).value == -24.0);
  signals[SignalId::proximity()] = -3.0;
  REQUIRE(evaluate(spec, signals).at(0).value == 0.0);
  try {
    (void)evaluate(spec, {});
    FAIL("expected MissingSignal");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::MissingSignal);
  }
}

TEST_CASE("evaluate is bounded, monotone and ordered", "[mapping][property]") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-10, 10);
  const Curve curves[] = {{CurveKind::Linear}, {CurveKind::Exponential, 3.0}, {CurveKind::Logarithmic, 1.5}};
  for (int n = 0; n < 300; ++n) {
    double a = u(rng), b = u(rng);
    if (a == b) continue;
    Range in{std::min(a, b), std::max(a, b)};
    Range out{u(rng), u(rng)};
    const Route r = route(SignalId::tcp_speed(), in, out, curves[n % 3]);
    const double lo = std::min(out.lo, out.hi), hi = std::max(out.lo, out.hi);
    double prev_x = -20;
    double prev_y = evaluate_route(r, prev_x);
    for (int k = 0; k < 50; ++k) {
      const double x = prev_x + std::abs(u(rng)) / 10;
      const double y = evaluate_route(r, x);
      REQUIRE(y >= lo);
      REQUIRE(y <= hi);
      if (out.lo <= out.hi) {
        REQUIRE(y >= prev_y);
      } else {
        REQUIRE(y <= prev_y);
      }
      prev_x = x;
      prev_y = y;
    }
  }
  MappingSpec spec;
  spec.routes.push_back(route(SignalId::tcp_speed(), {0, 1}, {0, 1}));
  spec.routes.push_back(route(SignalId::env("light"), {0, 1}, {5, 6}));
  spec.routes[1].sink = "blend.mix";
  const SignalSnapshot snap{{SignalId::tcp_speed(), 0.3}, {SignalId::env("light"), 0.9}};
  const auto out1 = evaluate(spec, snap);
  REQUIRE(out1.size() == 2);
  REQUIRE(out1[0].sink == "master.gain_db");
  REQUIRE(out1[1].sink == "blend.mix");
  REQUIRE(evaluate(spec, snap) == out1);
}
