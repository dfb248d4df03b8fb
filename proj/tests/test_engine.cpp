#include "rbs/engine.hpp"
#include "rbs/wav.hpp"

#include "alloc_counter.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace rbs;
using Catch::Approx;

namespace {

// Collaborator placed exactly at the standoff point in front of the initial
// TCP, so steering has nothing to do.
SessionConfig resting_config() {
  SessionConfig c;
  kin::JointState js;
  js.q = c.initial_q;
  const kin::Vec3 tcp = kin::tcp_position(js.q, c.kinematics);
  const kin::Vec3 collab = tcp + c.steering.standoff * kin::Vec3::UnitX();
  c.collaborator = {collab.x(), collab.y(), collab.z()};
  return c;
}

const mapping::Route& route_for(const ControlLoop& control, std::string_view sink) {
  for (const auto& r : control.mapping().routes) {
    if (r.sink == sink) return r;
  }
  FAIL("no route");
  throw;
}

osc::Message msg(std::string address, std::vector<osc::Arg> args = {}) { return {std::move(address), std::move(args)}; }

}  // namespace

TEST_CASE("empty script with silent sources renders exact-length silence") {
  auto c = resting_config();
  for (auto& v : c.voices) v.idle_floor = 0.0;
  c.drone.level = 0.0;
  const double duration = 0.731;
  const auto bytes = render_offline(c, {}, duration);
  const auto audio = wav::parse(bytes);
  CHECK(audio.channels == 5);
  CHECK(audio.sample_rate == 48000);
  REQUIRE(audio.interleaved.size() == std::size_t(std::llround(duration * 48000)) * 5);
  for (float s : audio.interleaved) REQUIRE(s == 0.0f);
}

TEST_CASE("render is deterministic") {
  TrajectoryScript s;
  s.events.push_back({0.1, CollaboratorEvent{{0.6, 0.4, 0.9}, 0.3}});
  s.events.push_back({0.2, ParamEvent{"blend.mix", 0.8, 50.0}});
  const auto a = render_offline(SessionConfig{}, s, 1.0);
  const auto b = render_offline(SessionConfig{}, s, 1.0);
  CHECK(a == b);
  auto other = SessionConfig{};
  other.seed = 2;
  CHECK(render_offline(other, s, 1.0) != a);
}

TEST_CASE("render rejects bad inputs") {
  TrajectoryScript s;
  s.events.push_back({1.0, CollaboratorEvent{}});
  s.events.push_back({0.5, CollaboratorEvent{}});
  CHECK_THROWS_AS(render_offline(SessionConfig{}, s, 1.0), ConfigError);
  auto bad = SessionConfig{};
  bad.block_size = 0;
  CHECK_THROWS_AS(render_offline(bad, {}, 1.0), ConfigError);
  CHECK_THROWS_AS(render_offline(SessionConfig{}, {}, -1.0), ConfigError);
}

TEST_CASE("ticks run on the exact sample grid") {
  Engine e(SessionConfig{});
  CHECK(e.tick_sample(0) == 0);
  CHECK(e.tick_sample(1) == 480);
  CHECK(e.tick_sample(7) == 3360);
  for (int b = 0; b < 40; ++b) {
    const auto n = e.samples();
    e.step(256);
    // Every tick due at or before the block start has run, and no later one.
    CHECK(e.control().ticks() == n / 480 + 1);
  }
  auto odd = SessionConfig{};
  odd.sample_rate = 44100;
  odd.control_rate = 60;
  Engine f(odd);
  CHECK(f.tick_sample(1) == 735);
  CHECK(f.tick_sample(3) == 2205);
}

TEST_CASE("tick is deterministic") {
  Engine a(SessionConfig{});
  Engine b(SessionConfig{});
  for (int i = 0; i < 150; ++i) {
    a.control().tick();
    b.control().tick();
  }
  CHECK(a.control().joints().q == b.control().joints().q);
  CHECK(a.control().targets() == b.control().targets());
}

TEST_CASE("robot at rest sends no parameter updates") {
  Engine e(resting_config());
  for (int i = 0; i < 5; ++i) e.step(256);
  const auto sent = e.control().stats().updates_sent;
  for (int i = 0; i < 400; ++i) e.step(256);
  CHECK(e.control().stats().updates_sent == sent);
  CHECK(e.control().joints().qdot.norm() == 0.0);
}

TEST_CASE("collaborator step: TCP error decreases until within tolerance") {
  Engine e(resting_config());
  auto& ctl = e.control();
  const kin::Vec3 start = ctl.chain().tcp.position;
  ctl.set_collaborator(start + kin::Vec3(0.1, 0.2, -0.15));
  double previous = std::numeric_limits<double>::infinity();
  bool converged = false;
  for (int i = 0; i < 200; ++i) {
    ctl.tick();
    const double err = kin::standoff_error(ctl.chain().tcp.position, ctl.collaborator(), ctl.config().steering.standoff);
    if (err < 0.02) {
      converged = true;
      break;
    }
    CHECK(err < previous);
    previous = err;
  }
  CHECK(converged);
}

TEST_CASE("collaborator glide is linear in time") {
  Engine e(SessionConfig{});
  auto& ctl = e.control();
  const kin::Vec3 from = ctl.collaborator();
  const kin::Vec3 to(0.5, 0.5, 0.5);
  ctl.set_collaborator(to, 1.0);
  for (int i = 0; i <= 50; ++i) ctl.tick();
  CHECK((ctl.collaborator() - (from + 0.5 * (to - from))).norm() < 1e-12);
  for (int i = 0; i < 60; ++i) ctl.tick();
  CHECK(ctl.collaborator() == to);
}

TEST_CASE("osc ingress") {
  Engine e(SessionConfig{});
  auto& ctl = e.control();

  ctl.ingress(msg("/collab/pos", {1.0f, 0.0f, 1.0f}));
  CHECK(ctl.collaborator() == kin::Vec3(1.0, 0.0, 1.0));

  const kin::Vec3 before = ctl.collaborator();
  ctl.ingress(msg("/unknown", {1.0f}));
  CHECK(ctl.stats().osc_unknown == 1);
  CHECK(ctl.collaborator() == before);

  ctl.ingress(msg("/env/light", {0.5f}));
  CHECK(ctl.env().at("light") == 0.5);
  ctl.ingress(msg("/env/light", {std::int32_t{1}}));
  CHECK(ctl.env().at("light") == 1.0);

  ctl.ingress(msg("/collab/pos", {1.0f, 2.0f}));
  ctl.ingress(msg("/collab/pos", {1.0f, std::string("x"), 2.0f}));
  ctl.ingress(msg("/env/light"));
  CHECK(ctl.stats().osc_malformed == 3);
  CHECK(ctl.collaborator() == before);

  osc::Bundle bundle;
  bundle.elements.push_back(osc::Packet{msg("/collab/pos", {0.5f, 0.5f, 0.5f})});
  bundle.elements.push_back(osc::Packet{msg("/env/wind", {2.0f})});
  ctl.ingress(osc::Packet{bundle});
  CHECK(ctl.collaborator() == kin::Vec3(0.5, 0.5, 0.5));
  CHECK(ctl.env().at("wind") == 2.0);
}

TEST_CASE("env signals feed routes") {
  Engine e(SessionConfig{});
  auto& ctl = e.control();
  mapping::Route r;
  r.source = mapping::SignalId::env("light");
  r.in_range = {0.0, 1.0};
  r.out_range = {0.0, 1.0};
  r.sink = "blend.mix";
  CHECK_THROWS_AS(ctl.set_route(r), ValidationError);
  ctl.ingress(msg("/env/light", {0.25f}));
  ctl.set_route(r);
  ctl.tick();
  CHECK(ctl.targets().at("blend.mix") == 0.25);
}

TEST_CASE("osc egress schema") {
  Engine e(resting_config());
  auto& ctl = e.control();
  ctl.tick();
  const auto first = ctl.egress();
  REQUIRE(first.size() == 7);
  CHECK(first[0].address == "/tcp/pose");
  CHECK(first[0].args.size() == 6);
  for (const auto& a : first[0].args) CHECK(std::holds_alternative<float>(a));
  for (int i = 0; i < 6; ++i) {
    CHECK(first[std::size_t(i) + 1].address == "/link/" + std::to_string(i) + "/rpy");
    CHECK(first[std::size_t(i) + 1].args.size() == 3);
  }
  const auto& tcp = ctl.chain().tcp.position;
  CHECK(std::get<float>(first[0].args[2]) == float(tcp.z()));
  for (const auto& m : first) CHECK(osc::decode_message(osc::encode_message(m)) == m);
  ctl.tick();
  CHECK(ctl.egress() == first);
}

TEST_CASE("collaborator OSC update reaches parameter targets within one tick") {
  Engine e(SessionConfig{});
  for (int i = 0; i < 100; ++i) e.step(256);
  auto& ctl = e.control();
  const auto& route = route_for(ctl, "master.gain_db");
  const auto tick_before = ctl.ticks();
  ctl.ingress(msg("/collab/pos", {0.6f, 0.0f, 0.8f}));
  const auto sample_before = e.samples();
  while (ctl.ticks() == tick_before) e.step(256);
  CHECK(e.samples() - sample_before <= 480 + 256);
  CHECK(ctl.targets().at("master.gain_db") == Approx(mapping::evaluate_route(route, 1.0)).margin(1e-6));
}

TEST_CASE("control mutations validate their inputs") {
  Engine e(SessionConfig{});
  auto& ctl = e.control();

  CHECK(ctl.set_param("blend.mix", 3.0) == 1.0);
  CHECK(ctl.set_param("lp1.cutoff_hz", 1.0) == 10.0);
  try {
    ctl.set_param("lp1.nope", 1.0);
    FAIL();
  } catch (const ValidationError& err) {
    CHECK(err.field() == "address");
  }
  CHECK_THROWS_AS(ctl.set_param("blend.mix", std::nan("")), ValidationError);

  mapping::Route r;
  r.source = mapping::SignalId::proximity();
  r.in_range = {0.0, 2.0};
  r.out_range = {0.0, -24.0};
  r.sink = "nope.gain_db";
  try {
    ctl.set_route(r);
    FAIL();
  } catch (const ValidationError& err) {
    CHECK(err.field() == "sink");
  }
  r.sink = "master.gain_db";
  r.in_range = {1.0, 1.0};
  try {
    ctl.set_route(r);
    FAIL();
  } catch (const ValidationError& err) {
    CHECK(err.field() == "in");
  }
  r.in_range = {0.0, 2.0};
  const auto count = ctl.mapping().routes.size();
  ctl.set_route(r);
  CHECK(ctl.mapping().routes.size() == count);
  CHECK(route_for(ctl, "master.gain_db") == r);

  ctl.delete_route("master.gain_db");
  CHECK(ctl.mapping().routes.size() == count - 1);
  try {
    ctl.delete_route("master.gain_db");
    FAIL();
  } catch (const ValidationError& err) {
    CHECK(err.field() == "sink");
  }
  CHECK_THROWS_AS(ctl.set_collaborator(kin::Vec3(0, std::nan(""), 0)), ValidationError);
  CHECK_THROWS_AS(ctl.set_env("a/b", 1.0), ValidationError);
}

TEST_CASE("script events apply at their tick") {
  TrajectoryScript s;
  s.events.push_back({0.05, ParamEvent{"drone.gain_db", -6.0, 10.0}});
  s.events.push_back({0.05, EnvEvent{"light", 0.7}});
  s.events.push_back({0.1, DeleteRouteEvent{"lp1.cutoff_hz"}});
  s.events.push_back({0.2, DeleteRouteEvent{"lp1.cutoff_hz"}});  // already gone: logged, skipped
  Engine e(SessionConfig{}, s);
  auto& ctl = e.control();
  for (int i = 0; i < 5; ++i) ctl.tick();
  CHECK(ctl.targets().at("drone.gain_db") == 0.0);
  CHECK_FALSE(ctl.env().contains("light"));
  ctl.tick();
  CHECK(ctl.targets().at("drone.gain_db") == -6.0);
  CHECK(ctl.env().at("light") == 0.7);
  for (int i = 0; i < 20; ++i) ctl.tick();
  CHECK(ctl.stats().script_errors == 1);
  CHECK(ctl.mapping().routes.size() == SessionConfig{}.mapping.routes.size() - 1);
}

TEST_CASE("blend endpoints through the engine are sample-exact") {
  for (double mix : {0.0, 1.0}) {
    auto c = SessionConfig{};
    c.mix = mix;
    c.mapping.routes.clear();
    Engine e(c);
    e.control().set_collaborator(kin::Vec3(0.4, 0.6, 0.9));
    for (int b = 0; b < 200; ++b) {
      e.step(256);
      const auto blended = e.audio().blended();
      const auto expected = mix == 0.0 ? e.audio().consequential() : e.audio().synthetic();
      REQUIRE(std::equal(blended.begin(), blended.end(), expected.begin(), expected.end()));
    }
  }
}

TEST_CASE("mix automation moves between the feeds") {
  auto c = SessionConfig{};
  c.mapping.routes.clear();
  Engine e(c);
  e.control().set_param("blend.mix", 1.0, 5.0);
  for (int b = 0; b < 100; ++b) e.step(256);
  CHECK(e.audio().mix().current() == 1.0);
  const auto blended = e.audio().blended();
  const auto syn = e.audio().synthetic();
  CHECK(std::equal(blended.begin(), blended.end(), syn.begin(), syn.end()));
}

TEST_CASE("audio block processing does not allocate") {
  Engine e(load_config(RBS_CONFIG_DIR "/demo_session.json"), load_script(RBS_CONFIG_DIR "/demo_script.json"));
  for (int b = 0; b < 4; ++b) e.step(256);
  const auto before = test::allocation_count();
  const std::size_t blocks = 10 * 48000 / 256;
  for (std::size_t b = 0; b < blocks; ++b) {
    while (e.tick_sample(e.control().ticks()) <= e.samples() + 256 * b) e.control().tick();
    test::CountAllocations scope;
    e.audio().process(256);
  }
  CHECK(test::allocation_count() == before);
  CHECK(e.control().stats().queue_full == 0);
}

TEST_CASE("output is finite and meters are published") {
  Engine e(SessionConfig{});
  for (int b = 0; b < 200; ++b) e.step(256);
  CHECK(e.audio().nonfinite() == 0);
  CHECK(e.audio().output().isFinite().all());
  const auto& m = e.control().meters();
  CHECK(m.channels == 5);
  CHECK(m.rms[4] > 0.0);
}

TEST_CASE("voice seeds differ per voice and session") {
  CHECK(voice_seed(1, 0) != voice_seed(1, 1));
  CHECK(voice_seed(1, 0) != voice_seed(2, 0));
  CHECK(voice_seed(7, 3) == voice_seed(7, 3));
}
