// rbs: run, render, validate and probe sessions.
#include "rbs/config.hpp"
#include "rbs/engine.hpp"
#include "rbs/net.hpp"
#include "rbs/runtime.hpp"
#include "rbs/wav.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <csignal>
#include <iostream>
#include <optional>

using namespace rbs;

namespace {

Runtime* g_runtime = nullptr;

void on_signal(int) {
  if (g_runtime) g_runtime->stop();
}

struct Common {
  std::string config;
  std::string script;
  std::optional<std::uint64_t> seed;
};

SessionConfig load(const Common& c) {
  SessionConfig config = c.config.empty() ? SessionConfig{} : load_config(c.config);
  if (c.seed) config.seed = *c.seed;
  return config;
}

TrajectoryScript script_of(const Common& c) { return c.script.empty() ? TrajectoryScript{} : load_script(c.script); }

int report(const ConfigError& e) {
  std::cerr << "error: " << e.what() << "\n";
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robot sound engine: live sessions, offline renders and config checks"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")->capture_default_str();

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "Session config (JSON); defaults when omitted");
    sub->add_option("--script", common.script, "Trajectory script (JSON)");
    sub->add_option("--seed", common.seed, "Override the session PRNG seed");
  };

  auto* render = app.add_subcommand("render", "Render offline to a float32 WAV");
  add_common(render);
  double duration = 0.0;
  std::string out;
  render->add_option("--duration", duration, "Seconds to render")->required()->check(CLI::NonNegativeNumber);
  render->add_option("--out", out, "Output WAV path")->required();

  auto* run = app.add_subcommand("run", "Run a live session (OSC + control API)");
  add_common(run);
  std::optional<double> run_duration;
  std::optional<std::uint16_t> osc_in, osc_out, api_port;
  run->add_option("--duration", run_duration, "Stop after this many seconds")->check(CLI::NonNegativeNumber);
  run->add_option("--out", out, "Also capture the output to a WAV (needs --duration)");
  run->add_option("--osc-in", osc_in, "UDP port for inbound OSC");
  run->add_option("--osc-out", osc_out, "UDP port for outbound OSC");
  run->add_option("--api-port", api_port, "WebSocket port for the control API");

  auto* check = app.add_subcommand("validate", "Check a config (and optionally a script)");
  add_common(check);
  check->get_option("--config")->required()->description("Session config (JSON)");

  auto* probe = app.add_subcommand("probe", "List audio output devices");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*render) {
      const auto config = load(common);
      const auto bytes = render_offline(config, script_of(common), duration);
      wav::write_file(out, bytes);
      std::cout << "wrote " << out << ": " << config.spatial.layout().channel_count() << " channels, "
                << std::llround(duration * config.sample_rate) << " frames at " << config.sample_rate << " Hz\n";
      return 0;
    }

    if (*check) {
      const auto config = load(common);
      if (!common.script.empty()) validate_script(config, load_script(common.script));
      std::cout << "ok: " << common.config << "\n";
      return 0;
    }

    if (*probe) {
      const auto config = load(common);
      std::cout << "null: built-in null device (clock-paced, discards output), " << config.spatial.layout().channel_count()
                << " channels at " << config.sample_rate << " Hz\n";
      return 0;
    }

    auto config = load(common);
    if (osc_in) config.osc.in_port = *osc_in;
    if (osc_out) config.osc.out_port = *osc_out;
    if (api_port) config.api_port = *api_port;
    RuntimeOptions options;
    options.clock = config.mode == RunMode::Realtime ? ClockKind::Wall : ClockKind::Fake;
    if (run_duration) options.duration = *run_duration;
    options.capture = !out.empty();
    Runtime runtime(config, script_of(common), options);
    g_runtime = &runtime;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    runtime.run();
    g_runtime = nullptr;
    if (!out.empty()) {
      wav::write_file(out, wav::encode_float32(runtime.captured(), int(config.spatial.layout().channel_count()),
                                               std::uint32_t(config.sample_rate)));
      std::cout << "wrote " << out << "\n";
    }
    return 0;
  } catch (const ConfigError& e) {
    return report(e);
  } catch (const net::PortInUse& e) {
    std::cerr << "error: PortInUse: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
