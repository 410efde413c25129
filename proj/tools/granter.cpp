// granter --bind ADDR --key-file F --term MS --multiplier K
//
// Serves leases over sealed UDP until SIGINT/SIGTERM or --duration-s. Engine
// events go to --log (default stderr) as JSON lines; a summary line goes to
// stdout on exit.

#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "live_common.hpp"
#include "tlease/event_log.hpp"
#include "tlease/runtime.hpp"
#include "tlease/udp_endpoint.hpp"

int main(int argc, char** argv) {
  using namespace tlease;
  std::string bind = "127.0.0.1:7400", key_file, log_path, freq_mode = "calibrate";
  double term_ms = 100, multiplier = 2, duration_s = 0;

  CLI::App app{"Lease granter"};
  app.add_option("--bind", bind, "listen address host:port")->capture_default_str();
  app.add_option("--key-file", key_file, "64 hex characters; TLEASE_KEY is used when omitted");
  app.add_option("--term", term_ms, "lease term in milliseconds")->capture_default_str();
  app.add_option("--multiplier", multiplier, "granter term multiplier")->capture_default_str();
  app.add_option("--duration-s", duration_s, "stop after this long; 0 runs until signalled")->capture_default_str();
  app.add_option("--log", log_path, "event log file (default stderr)");
  app.add_option("--freq-check", freq_mode, "frequency verification")
      ->check(CLI::IsMember({"calibrate", "off"}))
      ->capture_default_str();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 64;
  }

  try {
    const wire::Key key = wire::load_key(key_file);
    std::ofstream log_file;
    if (!log_path.empty()) log_file.open(log_path);
    std::ostream& log = log_path.empty() ? std::cerr : log_file;

    RealHardware hw;
    UdpEndpoint net(bind, std::nullopt, key, 0, tools::first_nonce_counter());
    GranterOptions opts;
    opts.lease.lease_term = std::chrono::duration_cast<Nanos>(std::chrono::duration<double, std::milli>(term_ms));
    opts.lease.granter_multiplier = multiplier;
    opts.verify_frequency = freq_mode != "off";
    if (opts.verify_frequency) opts.freq = tools::calibrate_freq_check(hw);
    std::uint64_t cleared = 0;
    EngineObserver to_log = json_lines_observer(log, tools::steady_now);
    GranterEngine engine(hw, net, opts, [&](const EngineEvent& e) {
      if (e.kind == EngineEventKind::GrantCleared) ++cleared;
      to_log(e);
    });

    tools::install_stop_handlers();
    const Nanos start = tools::steady_now();
    const Nanos limit = std::chrono::duration_cast<Nanos>(std::chrono::duration<double>(duration_s));
    std::cerr << "granter listening on 127.0.0.1:" << net.local_port() << '\n';
    engine.serve_forever(
        [&] { return tools::g_stop.load() || (duration_s > 0 && tools::steady_now() - start >= limit); },
        [&](Nanos d) {
          net.wait_readable(std::max(std::chrono::milliseconds(1), std::chrono::duration_cast<std::chrono::milliseconds>(d)));
        });

    const GranterCounters& c = engine.counters();
    const wire::ChannelStats& s = net.channel().stats();
    nlohmann::ordered_json summary;
    summary["summary"] = "granter";
    summary["requests"] = c.requests;
    summary["granted"] = c.granted;
    summary["denied"] = c.denied;
    summary["expired"] = cleared;
    summary["interrupts"] = c.interrupts;
    summary["alarms"] = c.alarms;
    summary["auth_failures"] = s.auth_failures;
    summary["replays"] = s.replays;
    summary["malformed"] = s.malformed;
    std::cout << summary.dump() << std::endl;
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "granter: " << e.what() << '\n';
    return 1;
  }
}
