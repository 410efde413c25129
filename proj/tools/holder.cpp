// holder --connect ADDR --key-file F --term MS --renew-fraction R
//
// Keeps one lease alive over sealed UDP until SIGINT/SIGTERM or
// --duration-s, checking it every --check-us. Engine events go to --log
// (default stderr); a summary line goes to stdout on exit.

#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "live_common.hpp"
#include "tlease/event_log.hpp"
#include "tlease/runtime.hpp"
#include "tlease/udp_endpoint.hpp"

int main(int argc, char** argv) {
  using namespace tlease;
  std::string connect = "127.0.0.1:7400", bind = "127.0.0.1:0", key_file, log_path, freq_mode = "calibrate";
  double term_ms = 100, renew_fraction = 0.2, duration_s = 0, check_us = 500;
  std::uint32_t id = 1;
  std::uint64_t lease_id = 1;

  CLI::App app{"Lease holder"};
  app.add_option("--connect", connect, "granter address host:port")->capture_default_str();
  app.add_option("--bind", bind, "local address")->capture_default_str();
  app.add_option("--key-file", key_file, "64 hex characters; TLEASE_KEY is used when omitted");
  app.add_option("--term", term_ms, "lease term in milliseconds")->capture_default_str();
  app.add_option("--renew-fraction", renew_fraction, "renew when this fraction of the term is left")
      ->capture_default_str();
  app.add_option("--id", id, "holder id (nonzero)")->check(CLI::Range(1u, 0xffffffffu))->capture_default_str();
  app.add_option("--lease", lease_id, "lease id")->capture_default_str();
  app.add_option("--duration-s", duration_s, "stop after this long; 0 runs until signalled")->capture_default_str();
  app.add_option("--check-us", check_us, "interval between lease checks")->capture_default_str();
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
    UdpEndpoint net(bind, connect, key, id, tools::first_nonce_counter());
    const Nanos term = std::chrono::duration_cast<Nanos>(std::chrono::duration<double, std::milli>(term_ms));
    Lease lease = init_lease(term, LeaseId{lease_id});
    lease.config.renew_fraction = renew_fraction;
    HolderOptions opts;
    opts.verify_frequency = freq_mode != "off";
    if (opts.verify_frequency) opts.freq = tools::calibrate_freq_check(hw);
    opts.response_timeout = std::max(Nanos(std::chrono::milliseconds(2)), term / 10);

    std::uint64_t expired = 0;
    EngineObserver to_log = json_lines_observer(log, tools::steady_now);
    HolderEngine engine(lease, HostId{id}, hw, net, opts, [&](const EngineEvent& e) {
      if (e.kind == EngineEventKind::HolderExpired) ++expired;
      to_log(e);
    });

    tools::install_stop_handlers();
    const Nanos start = tools::steady_now();
    const Nanos limit = std::chrono::duration_cast<Nanos>(std::chrono::duration<double>(duration_s));
    const Nanos check = std::chrono::duration_cast<Nanos>(std::chrono::duration<double, std::micro>(check_us));
    Nanos usable{0}, last = start;
    bool was_usable = false;
    bool ever_usable = false;
    while (!tools::g_stop.load() && (duration_s <= 0 || tools::steady_now() - start < limit)) {
      engine.poll();
      const Nanos now = tools::steady_now();
      if (was_usable) usable += now - last;
      last = now;
      was_usable = engine.usable();
      ever_usable = ever_usable || was_usable;
      if (engine.state().phase == HolderPhase::Pending)
        net.wait_readable(std::chrono::milliseconds(1));
      else
        std::this_thread::sleep_for(check);
    }

    const HolderCounters& c = engine.counters();
    const wire::ChannelStats& s = net.channel().stats();
    const double elapsed = std::chrono::duration<double>(tools::steady_now() - start).count();
    nlohmann::ordered_json summary;
    summary["summary"] = "holder";
    summary["seconds"] = elapsed;
    summary["requests"] = c.requests;
    summary["renewals"] = c.renewals;
    summary["retries"] = c.retries;
    summary["timeouts"] = c.timeouts;
    summary["expired"] = expired;
    summary["interrupts"] = c.interrupts;
    summary["freq_failures"] = c.freq_failures;
    summary["auth_failures"] = s.auth_failures;
    summary["replays"] = s.replays;
    summary["malformed"] = s.malformed;
    summary["ever_usable"] = ever_usable;
    summary["usable_fraction"] = elapsed > 0 ? std::chrono::duration<double>(usable).count() / elapsed : 0.0;
    std::cout << summary.dump() << std::endl;
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "holder: " << e.what() << '\n';
    return 1;
  }
}
