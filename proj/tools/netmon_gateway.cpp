// netmon-gateway: HTTP API over the stores, agents and correlator.
#include <csignal>
#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "netmon/error.hpp"
#include "netmon/gateway.hpp"

using namespace netmon;

int main(int argc, char** argv) {
  CLI::App app{"netmon-gateway"};
  std::filesystem::path config_path;
  std::string listen;
  std::string port_file;
  app.add_option("--config", config_path, "Service config (JSON)")->required()->check(CLI::ExistingFile);
  app.add_option("--listen", listen, "host:port, overrides config and NETMON_LISTEN");
  app.add_option("--port-file", port_file, "Write the bound port here once listening");
  CLI11_PARSE(app, argc, argv);

  // Handle SIGINT/SIGTERM synchronously in main rather than in a handler.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  try {
    ServiceConfig cfg = ServiceConfig::load(config_path);
    cfg.apply_env([](const char* name) -> std::optional<std::string> {
      const char* v = std::getenv(name);
      return v ? std::optional<std::string>(v) : std::nullopt;
    });
    if (!listen.empty()) cfg.set_listen(listen);

    Gateway gateway(std::move(cfg));
    const int port = gateway.start();
    std::cerr << "netmon-gateway listening on " << gateway.config().listen_host << ":" << port << "\n";
    if (!port_file.empty()) {
      const auto tmp = port_file + ".tmp";
      std::ofstream(tmp) << port << "\n";
      std::filesystem::rename(tmp, port_file);
    }
    int sig = 0;
    sigwait(&signals, &sig);
    std::cerr << "netmon-gateway: signal " << sig << ", shutting down\n";
    gateway.stop();
  } catch (const Error& e) {
    std::cerr << "netmon-gateway: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "netmon-gateway: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
