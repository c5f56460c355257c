#include <atomic>
#include <csignal>
#include <iostream>

#include "app.hpp"

namespace {

std::atomic<bool> g_cancel{false};

extern "C" void on_signal(int) {
  if (g_cancel.exchange(true)) std::_Exit(130);
}

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::vector<std::string> args(argv + 1, argv + argc);
  return ckg::app::run_cli(args, std::cout, std::cerr, &g_cancel);
}
