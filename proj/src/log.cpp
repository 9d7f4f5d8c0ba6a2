#include "speechgrade/log.hpp"

#include <atomic>
#include <iostream>

namespace sg {

namespace {
std::atomic<bool> g_quiet{false};
}

void log_warn(const std::string& message) {
  if (!g_quiet.load()) std::cerr << "warning: " << message << "\n";
}

void set_log_quiet(bool quiet) { g_quiet.store(quiet); }

}  // namespace sg
