#pragma once

#include <string>

namespace sg {

// Warnings go to stderr; quiet() silences them (used by tests).
void log_warn(const std::string& message);
void set_log_quiet(bool quiet);

}  // namespace sg
