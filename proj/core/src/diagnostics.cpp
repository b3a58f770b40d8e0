#include "substab/diagnostics.hpp"

#include <iostream>
#include <mutex>

#include "substab/common.hpp"

namespace substab {

namespace {

std::mutex& handler_mutex() {
  static std::mutex m;
  return m;
}

WarningHandler& handler_slot() {
  static WarningHandler h = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
  return h;
}

}  // namespace

WarningHandler set_warning_handler(WarningHandler handler) {
  std::lock_guard lock(handler_mutex());
  WarningHandler previous = std::move(handler_slot());
  handler_slot() = std::move(handler);
  return previous;
}

void warn(const std::string& message) {
  std::lock_guard lock(handler_mutex());
  if (handler_slot()) handler_slot()(message);
}

std::string version() {
#ifdef SUBSTAB_VERSION
  return SUBSTAB_VERSION;
#else
  return "unknown";
#endif
}

}  // namespace substab
