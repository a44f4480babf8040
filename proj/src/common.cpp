#include "beliefpi/common.hpp"

#include <iostream>
#include <mutex>

namespace beliefpi {

namespace {

std::mutex& warningMutex() {
  static std::mutex m;
  return m;
}

WarningHandler& warningHandler() {
  static WarningHandler handler = [](std::string_view msg) { std::cerr << "warning: " << msg << '\n'; };
  return handler;
}

}  // namespace

WarningHandler setWarningHandler(WarningHandler handler) {
  std::lock_guard lock(warningMutex());
  std::swap(handler, warningHandler());
  return handler;
}

void warn(std::string_view message) {
  std::lock_guard lock(warningMutex());
  if (warningHandler()) warningHandler()(message);
}

}  // namespace beliefpi
