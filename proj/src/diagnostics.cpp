#include "fdamon/error.hpp"

#include <iostream>
#include <mutex>

namespace fdamon {
namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

WarningHandler& sink() {
  static WarningHandler handler = [](const std::string& module, const std::string& message) {
    std::cerr << "warning [" << module << "]: " << message << '\n';
  };
  return handler;
}

}  // namespace

WarningHandler set_warning_handler(WarningHandler handler) {
  std::lock_guard lock(sink_mutex());
  std::swap(sink(), handler);
  return handler;
}

void warn(const std::string& module, const std::string& message) {
  WarningHandler handler;
  {
    std::lock_guard lock(sink_mutex());
    handler = sink();
  }
  if (handler) handler(module, message);
}

WarningCapture::WarningCapture() {
  previous_ = set_warning_handler([this](const std::string& module, const std::string& message) {
    messages_.push_back(module + ": " + message);
  });
}

WarningCapture::~WarningCapture() { set_warning_handler(std::move(previous_)); }

bool WarningCapture::contains(const std::string& needle) const {
  for (const auto& m : messages_)
    if (m.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace fdamon
