#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fdamon {

/// Broad failure class; the CLI maps it onto its exit code.
enum class ErrorCategory {
  Data,       // malformed input, insufficient data, schema problems
  Numerical,  // singular systems, failed convergence
};

/// Base exception for all library errors. `kind()` names the specific
/// condition (e.g. "MalformedRow", "InsufficientData") and `module()` the
/// component that raised it.
class Error : public std::runtime_error {
 public:
  Error(std::string module, std::string kind, const std::string& what,
        ErrorCategory category = ErrorCategory::Data)
      : std::runtime_error(module + ": " + kind + ": " + what),
        module_(std::move(module)),
        kind_(std::move(kind)),
        category_(category) {}

  const std::string& module() const noexcept { return module_; }
  const std::string& kind() const noexcept { return kind_; }
  ErrorCategory category() const noexcept { return category_; }

 private:
  std::string module_;
  std::string kind_;
  ErrorCategory category_;
};

inline Error data_error(std::string module, std::string kind, const std::string& what) {
  return Error(std::move(module), std::move(kind), what, ErrorCategory::Data);
}

inline Error numerical_error(std::string module, std::string kind, const std::string& what) {
  return Error(std::move(module), std::move(kind), what, ErrorCategory::Numerical);
}

// Warnings go through a process-wide sink. The default prints to stderr.
using WarningHandler = std::function<void(const std::string& module, const std::string& message)>;

/// Installs a new handler and returns the previous one.
WarningHandler set_warning_handler(WarningHandler handler);
void warn(const std::string& module, const std::string& message);

/// RAII capture of warnings, mostly for tests.
class WarningCapture {
 public:
  WarningCapture();
  ~WarningCapture();
  WarningCapture(const WarningCapture&) = delete;
  WarningCapture& operator=(const WarningCapture&) = delete;

  const std::vector<std::string>& messages() const { return messages_; }
  bool contains(const std::string& needle) const;

 private:
  std::vector<std::string> messages_;
  WarningHandler previous_;
};

}  // namespace fdamon
