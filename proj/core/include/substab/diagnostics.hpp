#pragma once

#include <functional>
#include <string>

namespace substab {

using WarningHandler = std::function<void(const std::string&)>;

/// Installs a process-wide sink for non-fatal warnings (dropped CSV columns,
/// borderline numerical ranks). Returns the previous handler. The default
/// handler writes to stderr.
WarningHandler set_warning_handler(WarningHandler handler);

void warn(const std::string& message);

}  // namespace substab
