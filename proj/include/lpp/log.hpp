#pragma once

#include <functional>
#include <string>

namespace lpp {

using WarningSink = std::function<void(const std::string&)>;

/// Replaces the warning sink (default: one line on stderr). Pass an empty
/// function to silence warnings. Returns the previous sink.
WarningSink set_warning_sink(WarningSink sink);

void warn(const std::string& message);

}  // namespace lpp
