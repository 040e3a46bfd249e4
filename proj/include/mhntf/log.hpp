#pragma once

#include <functional>
#include <string_view>

namespace mhntf {

using WarningSink = std::function<void(std::string_view)>;

/// Routes library warnings (default: stderr). Passing an empty function
/// restores the default. Not thread-safe against concurrent warn() calls.
void set_warning_sink(WarningSink sink);
void warn(std::string_view message);

}  // namespace mhntf
