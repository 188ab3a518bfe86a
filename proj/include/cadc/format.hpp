#pragma once

#include <string>

namespace cadc {

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double value);

}  // namespace cadc
