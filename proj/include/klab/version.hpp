#pragma once

namespace klab {
inline constexpr const char* kVersion = "0.1.0";
}
