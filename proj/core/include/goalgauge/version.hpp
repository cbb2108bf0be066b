#pragma once

namespace goalgauge {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace goalgauge
