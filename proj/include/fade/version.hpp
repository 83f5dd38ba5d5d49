#pragma once

namespace fade {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace fade
