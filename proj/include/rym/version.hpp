#pragma once

namespace rym {

inline constexpr const char* kVersion = "rym 0.1.0";

}  // namespace rym
