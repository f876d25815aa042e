#pragma once

namespace edgeprune {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace edgeprune
