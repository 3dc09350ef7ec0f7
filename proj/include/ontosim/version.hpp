#pragma once

namespace ontosim {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ontosim
