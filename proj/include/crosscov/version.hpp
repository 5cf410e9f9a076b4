#pragma once

namespace crosscov {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace crosscov
