#pragma once

namespace covdec {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace covdec
