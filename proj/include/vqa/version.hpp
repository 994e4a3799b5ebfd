#pragma once

namespace vqa {
inline constexpr const char* kVersion = "0.3.0";
}
