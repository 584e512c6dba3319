#pragma once

#include <string_view>

namespace blade {

inline constexpr std::string_view kBladeVersion = "0.1.0";

}  // namespace blade
