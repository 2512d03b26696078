#pragma once

namespace cafht {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace cafht
