#pragma once

namespace basiscluster {
inline constexpr const char* kVersion = "0.1.0";
}
