// empty.hpp
#pragma once

#include "lapis_dualview_runtime.hpp"

#include <cstdint>
#include <limits>
#include <tuple>

inline void empty() {
}

inline void lapis_initialize() {
}

inline void lapis_finalize() {
}
