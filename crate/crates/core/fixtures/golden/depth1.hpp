// depth1.hpp
#pragma once

#include "lapis_dualview_runtime.hpp"

#include <cstdint>
#include <limits>
#include <tuple>

inline void scale(LAPIS::DualView<double*> v0, double v1) {
  const int64_t v4 = static_cast<int64_t>(v0.h_view.extent(0));
  v0.syncDevice();
  {
    auto v0_d = v0.d_view;
    const auto policy0 = Kokkos::RangePolicy<LAPIS::ExecSpace>(0, v4);
    Kokkos::parallel_for(policy0, KOKKOS_LAMBDA(const int64_t i0) {
      const double v6 = v0_d(i0);
      const double v7 = v6 * v1;
      v0_d(i0) = v7;
    });
  }
  v0.modifyDevice();
  v0.syncHost();
}

inline void lapis_initialize() {
}

inline void lapis_finalize() {
}
