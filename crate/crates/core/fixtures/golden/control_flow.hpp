// control_flow.hpp
#pragma once

#include "lapis_dualview_runtime.hpp"

#include <cstdint>
#include <limits>
#include <tuple>

inline void prefix(LAPIS::DualView<int64_t**> v0, LAPIS::DualView<int64_t**> v1, int64_t v2) {
  const int64_t v5 = static_cast<int64_t>(v0.h_view.extent(0));
  const int64_t v6 = static_cast<int64_t>(v0.h_view.extent(1));
  v0.syncDevice();
  v1.syncDevice();
  {
    auto v0_d = v0.d_view;
    auto v1_d = v1.d_view;
    const auto policy0 = Kokkos::RangePolicy<LAPIS::ExecSpace>(0, v5);
    Kokkos::parallel_for(policy0, KOKKOS_LAMBDA(const int64_t i0) {
      int64_t v9 = 0;
      for (int64_t i1 = 0; i1 < v6; i1 += 1) {
        const int64_t v11 = v9;
        const int64_t v12 = v0_d(i0, i1);
        const int64_t v13 = v11 + v12;
        const bool v14 = v13 > v2;
        int64_t v15;
        if (v14) {
          v15 = v2;
        } else {
          v15 = v13;
        }
        v1_d(i0, i1) = v15;
        v9 = v15;
      }
    });
  }
  v1.modifyDevice();
  v1.syncHost();
}

inline void lapis_initialize() {
}

inline void lapis_finalize() {
}
