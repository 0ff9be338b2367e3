// host_alloc.hpp
#pragma once

#include "lapis_dualview_runtime.hpp"

#include <cstdint>
#include <limits>
#include <tuple>

inline void host_alloc(LAPIS::DualView<double*> v0, LAPIS::DualView<double*> v1) {
  const int64_t v4 = static_cast<int64_t>(v0.h_view.extent(0));
  {
    auto v0_h = v0.h_view;
    auto v1_h = v1.h_view;
    const auto policy0 = Kokkos::RangePolicy<LAPIS::HostExecSpace>(0, v4);
    Kokkos::parallel_for(policy0, KOKKOS_LAMBDA(const int64_t i0) {
      auto v6_buf = std::make_unique<double[]>(1);
      Kokkos::View<double, Kokkos::LayoutRight, Kokkos::HostSpace, Kokkos::MemoryUnmanaged> v6(v6_buf.get());
      const double v7 = v0_h(i0);
      const double v8 = v7 * v7;
      v6() = v8;
      const double v9 = v6();
      v1_h(i0) = v9;
      v6 = decltype(v6)();
    });
  }
  v1.modifyHost();
}

inline void lapis_initialize() {
}

inline void lapis_finalize() {
}
