// elementwise_chain.hpp
#pragma once

#include "lapis_dualview_runtime.hpp"

#include <cstdint>
#include <limits>
#include <tuple>

inline LAPIS::DualView<double**> chain(LAPIS::DualView<double**> v0, LAPIS::DualView<double**> v1, LAPIS::DualView<double**> v2) {
  const int64_t v5 = static_cast<int64_t>(v0.h_view.extent(0));
  const int64_t v6 = static_cast<int64_t>(v0.h_view.extent(1));
  LAPIS::DeviceView<double**> v7("v7", v5, v6);
  const int64_t v11 = static_cast<int64_t>(v7.extent(0));
  const int64_t v13 = static_cast<int64_t>(v7.extent(1));
  v0.syncDevice();
  v1.syncDevice();
  {
    auto v0_d = v0.d_view;
    auto v1_d = v1.d_view;
    const auto policy0 = Kokkos::MDRangePolicy<LAPIS::ExecSpace, Kokkos::Rank<2>, Kokkos::IndexType<int64_t>>({0, 0}, {v11, v13});
    Kokkos::parallel_for(policy0, KOKKOS_LAMBDA(const int64_t i0, const int64_t i1) {
      const double v16 = v0_d(i0, i1);
      const double v17 = v1_d(i0, i1);
      const double v18 = v7(i0, i1);
      const double v19 = v16 * v17;
      v7(i0, i1) = v19;
    });
  }
  LAPIS::DualView<double**> v20("v20", v5, v6);
  const int64_t v24 = static_cast<int64_t>(v20.h_view.extent(0));
  const int64_t v26 = static_cast<int64_t>(v20.h_view.extent(1));
  v2.syncDevice();
  {
    auto v2_d = v2.d_view;
    auto v20_d = v20.d_view;
    const auto policy1 = Kokkos::MDRangePolicy<LAPIS::ExecSpace, Kokkos::Rank<2>, Kokkos::IndexType<int64_t>>({0, 0}, {v24, v26});
    Kokkos::parallel_for(policy1, KOKKOS_LAMBDA(const int64_t i0, const int64_t i1) {
      const double v29 = v7(i0, i1);
      const double v30 = v2_d(i0, i1);
      const double v31 = v20_d(i0, i1);
      const double v32 = v29 + v30;
      const double v34 = LAPIS::maximumf<double>(v32, 0.0);
      v20_d(i0, i1) = v34;
    });
  }
  v20.modifyDevice();
  v7 = decltype(v7)();
  v20.syncHost();
  return v20;
}

inline void lapis_initialize() {
}

inline void lapis_finalize() {
}
