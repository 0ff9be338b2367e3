// matmul_i32.hpp
#pragma once

#include "lapis_dualview_runtime.hpp"

#include <cstdint>
#include <limits>
#include <tuple>

inline void matmul(LAPIS::DualView<int32_t**> v0, LAPIS::DualView<int32_t**> v1, LAPIS::DualView<int32_t**> v2) {
  v2.syncDevice();
  v0.syncDevice();
  v1.syncDevice();
  {
    auto v2_d = v2.d_view;
    auto v0_d = v0.d_view;
    auto v1_d = v1.d_view;
    const auto policy0 = Kokkos::TeamPolicy<LAPIS::ExecSpace>(16, Kokkos::AUTO(), 16);
    Kokkos::parallel_for(policy0, KOKKOS_LAMBDA(const LAPIS::TeamMember& team) {
      const int64_t i0 = team.league_rank();
      const auto policy1 = Kokkos::TeamThreadRange(team, 16);
      Kokkos::parallel_for(policy1, [&](const int64_t i1) {
        const int32_t v12 = v2_d(i0, i1);
        int32_t v13;
        const auto policy2 = Kokkos::ThreadVectorRange(team, 16);
        Kokkos::parallel_reduce(policy2, [&](const int64_t i2, int32_t& r2_0) {
          const int32_t v15 = v0_d(i0, i2);
          const int32_t v16 = v1_d(i2, i1);
          const int32_t v17 = v15 * v16;
          r2_0 += v17;
        }, Kokkos::Sum<int32_t>(v13));
        v13 = v12 + v13;
        Kokkos::single(Kokkos::PerThread(team), [&]() {
          v2_d(i0, i1) = v13;
        });
      });
      team.team_barrier();
    });
  }
  v2.modifyDevice();
  v2.syncHost();
}

inline void lapis_initialize() {
}

inline void lapis_finalize() {
}
