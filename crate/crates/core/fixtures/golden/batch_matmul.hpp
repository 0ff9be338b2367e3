// batch_matmul.hpp
#pragma once

#include "lapis_dualview_runtime.hpp"

#include <cstdint>
#include <limits>
#include <tuple>

inline void batch_matmul(LAPIS::DualView<float***> v0, LAPIS::DualView<float***> v1, LAPIS::DualView<float***> v2) {
  v2.syncDevice();
  v0.syncDevice();
  v1.syncDevice();
  {
    auto v2_d = v2.d_view;
    auto v0_d = v0.d_view;
    auto v1_d = v1.d_view;
    const auto policy0 = Kokkos::TeamPolicy<LAPIS::ExecSpace>(4, Kokkos::AUTO(), 8);
    Kokkos::parallel_for(policy0, KOKKOS_LAMBDA(const LAPIS::TeamMember& team) {
      const int64_t i0 = team.league_rank();
      const auto policy1 = Kokkos::TeamThreadRange(team, 8);
      Kokkos::parallel_for(policy1, [&](const int64_t i1) {
        for (int64_t i2 = 0; i2 < 8; i2 += 1) {
          const float v16 = v2_d(i0, i1, i2);
          float v17;
          const auto policy2 = Kokkos::ThreadVectorRange(team, 8);
          Kokkos::parallel_reduce(policy2, [&](const int64_t i3, float& r3_0) {
            const float v19 = v0_d(i0, i1, i3);
            const float v20 = v1_d(i0, i3, i2);
            const float v21 = v19 * v20;
            r3_0 += v21;
          }, Kokkos::Sum<float>(v17));
          v17 = v16 + v17;
          Kokkos::single(Kokkos::PerThread(team), [&]() {
            v2_d(i0, i1, i2) = v17;
          });
        }
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
