// depth4.hpp
#pragma once

#include "lapis_dualview_runtime.hpp"

#include <cstdint>
#include <limits>
#include <tuple>

inline void sum_inner(LAPIS::DualView<int64_t****> v0, LAPIS::DualView<int64_t**> v1) {
  v0.syncDevice();
  v1.syncDevice();
  {
    auto v0_d = v0.d_view;
    auto v1_d = v1.d_view;
    const auto policy0 = Kokkos::TeamPolicy<LAPIS::ExecSpace>(3, Kokkos::AUTO(), 8);
    Kokkos::parallel_for(policy0, KOKKOS_LAMBDA(const LAPIS::TeamMember& team) {
      const int64_t i0 = team.league_rank();
      const auto policy1 = Kokkos::TeamThreadRange(team, 5);
      Kokkos::parallel_for(policy1, [&](const int64_t i1) {
        int64_t v15 = 0;
        for (int64_t i2 = 0; i2 < 4; i2 += 1) {
          const int64_t v17 = v15;
          int64_t v19;
          const auto policy2 = Kokkos::ThreadVectorRange(team, 6);
          Kokkos::parallel_reduce(policy2, [&](const int64_t i3, int64_t& r3_0) {
            const int64_t v21 = v0_d(i0, i1, i2, i3);
            r3_0 += v21;
          }, Kokkos::Sum<int64_t>(v19));
          const int64_t v25 = v17 + v19;
          v15 = v25;
        }
        Kokkos::single(Kokkos::PerThread(team), [&]() {
          v1_d(i0, i1) = v15;
        });
      });
      team.team_barrier();
    });
  }
  v1.modifyDevice();
  v1.syncHost();
}

inline void lapis_initialize() {
}

inline void lapis_finalize() {
}
