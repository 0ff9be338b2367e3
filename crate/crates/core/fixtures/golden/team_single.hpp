// team_single.hpp
#pragma once

#include "lapis_dualview_runtime.hpp"

#include <cstdint>
#include <limits>
#include <tuple>

inline void rows(LAPIS::DualView<int32_t*> v0, LAPIS::DualView<int32_t***> v1) {
  v0.syncDevice();
  v1.syncDevice();
  {
    auto v0_d = v0.d_view;
    auto v1_d = v1.d_view;
    const auto policy0 = Kokkos::TeamPolicy<LAPIS::ExecSpace>(4, Kokkos::AUTO(), 16);
    Kokkos::parallel_for(policy0, KOKKOS_LAMBDA(const LAPIS::TeamMember& team) {
      const int64_t i0 = team.league_rank();
      const int32_t v10 = static_cast<int32_t>(i0);
      Kokkos::single(Kokkos::PerTeam(team), [&]() {
        v0_d(i0) = v10;
      });
      const auto policy1 = Kokkos::TeamThreadRange(team, 8);
      Kokkos::parallel_for(policy1, [&](const int64_t i1) {
        const auto policy2 = Kokkos::ThreadVectorRange(team, 16);
        Kokkos::parallel_for(policy2, [&](const int64_t i2) {
          const int32_t v13 = static_cast<int32_t>(i1);
          const int32_t v14 = static_cast<int32_t>(i2);
          const int32_t v15 = v13 * v14;
          const int32_t v16 = v15 + v10;
          v1_d(i0, i1, i2) = v16;
        });
      });
      team.team_barrier();
    });
  }
  v0.modifyDevice();
  v1.modifyDevice();
  v0.syncHost();
  v1.syncHost();
}

inline void lapis_initialize() {
}

inline void lapis_finalize() {
}
