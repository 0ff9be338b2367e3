// depth2.hpp
#pragma once

#include "lapis_dualview_runtime.hpp"

#include <cstdint>
#include <limits>
#include <tuple>

inline void add_bias(LAPIS::DualView<float**> v0, LAPIS::DualView<float*> v1, LAPIS::DualView<float**> v2) {
  const int64_t v5 = static_cast<int64_t>(v0.h_view.extent(0));
  const int64_t v6 = static_cast<int64_t>(v0.h_view.extent(1));
  v0.syncDevice();
  v1.syncDevice();
  v2.syncDevice();
  {
    auto v0_d = v0.d_view;
    auto v1_d = v1.d_view;
    auto v2_d = v2.d_view;
    const int64_t n0 = v5;
    const int64_t ts0 = LAPIS::thread_team_size(1);
    const auto policy0 = Kokkos::TeamPolicy<LAPIS::ExecSpace>((n0 + ts0 - 1) / ts0, ts0);
    Kokkos::parallel_for(policy0, KOKKOS_LAMBDA(const LAPIS::TeamMember& team) {
      Kokkos::parallel_for(Kokkos::TeamThreadRange(team, ts0), [&](const int64_t t0) {
        const int64_t i0 = team.league_rank() * ts0 + t0;
        if (i0 < n0) {
          const auto policy1 = Kokkos::ThreadVectorRange(team, v6);
          Kokkos::parallel_for(policy1, [&](const int64_t i1) {
            const float v9 = v0_d(i0, i1);
            const float v10 = v1_d(i1);
            const float v11 = v9 + v10;
            v2_d(i0, i1) = v11;
          });
        }
      });
    });
  }
  v2.modifyDevice();
  v2.syncHost();
}

inline void lapis_initialize() {
}

inline void lapis_finalize() {
}
