// matvec.hpp
#pragma once

#include "lapis_dualview_runtime.hpp"

#include <cstdint>
#include <limits>
#include <tuple>

inline void matvec(LAPIS::DualView<double**> v0, LAPIS::DualView<double*> v1, LAPIS::DualView<double*> v2) {
  v2.syncDevice();
  v0.syncDevice();
  v1.syncDevice();
  {
    auto v2_d = v2.d_view;
    auto v0_d = v0.d_view;
    auto v1_d = v1.d_view;
    const int64_t n0 = 64;
    const int64_t ts0 = LAPIS::thread_team_size(32);
    const auto policy0 = Kokkos::TeamPolicy<LAPIS::ExecSpace>((n0 + ts0 - 1) / ts0, ts0, 32);
    Kokkos::parallel_for(policy0, KOKKOS_LAMBDA(const LAPIS::TeamMember& team) {
      Kokkos::parallel_for(Kokkos::TeamThreadRange(team, ts0), [&](const int64_t t0) {
        const int64_t i0 = team.league_rank() * ts0 + t0;
        if (i0 < n0) {
          const double v9 = v2_d(i0);
          double v10;
          const auto policy1 = Kokkos::ThreadVectorRange(team, 64);
          Kokkos::parallel_reduce(policy1, [&](const int64_t i1, double& r1_0) {
            const double v12 = v0_d(i0, i1);
            const double v13 = v1_d(i1);
            const double v14 = v12 * v13;
            r1_0 += v14;
          }, Kokkos::Sum<double>(v10));
          v10 = v9 + v10;
          Kokkos::single(Kokkos::PerThread(team), [&]() {
            v2_d(i0) = v10;
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
