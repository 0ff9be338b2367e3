// global_weights.hpp
#pragma once

#include "lapis_dualview_runtime.hpp"

#include <cstdint>
#include <limits>
#include <tuple>

inline LAPIS::DualView<double**> g_weights;
inline const double g_weights_data[6] = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0};

inline LAPIS::DualView<double*> apply(LAPIS::DualView<double*> v0) {
  auto v1 = g_weights;
  LAPIS::DualView<double*> v2("v2", 3);
  {
    auto v2_d = v2.d_view;
    const auto policy0 = Kokkos::RangePolicy<LAPIS::ExecSpace>(0, 3);
    Kokkos::parallel_for(policy0, KOKKOS_LAMBDA(const int64_t i0) {
      v2_d(i0) = 0.0;
    });
  }
  v2.modifyDevice();
  auto v13 = g_weights;
  v13.syncDevice();
  v0.syncDevice();
  {
    auto v2_d = v2.d_view;
    auto v1_d = v1.d_view;
    auto v0_d = v0.d_view;
    const int64_t n0 = 3;
    const int64_t ts0 = LAPIS::thread_team_size(2);
    const auto policy1 = Kokkos::TeamPolicy<LAPIS::ExecSpace>((n0 + ts0 - 1) / ts0, ts0, 2);
    Kokkos::parallel_for(policy1, KOKKOS_LAMBDA(const LAPIS::TeamMember& team) {
      Kokkos::parallel_for(Kokkos::TeamThreadRange(team, ts0), [&](const int64_t t0) {
        const int64_t i0 = team.league_rank() * ts0 + t0;
        if (i0 < n0) {
          const double v15 = v2_d(i0);
          double v16;
          const auto policy2 = Kokkos::ThreadVectorRange(team, 2);
          Kokkos::parallel_reduce(policy2, [&](const int64_t i1, double& r1_0) {
            const double v18 = v1_d(i0, i1);
            const double v19 = v0_d(i1);
            const double v20 = v18 * v19;
            r1_0 += v20;
          }, Kokkos::Sum<double>(v16));
          v16 = v15 + v16;
          Kokkos::single(Kokkos::PerThread(team), [&]() {
            v2_d(i0) = v16;
          });
        }
      });
    });
  }
  v2.modifyDevice();
  v2.syncHost();
  return v2;
}

inline void lapis_initialize() {
  g_weights = LAPIS::DualView<double**>("weights", 3, 2);
  LAPIS::fill_host(g_weights, g_weights_data);
}

inline void lapis_finalize() {
  g_weights = LAPIS::DualView<double**>();
}
