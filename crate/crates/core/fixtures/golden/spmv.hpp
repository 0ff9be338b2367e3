// spmv.hpp
#pragma once

#include "lapis_dualview_runtime.hpp"

#include <cstdint>
#include <limits>
#include <tuple>

inline LAPIS::DualView<double*> spmv(LAPIS::DualView<int64_t*> v0, LAPIS::DualView<int64_t*> v1, LAPIS::DualView<double*> v2, LAPIS::DualView<double*> v3) {
  const int64_t v6 = static_cast<int64_t>(v0.h_view.extent(0));
  const int64_t v7 = v6 - 1;
  LAPIS::DualView<double*> v8("v8", v7);
  const int64_t v11 = static_cast<int64_t>(v0.h_view.extent(0));
  const int64_t v12 = v11 - 1;
  const int64_t v15 = static_cast<int64_t>(v0.h_view.extent(0));
  const int64_t v16 = v15 - 1;
  const int64_t v17 = v0.h_view(v16);
  const int64_t v18 = Kokkos::max<int64_t>(v16, 1);
  const int64_t v19 = LAPIS::ceildivsi<int64_t>(v17, v18);
  const bool v21 = v19 > 1;
  const int64_t v22 = v21 ? 2 : 1;
  const bool v24 = v19 > 2;
  const int64_t v25 = v24 ? 4 : v22;
  const bool v27 = v19 > 4;
  const int64_t v28 = v27 ? 8 : v25;
  const bool v30 = v19 > 8;
  const int64_t v31 = v30 ? 16 : v28;
  const bool v33 = v19 > 16;
  const int64_t v34 = v33 ? 32 : v31;
  v0.syncDevice();
  v2.syncDevice();
  v1.syncDevice();
  v3.syncDevice();
  {
    auto v0_d = v0.d_view;
    auto v2_d = v2.d_view;
    auto v1_d = v1.d_view;
    auto v3_d = v3.d_view;
    auto v8_d = v8.d_view;
    const int64_t n0 = v12;
    const int64_t ts0 = LAPIS::thread_team_size(v34);
    const auto policy0 = Kokkos::TeamPolicy<LAPIS::ExecSpace>((n0 + ts0 - 1) / ts0, ts0, v34);
    Kokkos::parallel_for(policy0, KOKKOS_LAMBDA(const LAPIS::TeamMember& team) {
      Kokkos::parallel_for(Kokkos::TeamThreadRange(team, ts0), [&](const int64_t t0) {
        const int64_t i0 = team.league_rank() * ts0 + t0;
        if (i0 < n0) {
          const int64_t v36 = v0_d(i0);
          const int64_t v37 = i0 + 1;
          const int64_t v38 = v0_d(v37);
          const int64_t v39 = v38 - v36;
          double v41;
          const auto policy1 = Kokkos::ThreadVectorRange(team, v39);
          Kokkos::parallel_reduce(policy1, [&](const int64_t i1, double& r1_0) {
            const int64_t v43 = v36 + i1;
            const double v44 = v2_d(v43);
            const int64_t v45 = v1_d(v43);
            const double v46 = v3_d(v45);
            const double v47 = v44 * v46;
            r1_0 += v47;
          }, Kokkos::Sum<double>(v41));
          Kokkos::single(Kokkos::PerThread(team), [&]() {
            v8_d(i0) = v41;
          });
        }
      });
    });
  }
  v8.modifyDevice();
  v8.syncHost();
  return v8;
}

inline void lapis_initialize() {
}

inline void lapis_finalize() {
}
