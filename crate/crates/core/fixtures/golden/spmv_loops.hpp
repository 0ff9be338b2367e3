// spmv_loops.hpp
#pragma once

#include "lapis_dualview_runtime.hpp"

#include <cstdint>
#include <limits>
#include <tuple>

inline void spmv(LAPIS::DualView<int64_t*> v0, LAPIS::DualView<int64_t*> v1, LAPIS::DualView<double*> v2, LAPIS::DualView<double*> v3, LAPIS::DualView<double*> v4) {
  const int64_t v7 = static_cast<int64_t>(v0.h_view.extent(0));
  const int64_t v8 = v7 - 1;
  const int64_t v11 = static_cast<int64_t>(v0.h_view.extent(0));
  const int64_t v12 = v11 - 1;
  const int64_t v13 = v0.h_view(v12);
  const int64_t v14 = Kokkos::max<int64_t>(v12, 1);
  const int64_t v15 = LAPIS::ceildivsi<int64_t>(v13, v14);
  const bool v17 = v15 > 1;
  const int64_t v18 = v17 ? 2 : 1;
  const bool v20 = v15 > 2;
  const int64_t v21 = v20 ? 4 : v18;
  const bool v23 = v15 > 4;
  const int64_t v24 = v23 ? 8 : v21;
  const bool v26 = v15 > 8;
  const int64_t v27 = v26 ? 16 : v24;
  const bool v29 = v15 > 16;
  const int64_t v30 = v29 ? 32 : v27;
  v0.syncDevice();
  v2.syncDevice();
  v1.syncDevice();
  v3.syncDevice();
  v4.syncDevice();
  {
    auto v0_d = v0.d_view;
    auto v2_d = v2.d_view;
    auto v1_d = v1.d_view;
    auto v3_d = v3.d_view;
    auto v4_d = v4.d_view;
    const int64_t n0 = v8;
    const int64_t ts0 = LAPIS::thread_team_size(v30);
    const auto policy0 = Kokkos::TeamPolicy<LAPIS::ExecSpace>((n0 + ts0 - 1) / ts0, ts0, v30);
    Kokkos::parallel_for(policy0, KOKKOS_LAMBDA(const LAPIS::TeamMember& team) {
      Kokkos::parallel_for(Kokkos::TeamThreadRange(team, ts0), [&](const int64_t t0) {
        const int64_t i0 = team.league_rank() * ts0 + t0;
        if (i0 < n0) {
          const int64_t v32 = v0_d(i0);
          const int64_t v33 = i0 + 1;
          const int64_t v34 = v0_d(v33);
          const int64_t v35 = v34 - v32;
          double v37;
          const auto policy1 = Kokkos::ThreadVectorRange(team, v35);
          Kokkos::parallel_reduce(policy1, [&](const int64_t i1, double& r1_0) {
            const int64_t v39 = v32 + i1;
            const double v40 = v2_d(v39);
            const int64_t v41 = v1_d(v39);
            const double v42 = v3_d(v41);
            const double v43 = v40 * v42;
            r1_0 += v43;
          }, Kokkos::Sum<double>(v37));
          Kokkos::single(Kokkos::PerThread(team), [&]() {
            v4_d(i0) = v37;
          });
        }
      });
    });
  }
  v4.modifyDevice();
  v4.syncHost();
}

inline void lapis_initialize() {
}

inline void lapis_finalize() {
}
