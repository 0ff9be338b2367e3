// axis_reduce.hpp
#pragma once

#include "lapis_dualview_runtime.hpp"

#include <cstdint>
#include <limits>
#include <tuple>

inline void reduce(LAPIS::DualView<double**> v0, LAPIS::DualView<double*> v1, LAPIS::DualView<double*> v2) {
  const int64_t v8 = static_cast<int64_t>(v1.h_view.extent(0));
  v1.syncDevice();
  {
    auto v1_d = v1.d_view;
    const auto policy0 = Kokkos::RangePolicy<LAPIS::ExecSpace>(0, v8);
    Kokkos::parallel_for(policy0, KOKKOS_LAMBDA(const int64_t i0) {
      v1_d(i0) = 0.0;
    });
  }
  v1.modifyDevice();
  const int64_t v13 = static_cast<int64_t>(v2.h_view.extent(0));
  v2.syncDevice();
  {
    auto v2_d = v2.d_view;
    const auto policy1 = Kokkos::RangePolicy<LAPIS::ExecSpace>(0, v13);
    Kokkos::parallel_for(policy1, KOKKOS_LAMBDA(const int64_t i0) {
      v2_d(i0) = (-std::numeric_limits<double>::infinity());
    });
  }
  v2.modifyDevice();
  const int64_t v18 = static_cast<int64_t>(v0.h_view.extent(0));
  const int64_t v20 = static_cast<int64_t>(v0.h_view.extent(1));
  v0.syncDevice();
  {
    auto v1_d = v1.d_view;
    auto v0_d = v0.d_view;
    const int64_t n0 = v18;
    const int64_t ts0 = LAPIS::thread_team_size(1);
    const auto policy2 = Kokkos::TeamPolicy<LAPIS::ExecSpace>((n0 + ts0 - 1) / ts0, ts0);
    Kokkos::parallel_for(policy2, KOKKOS_LAMBDA(const LAPIS::TeamMember& team) {
      Kokkos::parallel_for(Kokkos::TeamThreadRange(team, ts0), [&](const int64_t t0) {
        const int64_t i0 = team.league_rank() * ts0 + t0;
        if (i0 < n0) {
          const double v22 = v1_d(i0);
          double v23;
          const auto policy3 = Kokkos::ThreadVectorRange(team, v20);
          Kokkos::parallel_reduce(policy3, [&](const int64_t i1, double& r1_0) {
            const double v25 = v0_d(i0, i1);
            r1_0 += v25;
          }, Kokkos::Sum<double>(v23));
          v23 = v22 + v23;
          Kokkos::single(Kokkos::PerThread(team), [&]() {
            v1_d(i0) = v23;
          });
        }
      });
    });
  }
  v1.modifyDevice();
  const int64_t v32 = static_cast<int64_t>(v0.h_view.extent(1));
  const int64_t v34 = static_cast<int64_t>(v0.h_view.extent(0));
  {
    auto v2_d = v2.d_view;
    auto v0_d = v0.d_view;
    const int64_t n0 = v32;
    const int64_t ts0 = LAPIS::thread_team_size(1);
    const auto policy4 = Kokkos::TeamPolicy<LAPIS::ExecSpace>((n0 + ts0 - 1) / ts0, ts0);
    Kokkos::parallel_for(policy4, KOKKOS_LAMBDA(const LAPIS::TeamMember& team) {
      Kokkos::parallel_for(Kokkos::TeamThreadRange(team, ts0), [&](const int64_t t0) {
        const int64_t i0 = team.league_rank() * ts0 + t0;
        if (i0 < n0) {
          const double v36 = v2_d(i0);
          double v37;
          const auto policy5 = Kokkos::ThreadVectorRange(team, v34);
          Kokkos::parallel_reduce(policy5, [&](const int64_t i1, double& r1_0) {
            const double v39 = v0_d(i1, i0);
            if (r1_0 < v39) r1_0 = v39;
          }, Kokkos::Max<double>(v37));
          if (v37 < v36) v37 = v36;
          Kokkos::single(Kokkos::PerThread(team), [&]() {
            v2_d(i0) = v37;
          });
        }
      });
    });
  }
  v2.modifyDevice();
  v1.syncHost();
  v2.syncHost();
}

inline void lapis_initialize() {
}

inline void lapis_finalize() {
}
