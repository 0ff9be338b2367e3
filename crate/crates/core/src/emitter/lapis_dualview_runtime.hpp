#pragma once

#include <Kokkos_Core.hpp>

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace LAPIS {

using ExecSpace = Kokkos::DefaultExecutionSpace;
using HostExecSpace = Kokkos::DefaultHostExecutionSpace;
using DeviceSpace = ExecSpace::memory_space;
using TeamMember = Kokkos::TeamPolicy<ExecSpace>::member_type;
using HostTeamMember = Kokkos::TeamPolicy<HostExecSpace>::member_type;
using half = Kokkos::Experimental::half_t;

template <typename DataType>
using HostView = Kokkos::View<DataType, Kokkos::LayoutRight, Kokkos::HostSpace>;
template <typename DataType>
using DeviceView = Kokkos::View<DataType, Kokkos::LayoutRight, DeviceSpace>;

// Copy counters, read by instrumented test drivers.
struct TransferCounts {
  std::uint64_t h2d = 0;
  std::uint64_t d2h = 0;
};

inline TransferCounts& transfer_counts() {
  static TransferCounts counts;
  return counts;
}

// Coherence state of one root allocation. Subviews hold the same state
// object, so a child's flags are its root's flags, and the copy callbacks
// keep the root's storage alive for as long as any child exists.
struct RootState {
  bool modified_host = false;
  bool modified_device = false;
  bool shared = false;
  std::function<void()> copy_to_device;
  std::function<void()> copy_to_host;
};

template <typename DataType, typename Layout = Kokkos::LayoutRight>
class DualView {
 public:
  using host_view_type = Kokkos::View<DataType, Layout, Kokkos::HostSpace>;
  using device_view_type = Kokkos::View<DataType, Layout, DeviceSpace>;
  static constexpr bool same_space = std::is_same<typename host_view_type::memory_space,
                                                  typename device_view_type::memory_space>::value;

  host_view_type h_view;
  device_view_type d_view;

  DualView() = default;

  template <typename... Extents>
  explicit DualView(const std::string& label, Extents... extents)
      : h_view(label + "_h", static_cast<std::size_t>(extents)...) {
    if constexpr (same_space) {
      d_view = h_view;
    } else {
      d_view = device_view_type(label + "_d", static_cast<std::size_t>(extents)...);
    }
    make_root();
  }

  // Both sides are assumed to hold the same data on entry.
  DualView(const host_view_type& h, const device_view_type& d) : h_view(h), d_view(d) {
    make_root();
  }

  void syncDevice() const {
    if (state_ && state_->modified_host) {
      if (!state_->shared) {
        state_->copy_to_device();
        ++transfer_counts().h2d;
      }
      state_->modified_host = false;
    }
  }

  void syncHost() const {
    if (state_ && state_->modified_device) {
      if (!state_->shared) {
        state_->copy_to_host();
        ++transfer_counts().d2h;
      }
      state_->modified_device = false;
    }
  }

  void modifyHost() const {
    if (state_) state_->modified_host = true;
  }

  void modifyDevice() const {
    if (state_) state_->modified_device = true;
  }

  bool modified_host() const { return state_ && state_->modified_host; }
  bool modified_device() const { return state_ && state_->modified_device; }

  std::size_t extent(std::size_t axis) const { return h_view.extent(axis); }

  // Unit-stride window sharing this view's root state.
  template <typename... Ranges>
  auto subview(Ranges... ranges) const {
    auto h = Kokkos::subview(h_view, ranges...);
    auto d = Kokkos::subview(d_view, ranges...);
    using Child = DualView<typename decltype(h)::data_type, Kokkos::LayoutStride>;
    Child child;
    child.h_view = h;
    child.d_view = d;
    child.state_ = state_;
    return child;
  }

 private:
  template <typename, typename>
  friend class DualView;

  void make_root() {
    auto st = std::make_shared<RootState>();
    st->shared = h_view.data() == d_view.data();
    host_view_type h = h_view;
    device_view_type d = d_view;
    st->copy_to_device = [h, d]() { Kokkos::deep_copy(d, h); };
    st->copy_to_host = [h, d]() { Kokkos::deep_copy(h, d); };
    state_ = std::move(st);
  }

  std::shared_ptr<RootState> state_;
};

template <typename DataType, typename Layout>
const auto& device_view(const DualView<DataType, Layout>& v) {
  return v.d_view;
}

template <typename ViewType>
const ViewType& device_view(const ViewType& v) {
  return v;
}

template <typename DataType, typename Layout>
const auto& host_view(const DualView<DataType, Layout>& v) {
  return v.h_view;
}

template <typename ViewType>
const ViewType& host_view(const ViewType& v) {
  return v;
}

template <typename DataType, typename Layout>
void mark_host_modified(const DualView<DataType, Layout>& v) {
  v.modifyHost();
}

template <typename ViewType>
void mark_host_modified(const ViewType&) {}

// Copy row-major constant data into the host side.
template <typename V, typename T>
void fill_host(const V& v, const T* data) {
  auto h = host_view(v);
  using Elem = typename std::decay_t<decltype(h)>::non_const_value_type;
  Elem* out = h.data();
  for (std::size_t k = 0; k < h.span(); ++k) out[k] = static_cast<Elem>(data[k]);
  mark_host_modified(v);
}

// Read raw little-endian element bytes from a sidecar file.
template <typename V>
void load_sidecar(const V& v, const char* path) {
  auto h = host_view(v);
  using Elem = typename std::decay_t<decltype(h)>::non_const_value_type;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(std::string("cannot open ") + path);
  in.read(reinterpret_cast<char*>(h.data()), static_cast<std::streamsize>(h.span() * sizeof(Elem)));
  if (!in) throw std::runtime_error(std::string("short read from ") + path);
  mark_host_modified(v);
}

inline std::int64_t thread_team_size(std::int64_t vector_length) {
  if (std::is_same<ExecSpace, HostExecSpace>::value) return 1;
  std::int64_t vl = vector_length < 1 ? 1 : vector_length;
  std::int64_t ts = 256 / vl;
  return ts < 1 ? 1 : ts;
}

template <typename T>
KOKKOS_INLINE_FUNCTION T ceildivsi(T a, T b) {
  T q = a / b;
  return (q * b != a && ((a < 0) == (b < 0))) ? q + 1 : q;
}

template <typename T>
KOKKOS_INLINE_FUNCTION T shli(T a, T b) {
  using U = std::make_unsigned_t<T>;
  return static_cast<T>(static_cast<U>(a) << static_cast<U>(b));
}

template <typename T>
KOKKOS_INLINE_FUNCTION T minui(T a, T b) {
  using U = std::make_unsigned_t<T>;
  return static_cast<U>(a) < static_cast<U>(b) ? a : b;
}

template <typename T>
KOKKOS_INLINE_FUNCTION T maxui(T a, T b) {
  using U = std::make_unsigned_t<T>;
  return static_cast<U>(a) < static_cast<U>(b) ? b : a;
}

// NaN-propagating min/max that order -0 below +0.
template <typename T>
KOKKOS_INLINE_FUNCTION T minimumf(T a, T b) {
  if (a != a) return a;
  if (b != b) return b;
  if (a == b) return Kokkos::signbit(static_cast<double>(a)) ? a : b;
  return a < b ? a : b;
}

template <typename T>
KOKKOS_INLINE_FUNCTION T maximumf(T a, T b) {
  if (a != a) return a;
  if (b != b) return b;
  if (a == b) return Kokkos::signbit(static_cast<double>(a)) ? b : a;
  return a < b ? b : a;
}

}  // namespace LAPIS

#ifndef LAPIS_HAS_KOKKOS_KERNELS

// Portable fallbacks for the kernel-library wrappers: C += A * B and
// y += A * x on the device side.
template <typename A, typename B, typename C>
inline void lapis_gemm(const A& a, const B& b, const C& c) {
  auto av = LAPIS::device_view(a);
  auto bv = LAPIS::device_view(b);
  auto cv = LAPIS::device_view(c);
  const std::int64_t m = cv.extent(0), n = cv.extent(1), k = av.extent(1);
  Kokkos::parallel_for(
      Kokkos::MDRangePolicy<LAPIS::ExecSpace, Kokkos::Rank<2>, Kokkos::IndexType<std::int64_t>>({0, 0}, {m, n}),
      KOKKOS_LAMBDA(const std::int64_t i, const std::int64_t j) {
        auto acc = cv(i, j);
        for (std::int64_t p = 0; p < k; ++p) acc += av(i, p) * bv(p, j);
        cv(i, j) = acc;
      });
}

template <typename A, typename X, typename Y>
inline void lapis_gemv(const A& a, const X& x, const Y& y) {
  auto av = LAPIS::device_view(a);
  auto xv = LAPIS::device_view(x);
  auto yv = LAPIS::device_view(y);
  const std::int64_t m = yv.extent(0), n = xv.extent(0);
  Kokkos::parallel_for(
      Kokkos::RangePolicy<LAPIS::ExecSpace>(0, m), KOKKOS_LAMBDA(const std::int64_t i) {
        auto acc = yv(i);
        for (std::int64_t j = 0; j < n; ++j) acc += av(i, j) * xv(j);
        yv(i) = acc;
      });
}

#endif
