#pragma once

#include <complex>
#include <cstddef>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <new>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <fftw3.h>

#include "fiberprobe/units.hpp"

namespace fiberprobe {

using cdouble = std::complex<double>;

/// Allocator returning FFTW-aligned storage so that the SIMD plans apply directly.
template <class T>
struct FftwAllocator {
  using value_type = T;
  FftwAllocator() = default;
  template <class U>
  FftwAllocator(const FftwAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) {
    if (n == 0) return nullptr;
    void* p = fftw_malloc(n * sizeof(T));
    if (!p) throw std::bad_alloc();
    return static_cast<T*>(p);
  }
  void deallocate(T* p, std::size_t) noexcept { fftw_free(p); }
  template <class U>
  bool operator==(const FftwAllocator<U>&) const noexcept { return true; }
};

/// Complex sample buffer with FFT-friendly alignment.
using CVector = std::vector<cdouble, FftwAllocator<cdouble>>;

namespace detail {

struct FftwPlanPair {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
  FftwPlanPair() = default;
  FftwPlanPair(const FftwPlanPair&) = delete;
  FftwPlanPair& operator=(const FftwPlanPair&) = delete;
  ~FftwPlanPair() {
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
  }
};

// FFTW planning is not thread-safe; execution through the new-array interface is.
// FFTW_ESTIMATE keeps the plan (and therefore the rounding) identical across runs.
inline const FftwPlanPair& plan_for(std::size_t n) {
  static std::mutex mutex;
  static std::map<std::size_t, std::unique_ptr<FftwPlanPair>> plans;
  std::lock_guard lock(mutex);
  auto& slot = plans[n];
  if (!slot) {
    auto pair = std::make_unique<FftwPlanPair>();
    CVector scratch(n);
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    const int len = static_cast<int>(n);
    pair->forward = fftw_plan_dft_1d(len, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
    pair->backward = fftw_plan_dft_1d(len, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
    if (!pair->forward || !pair->backward) throw std::runtime_error("FFTW planning failed for n=" + std::to_string(n));
    slot = std::move(pair);
  }
  return *slot;
}

}  // namespace detail

/// In-place DFT of a fixed power-of-two length.
/// forward: X_m = sum_n x_n exp(-2 pi i m n / N); inverse includes the 1/N factor,
/// inverse_unscaled does not.
class Fft {
 public:
  explicit Fft(std::size_t n) : n_(n) {
    if (!is_power_of_two(n)) throw std::invalid_argument("FFT length must be a power of two, got " + std::to_string(n));
    plans_ = &detail::plan_for(n);
  }

  std::size_t size() const { return n_; }

  void forward(std::span<cdouble> data) const { run(plans_->forward, data); }

  void inverse_unscaled(std::span<cdouble> data) const { run(plans_->backward, data); }

  void inverse(std::span<cdouble> data) const {
    run(plans_->backward, data);
    const double scale = 1.0 / static_cast<double>(n_);
    for (auto& v : data) v *= scale;
  }

 private:
  void run(fftw_plan plan, std::span<cdouble> data) const {
    if (data.size() != n_)
      throw std::invalid_argument("FFT length mismatch: plan " + std::to_string(n_) + ", data " + std::to_string(data.size()));
    auto* p = reinterpret_cast<fftw_complex*>(data.data());
    if (fftw_alignment_of(reinterpret_cast<double*>(p)) == 0) {
      fftw_execute_dft(plan, p, p);
      return;
    }
    // Same plan on an aligned copy, so results do not depend on caller alignment.
    thread_local CVector scratch;
    scratch.resize(n_);
    std::memcpy(scratch.data(), data.data(), n_ * sizeof(cdouble));
    auto* s = reinterpret_cast<fftw_complex*>(scratch.data());
    fftw_execute_dft(plan, s, s);
    std::memcpy(data.data(), scratch.data(), n_ * sizeof(cdouble));
  }

  std::size_t n_;
  const detail::FftwPlanPair* plans_ = nullptr;
};

}  // namespace fiberprobe
