#pragma once

// Thin FFTW wrapper: cached out-of-place 2D forward transforms,
//   X[k0, k1] = sum x[i0, i1] e^{-j 2 pi (i0 k0 / n0 + i1 k1 / n1)}
// on row-major (n0 x n1) buffers.

#include <complex>
#include <map>
#include <mutex>
#include <utility>
#include <vector>

#include <fftw3.h>

#include "relaysim/error.hpp"

namespace relaysim {

class Dft2d {
 public:
  Dft2d(int n0, int n1) : n0_(n0), n1_(n1) {
    expects(n0 >= 1 && n1 >= 1, "Dft2d: sizes must be >= 1");
    plan_ = cached_plan(n0, n1);
  }

  int n0() const { return n0_; }
  int n1() const { return n1_; }
  std::size_t size() const { return static_cast<std::size_t>(n0_) * n1_; }

  void forward(const std::complex<double>* in, std::complex<double>* out) const {
    // FFTW's new-array execute never writes to the input of an out-of-place plan.
    auto* i = reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(in));
    fftw_execute_dft(plan_, i, reinterpret_cast<fftw_complex*>(out));
  }

  std::vector<std::complex<double>> forward(const std::vector<std::complex<double>>& in) const {
    expects(in.size() == size(), "Dft2d::forward: buffer size mismatch");
    std::vector<std::complex<double>> out(size());
    forward(in.data(), out.data());
    return out;
  }

 private:
  static fftw_plan cached_plan(int n0, int n1) {
    static std::mutex mutex;
    static std::map<std::pair<int, int>, fftw_plan> plans;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = plans.find({n0, n1});
    if (it != plans.end()) return it->second;
    std::vector<std::complex<double>> a(static_cast<std::size_t>(n0) * n1), b(a.size());
    fftw_plan p = fftw_plan_dft_2d(n0, n1, reinterpret_cast<fftw_complex*>(a.data()),
                                   reinterpret_cast<fftw_complex*>(b.data()), FFTW_FORWARD,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (p == nullptr) throw InvariantViolation("FFTW plan creation failed");
    plans.emplace(std::make_pair(n0, n1), p);
    return p;
  }

  int n0_;
  int n1_;
  fftw_plan plan_;
};

}  // namespace relaysim
