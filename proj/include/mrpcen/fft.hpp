#pragma once

#include <complex>
#include <vector>

#include <unsupported/Eigen/FFT>

namespace mrpcen::fft {

using Spectrum = std::vector<std::complex<double>>;

/// Smallest power of two >= n (n >= 1).
inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

/// One-sided real FFT helper. Holds Eigen's cached twiddles, so keep one per
/// thread and reuse it across frames.
class RealFft {
 public:
  RealFft() { engine_.SetFlag(Eigen::FFT<double>::HalfSpectrum); }

  /// n/2 + 1 bins of the unscaled forward transform.
  void forward(const std::vector<double>& in, Spectrum& out) { engine_.fwd(out, in); }

  /// Inverse of `forward` for a length-n real signal (scaled by 1/n).
  void inverse(const Spectrum& in, std::vector<double>& out, std::size_t n) {
    engine_.inv(out, in, static_cast<Eigen::Index>(n));
  }

 private:
  Eigen::FFT<double> engine_;
};

}  // namespace mrpcen::fft
