#include "mrpcen/augment.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>

#include "mrpcen/error.hpp"
#include "mrpcen/fft.hpp"
#include "mrpcen/spectrogram.hpp"

namespace mrpcen {

void ImpulseResponse::validate() const {
  require(samples.size() > 0, "ImpulseResponse '" + label + "': empty");
  require(samples.allFinite(), "ImpulseResponse '" + label + "': non-finite samples");
  require(sample_rate > 0, "ImpulseResponse '" + label + "': sample_rate must be positive");
}

Eigen::VectorXd fft_convolve(const Eigen::VectorXd& x, const Eigen::VectorXd& h) {
  require(x.size() > 0 && h.size() > 0, "fft_convolve: empty input");
  const auto out_len = static_cast<std::size_t>(x.size() + h.size() - 1);
  const std::size_t n = fft::next_pow2(out_len);

  std::vector<double> a(n, 0.0);
  std::vector<double> b(n, 0.0);
  std::copy(x.data(), x.data() + x.size(), a.begin());
  std::copy(h.data(), h.data() + h.size(), b.begin());

  fft::RealFft engine;
  fft::Spectrum fa;
  fft::Spectrum fb;
  engine.forward(a, fa);
  engine.forward(b, fb);
  for (std::size_t k = 0; k < fa.size(); ++k) fa[k] *= fb[k];
  std::vector<double> y;
  engine.inverse(fa, y, n);
  return Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(out_len));
}

Eigen::VectorXd direct_convolve(const Eigen::VectorXd& x, const Eigen::VectorXd& h) {
  require(x.size() > 0 && h.size() > 0, "direct_convolve: empty input");
  Eigen::VectorXd y = Eigen::VectorXd::Zero(x.size() + h.size() - 1);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    for (Eigen::Index j = 0; j < h.size(); ++j) y[i + j] += x[i] * h[j];
  }
  return y;
}

AudioClip convolve_reverb(const AudioClip& clip, const ImpulseResponse& ir) {
  clip.validate();
  ir.validate();
  require(clip.sample_rate == ir.sample_rate,
          "convolve_reverb: clip is " + std::to_string(clip.sample_rate) + " Hz but IR '" +
              ir.label + "' is " + std::to_string(ir.sample_rate) + " Hz");
  require(clip.size() > 0, "convolve_reverb: empty clip");

  Eigen::VectorXd wet = fft_convolve(clip.samples, ir.samples).head(clip.size());
  const double in_peak = clip.samples.cwiseAbs().maxCoeff();
  const double out_peak = wet.cwiseAbs().maxCoeff();
  if (in_peak > 0.0 && out_peak > 0.0) wet = (wet / out_peak) * in_peak;
  return AudioClip(std::move(wet), clip.sample_rate);
}

Eigen::VectorXd white_noise(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) w[i] = normal(rng);
  return w;
}

ImpulseResponse synth_impulse_response(double tau_c, double duration, int sample_rate,
                                       std::uint64_t seed) {
  require(tau_c > 0.0 && std::isfinite(tau_c), "synth_impulse_response: tau_c must be positive");
  require(sample_rate > 0, "synth_impulse_response: sample_rate must be positive");
  if (duration == 0.0) duration = 5.0 * tau_c;
  require(duration > 0.0 && std::isfinite(duration),
          "synth_impulse_response: duration must be positive");

  const auto n = std::max<Eigen::Index>(1, std::llround(duration * sample_rate));
  Eigen::VectorXd h = white_noise(n, seed);
  for (Eigen::Index i = 0; i < n; ++i) {
    h[i] *= std::exp(-(static_cast<double>(i) / sample_rate) / tau_c);
  }
  char tag[32];
  std::snprintf(tag, sizeof tag, "synth-tau%g", tau_c);
  return ImpulseResponse{std::move(h), sample_rate, tag};
}

AudioClip brown_noise(double duration, int sample_rate, std::uint64_t seed) {
  require(duration > 0.0 && std::isfinite(duration), "brown_noise: duration must be positive");
  require(sample_rate > 0, "brown_noise: sample_rate must be positive");
  const auto n = std::max<Eigen::Index>(1, std::llround(duration * sample_rate));
  Eigen::VectorXd x = white_noise(n, seed);
  for (Eigen::Index i = 1; i < n; ++i) x[i] += x[i - 1];
  x.array() -= x.mean();
  const double peak = x.cwiseAbs().maxCoeff();
  // (x / peak) * 0.9 lands exactly on 0.9 at the peak sample.
  if (peak > 0.0) x = (x / peak) * 0.9;
  return AudioClip(std::move(x), sample_rate);
}

namespace {

double wrap_phase(double p) {
  return p - 2.0 * std::numbers::pi * std::round(p / (2.0 * std::numbers::pi));
}

}  // namespace

Eigen::VectorXd time_stretch(const Eigen::VectorXd& x, double stretch, const PhaseVocoderSpec& pv) {
  require(stretch > 0.0 && std::isfinite(stretch), "time_stretch: stretch must be positive");
  require(x.size() > 0, "time_stretch: empty signal");
  const int n_fft = pv.window_length;
  const int hop = pv.hop_length;
  require(n_fft > 0 && (n_fft & (n_fft - 1)) == 0, "time_stretch: window must be a power of two");
  require(hop > 0 && hop <= n_fft / 2, "time_stretch: need 0 < hop <= window / 2");

  const Eigen::Index n = x.size();
  const int n_bins = n_fft / 2 + 1;
  const Eigen::Index n_cols = 1 + n / hop;
  const Eigen::VectorXd window = hann_window(n_fft);
  const Eigen::Index pad = n_fft / 2;

  // Centered, reflect-padded STFT (complex).
  std::vector<fft::Spectrum> cols(static_cast<std::size_t>(n_cols));
  fft::RealFft engine;
  std::vector<double> frame(static_cast<std::size_t>(n_fft));
  for (Eigen::Index t = 0; t < n_cols; ++t) {
    for (int i = 0; i < n_fft; ++i) {
      Eigen::Index j = t * hop - pad + i;
      if (n == 1) {
        j = 0;
      } else {
        const Eigen::Index period = 2 * (n - 1);
        j %= period;
        if (j < 0) j += period;
        if (j >= n) j = period - j;
      }
      frame[static_cast<std::size_t>(i)] = x[j] * window[i];
    }
    engine.forward(frame, cols[static_cast<std::size_t>(t)]);
  }
  cols.emplace_back(static_cast<std::size_t>(n_bins), std::complex<double>(0.0, 0.0));

  const double speed = 1.0 / stretch;
  const auto out_len = static_cast<Eigen::Index>(std::llround(static_cast<double>(n) * stretch));
  std::vector<double> advance(static_cast<std::size_t>(n_bins));
  for (int k = 0; k < n_bins; ++k) advance[static_cast<std::size_t>(k)] = 2.0 * std::numbers::pi * k * hop / n_fft;

  std::vector<double> phase(static_cast<std::size_t>(n_bins));
  for (int k = 0; k < n_bins; ++k) phase[static_cast<std::size_t>(k)] = std::arg(cols[0][static_cast<std::size_t>(k)]);

  // Overlap-add buffer in padded coordinates.
  const Eigen::Index n_steps = static_cast<Eigen::Index>(std::ceil(static_cast<double>(n_cols) / speed));
  const Eigen::Index total = (n_steps - 1) * hop + n_fft;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(total);
  Eigen::VectorXd norm = Eigen::VectorXd::Zero(total);
  fft::Spectrum out_col(static_cast<std::size_t>(n_bins));
  std::vector<double> synth;
  for (Eigen::Index step = 0; step < n_steps; ++step) {
    const double pos = static_cast<double>(step) * speed;
    const auto base = static_cast<std::size_t>(pos);
    if (base + 1 >= cols.size()) break;
    const double frac = pos - static_cast<double>(base);
    const auto& c0 = cols[base];
    const auto& c1 = cols[base + 1];
    for (std::size_t k = 0; k < static_cast<std::size_t>(n_bins); ++k) {
      const double mag = (1.0 - frac) * std::abs(c0[k]) + frac * std::abs(c1[k]);
      out_col[k] = std::polar(mag, phase[k]);
      const double dphase = wrap_phase(std::arg(c1[k]) - std::arg(c0[k]) - advance[k]);
      phase[k] += advance[k] + dphase;
    }
    engine.inverse(out_col, synth, static_cast<std::size_t>(n_fft));
    const Eigen::Index offset = step * hop;
    for (int i = 0; i < n_fft; ++i) {
      acc[offset + i] += synth[static_cast<std::size_t>(i)] * window[i];
      norm[offset + i] += window[i] * window[i];
    }
  }

  Eigen::VectorXd y = Eigen::VectorXd::Zero(out_len);
  for (Eigen::Index i = 0; i < out_len; ++i) {
    const Eigen::Index j = i + pad;
    if (j < total && norm[j] > 1e-10) y[i] = acc[j] / norm[j];
  }
  return y;
}

Eigen::VectorXd resample(const Eigen::VectorXd& x, double ratio) {
  require(ratio > 0.0 && std::isfinite(ratio), "resample: ratio must be positive");
  constexpr int kZeroCrossings = 32;
  constexpr int kTableDensity = 512;
  constexpr double kBeta = 9.0;
  const double cutoff = std::min(1.0, ratio) * 0.97;
  const double half_width = kZeroCrossings / cutoff;

  // Kaiser-windowed sinc, tabulated in zero-crossing units.
  const int table_len = kZeroCrossings * kTableDensity + 2;
  std::vector<double> table(static_cast<std::size_t>(table_len), 0.0);
  const double i0_beta = std::cyl_bessel_i(0.0, kBeta);
  for (int i = 0; i < table_len; ++i) {
    const double u = static_cast<double>(i) / kTableDensity;
    if (u > kZeroCrossings) break;
    const double w = u / kZeroCrossings;
    const double taper = std::cyl_bessel_i(0.0, kBeta * std::sqrt(std::max(0.0, 1.0 - w * w))) / i0_beta;
    const double sinc = u == 0.0 ? 1.0 : std::sin(std::numbers::pi * u) / (std::numbers::pi * u);
    table[static_cast<std::size_t>(i)] = sinc * taper;
  }

  const auto out_len = static_cast<Eigen::Index>(std::llround(static_cast<double>(x.size()) * ratio));
  Eigen::VectorXd y = Eigen::VectorXd::Zero(out_len);
  for (Eigen::Index j = 0; j < out_len; ++j) {
    const double t = static_cast<double>(j) / ratio;
    const auto lo = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(std::ceil(t - half_width)));
    const auto hi = std::min<Eigen::Index>(x.size() - 1, static_cast<Eigen::Index>(std::floor(t + half_width)));
    double sum = 0.0;
    for (Eigen::Index i = lo; i <= hi; ++i) {
      const double pos = std::abs(static_cast<double>(i) - t) * cutoff * kTableDensity;
      const auto k = static_cast<std::size_t>(pos);
      if (k + 1 >= table.size()) continue;
      const double frac = pos - static_cast<double>(k);
      sum += x[i] * ((1.0 - frac) * table[k] + frac * table[k + 1]);
    }
    y[j] = cutoff * sum;
  }
  return y;
}

AudioClip pitch_shift(const AudioClip& clip, double semitones, const PhaseVocoderSpec& pv) {
  clip.validate();
  require(std::isfinite(semitones) && std::abs(semitones) <= 12.0,
          "pitch_shift: |semitones| must be <= 12");
  require(clip.size() > 0, "pitch_shift: empty clip");
  if (semitones == 0.0) return clip;

  const double factor = std::exp2(semitones / 12.0);
  const Eigen::VectorXd stretched = time_stretch(clip.samples, factor, pv);
  Eigen::VectorXd shifted = resample(stretched, 1.0 / factor);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(clip.size());
  const Eigen::Index keep = std::min(out.size(), shifted.size());
  out.head(keep) = shifted.head(keep);
  return AudioClip(std::move(out), clip.sample_rate);
}

}  // namespace mrpcen
