#pragma once

// Per-channel energy normalization: a first-order autoregressive smoother
// M(t) = s E(t) + (1 - s) M(t - 1) run along time in every mel band, then
//
//   PCEN(t, f) = (E / (eps + M)^alpha + delta)^r - delta^r.
//
// The smoother weight s follows from the rate parameter T (in frames) through
// the half-power cutoff of the filter: cos(2 pi / T) = 1 - s^2 / (2 (1 - s)).
// Stacking PCEN at several rates gives the multi-rate representation.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mrpcen/error.hpp"
#include "mrpcen/spectrogram.hpp"

namespace mrpcen {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Cutoff frequency (rad/sample) 2 pi / T, clamped to pi for T < 2.
template <typename Scalar>
Scalar cutoff_frequency(Scalar rate) {
  return std::min(Scalar(2) * std::numbers::pi_v<Scalar> / rate, std::numbers::pi_v<Scalar>);
}

/// Weight s in (0, 1) of the AR(1) smoother whose -3 dB point sits at
/// 2 pi / T. Positive root of s^2 + 2 (1 - c) s - 2 (1 - c) = 0, c = cos(w_c).
template <typename Scalar>
Scalar smoothing_coefficient(Scalar rate) {
  require(std::isfinite(rate) && rate >= Scalar(1),
          "smoothing_coefficient: rate T must be >= 1 frame, got " + std::to_string(rate));
  // 1 - cos(w) as 2 sin^2(w / 2) keeps precision for very large T.
  const Scalar half_sin = std::sin(cutoff_frequency(rate) / Scalar(2));
  const Scalar a = Scalar(2) * half_sin * half_sin;
  // -a + sqrt(a^2 + 2a), rewritten to avoid cancellation when a is tiny.
  const Scalar s = Scalar(2) * a / (a + std::sqrt(a * a + Scalar(2) * a));
  require(s > Scalar(0) && s < Scalar(1),
          "smoothing_coefficient: rate T = " + std::to_string(rate) + " underflows s to 0");
  return s;
}

/// Magnitude response |s / (1 - (1 - s) e^{-jw})| of the smoother.
template <typename Scalar>
Scalar smoother_response(Scalar s, Scalar omega) {
  const Scalar q = Scalar(1) - s;
  const Scalar denom = Scalar(1) - Scalar(2) * q * std::cos(omega) + q * q;
  return s / std::sqrt(denom);
}

/// Closed-form half-power frequency arccos(1 - s^2 / (2 (1 - s))).
template <typename Scalar>
Scalar half_power_frequency(Scalar s) {
  const Scalar c = Scalar(1) - s * s / (Scalar(2) * (Scalar(1) - s));
  return std::acos(std::clamp(c, Scalar(-1), Scalar(1)));
}

/// PCEN parameters. The smoother weight is derived from the rate and is
/// never set directly.
template <typename Scalar>
class BasicPcenParams {
 public:
  Scalar epsilon = Scalar(1e-6);
  Scalar alpha = Scalar(0.98);
  Scalar delta = Scalar(2);
  Scalar r = Scalar(0.5);

  BasicPcenParams() { set_rate(Scalar(1)); }
  explicit BasicPcenParams(Scalar rate) { set_rate(rate); }

  /// eps = 0, alpha = 1: the gain stage then cancels any positive scale
  /// factor exactly. Only meaningful on strictly positive inputs.
  static BasicPcenParams zero_offset_limit(Scalar rate) {
    BasicPcenParams p(rate);
    p.epsilon = Scalar(0);
    p.alpha = Scalar(1);
    p.zero_offset_ = true;
    return p;
  }

  void set_rate(Scalar rate) {
    s_ = smoothing_coefficient(rate);
    rate_ = rate;
  }

  [[nodiscard]] BasicPcenParams with_rate(Scalar rate) const {
    BasicPcenParams p = *this;
    p.set_rate(rate);
    return p;
  }

  [[nodiscard]] Scalar rate() const { return rate_; }
  [[nodiscard]] Scalar smoothing() const { return s_; }
  /// True when 2 pi / T exceeded pi and the cutoff was clamped.
  [[nodiscard]] bool cutoff_clamped() const {
    return Scalar(2) * std::numbers::pi_v<Scalar> / rate_ > std::numbers::pi_v<Scalar>;
  }

  void validate() const {
    require(std::isfinite(epsilon) && (epsilon > Scalar(0) || (zero_offset_ && epsilon == 0)),
            "PcenParams: epsilon must be > 0");
    require(alpha >= Scalar(0) && alpha <= Scalar(1), "PcenParams: alpha must lie in [0, 1]");
    require(std::isfinite(delta) && delta > Scalar(0), "PcenParams: delta must be > 0");
    require(r > Scalar(0) && r <= Scalar(1), "PcenParams: r must lie in (0, 1]");
  }

 private:
  Scalar rate_ = Scalar(1);
  Scalar s_ = Scalar(0);
  bool zero_offset_ = false;
};

using PcenParams = BasicPcenParams<double>;

/// Strictly increasing list of rates T (frames).
template <typename Scalar>
class BasicRateSchedule {
 public:
  BasicRateSchedule() = default;
  explicit BasicRateSchedule(std::vector<Scalar> rates) : rates_(std::move(rates)) {
    require(!rates_.empty(), "RateSchedule: needs at least one rate");
    for (std::size_t i = 0; i < rates_.size(); ++i) {
      require(std::isfinite(rates_[i]) && rates_[i] >= Scalar(1), "RateSchedule: rates must be >= 1");
      require(i == 0 || rates_[i] > rates_[i - 1], "RateSchedule: rates must be strictly increasing");
    }
  }

  /// T_k = 2^k for k = first .. first + count - 1.
  static BasicRateSchedule powers_of_two(int first, int count) {
    std::vector<Scalar> rates;
    for (int k = first; k < first + count; ++k) rates.push_back(std::ldexp(Scalar(1), k));
    return BasicRateSchedule(std::move(rates));
  }

  /// Ten octave-spaced rates 1, 2, ..., 512.
  static BasicRateSchedule standard() { return powers_of_two(0, 10); }

  [[nodiscard]] const std::vector<Scalar>& rates() const { return rates_; }
  [[nodiscard]] std::size_t size() const { return rates_.size(); }
  [[nodiscard]] Scalar operator[](std::size_t i) const { return rates_[i]; }

 private:
  std::vector<Scalar> rates_;
};

using RateSchedule = BasicRateSchedule<double>;

/// Every contiguous window rates[i .. i + n - 1] of `base`, n = 1 .. size.
template <typename Scalar>
std::vector<BasicRateSchedule<Scalar>> contiguous_windows(const BasicRateSchedule<Scalar>& base) {
  std::vector<BasicRateSchedule<Scalar>> out;
  const auto& r = base.rates();
  for (std::size_t n = 1; n <= r.size(); ++n) {
    for (std::size_t i = 0; i + n <= r.size(); ++i) {
      out.emplace_back(std::vector<Scalar>(r.begin() + i, r.begin() + i + n));
    }
  }
  return out;
}

/// Runs the AR(1) smoother along each row (time axis). M(:, 0) = E(:, 0).
template <typename Derived>
Matrix<typename Derived::Scalar> ar1_smooth(const Eigen::MatrixBase<Derived>& energy,
                                            typename Derived::Scalar s) {
  using Scalar = typename Derived::Scalar;
  require(s > Scalar(0) && s < Scalar(1), "ar1_smooth: s must lie in (0, 1)");
  Matrix<Scalar> smooth(energy.rows(), energy.cols());
  if (energy.cols() == 0) return smooth;
  smooth.col(0) = energy.col(0);
  const Scalar keep = Scalar(1) - s;
  for (Eigen::Index t = 1; t < energy.cols(); ++t) {
    smooth.col(t) = s * energy.col(t) + keep * smooth.col(t - 1);
  }
  return smooth;
}

/// Elementwise PCEN given the smoothed energy m. Batch and streaming paths
/// both go through here, which is what makes them bitwise identical.
template <typename Scalar>
inline Scalar pcen_value(Scalar e, Scalar m, const BasicPcenParams<Scalar>& p) {
  const Scalar gain = std::pow(p.epsilon + m, p.alpha);
  return std::pow(e / gain + p.delta, p.r) - std::pow(p.delta, p.r);
}

template <typename Derived>
Matrix<typename Derived::Scalar> pcen_transform(
    const Eigen::MatrixBase<Derived>& energy,
    const BasicPcenParams<typename Derived::Scalar>& params) {
  using Scalar = typename Derived::Scalar;
  params.validate();
  require(energy.allFinite() && (energy.array() >= Scalar(0)).all(),
          "pcen_transform: energy must be finite and nonnegative");
  const Matrix<Scalar> smooth = ar1_smooth(energy, params.smoothing());
  return energy.binaryExpr(smooth, [&params](Scalar e, Scalar m) { return pcen_value(e, m, params); });
}

inline Eigen::MatrixXd pcen_transform(const MelSpectrogram& mel, const PcenParams& params) {
  return pcen_transform(mel.values, params);
}

/// Per-band smoother memory for one stream. Single owner.
template <typename Scalar>
struct BasicSmootherState {
  Vector<Scalar> m;
  bool initialized = false;

  BasicSmootherState() = default;
  explicit BasicSmootherState(Eigen::Index n_mels) : m(Vector<Scalar>::Zero(n_mels)) {}
};

using SmootherState = BasicSmootherState<double>;

/// Consumes one spectrogram column. The first call seeds M with the frame.
template <typename Derived>
Vector<typename Derived::Scalar> pcen_stream_step(
    const Eigen::MatrixBase<Derived>& frame, BasicSmootherState<typename Derived::Scalar>& state,
    const BasicPcenParams<typename Derived::Scalar>& params) {
  using Scalar = typename Derived::Scalar;
  require(frame.cols() == 1, "pcen_stream_step: frame must be a column vector");
  require(frame.rows() == state.m.rows(),
          "pcen_stream_step: frame has " + std::to_string(frame.rows()) +
              " bands, state has " + std::to_string(state.m.rows()));
  require(frame.allFinite() && (frame.array() >= Scalar(0)).all(),
          "pcen_stream_step: frame must be finite and nonnegative");
  const Scalar s = params.smoothing();
  if (state.initialized) {
    state.m = s * frame + (Scalar(1) - s) * state.m;
  } else {
    state.m = frame;
    state.initialized = true;
  }
  return frame.binaryExpr(state.m, [&params](Scalar e, Scalar m) { return pcen_value(e, m, params); });
}

/// [n_mels x n_frames x n_rates], stored as one matrix per rate.
template <typename Scalar>
struct BasicMultiRateStack {
  std::vector<Matrix<Scalar>> layers;
  BasicRateSchedule<Scalar> schedule;
  BasicPcenParams<Scalar> params;
  FrameSpec spec;

  [[nodiscard]] Eigen::Index n_mels() const { return layers.empty() ? 0 : layers.front().rows(); }
  [[nodiscard]] Eigen::Index n_frames() const { return layers.empty() ? 0 : layers.front().cols(); }
  [[nodiscard]] std::size_t n_rates() const { return layers.size(); }
  [[nodiscard]] Scalar operator()(Eigen::Index band, Eigen::Index frame, std::size_t rate) const {
    return layers[rate](band, frame);
  }
  /// Average over the rate axis.
  [[nodiscard]] Matrix<Scalar> mean_over_rates() const {
    Matrix<Scalar> acc = Matrix<Scalar>::Zero(n_mels(), n_frames());
    for (const auto& layer : layers) acc += layer;
    return acc / static_cast<Scalar>(layers.size());
  }
};

using MultiRateStack = BasicMultiRateStack<double>;

/// Layer i is pcen_transform at schedule[i]; eps, alpha, delta, r shared.
inline MultiRateStack multi_rate_pcen(const MelSpectrogram& mel, const RateSchedule& schedule,
                                      const PcenParams& params) {
  require(schedule.size() > 0, "multi_rate_pcen: empty schedule");
  MultiRateStack stack{{}, schedule, params, mel.spec};
  stack.layers.reserve(schedule.size());
  for (double rate : schedule.rates()) {
    stack.layers.push_back(pcen_transform(mel.values, params.with_rate(rate)));
  }
  return stack;
}

struct Gaussianization {
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
};

/// Sample skewness m3 / m2^1.5 and excess kurtosis m4 / m2^2 - 3 of all
/// entries. Throws on constant input.
template <typename Derived>
Gaussianization gaussianization_score(const Eigen::MatrixBase<Derived>& values) {
  require(values.size() >= 2, "gaussianization_score: need at least two values");
  const auto flat = values.template cast<double>().array();
  const double mean = flat.mean();
  const auto centered = flat - mean;
  const double m2 = centered.square().mean();
  require(m2 > 0.0, "gaussianization_score: degenerate (constant) input");
  const double m3 = centered.cube().mean();
  const double m4 = centered.square().square().mean();
  return {m3 / std::pow(m2, 1.5), m4 / (m2 * m2) - 3.0};
}

}  // namespace mrpcen
