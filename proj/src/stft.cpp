#include "jisa/stft.hpp"

#include <fftw3.h>

#include <cmath>
#include <numbers>
#include <string>

namespace jisa {

SpectralTensor::SpectralTensor(std::size_t n_freq, std::size_t n_frames, std::size_t n_chan)
    : n_freq_(n_freq), n_frames_(n_frames), n_chan_(n_chan), data_(n_freq * n_frames * n_chan) {}

SpectralTensor::FrameMap SpectralTensor::bin(std::size_t f) {
  return FrameMap(data_.data() + f * n_frames_ * n_chan_, static_cast<Eigen::Index>(n_chan_),
                  static_cast<Eigen::Index>(n_frames_));
}

SpectralTensor::ConstFrameMap SpectralTensor::bin(std::size_t f) const {
  return ConstFrameMap(data_.data() + f * n_frames_ * n_chan_, static_cast<Eigen::Index>(n_chan_),
                       static_cast<Eigen::Index>(n_frames_));
}

std::vector<Complex> SpectralTensor::channel(std::size_t m) const {
  std::vector<Complex> out(n_freq_ * n_frames_);
  for (std::size_t f = 0; f < n_freq_; ++f) {
    for (std::size_t n = 0; n < n_frames_; ++n) out[f * n_frames_ + n] = (*this)(f, n, m);
  }
  return out;
}

void StftConfig::validate() const {
  if (nfft < 2 || (nfft & (nfft - 1)) != 0) {
    throw Error("stft: nfft must be a power of two, got " + std::to_string(nfft));
  }
  if (hop == 0 || hop > nfft || nfft % hop != 0) {
    throw Error("stft: hop must divide nfft, got hop=" + std::to_string(hop));
  }
}

std::vector<double> hamming(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

std::vector<double> dual_window(const std::vector<double>& analysis, std::size_t hop) {
  const std::size_t n = analysis.size();
  std::vector<double> norm(hop, 0.0);
  for (std::size_t t = 0; t < n; ++t) norm[t % hop] += analysis[t] * analysis[t];
  std::vector<double> g(n);
  for (std::size_t t = 0; t < n; ++t) g[t] = analysis[t] / norm[t % hop];
  return g;
}

std::size_t n_frames_for(std::size_t n_samples, const StftConfig& cfg) {
  const std::size_t padded = n_samples + (cfg.nfft - cfg.hop);
  return (padded + cfg.hop - 1) / cfg.hop;
}

namespace {

struct RealFft {
  std::size_t n;
  double* in;
  fftw_complex* out;
  fftw_plan forward;
  fftw_plan backward;

  explicit RealFft(std::size_t len) : n(len) {
    in = fftw_alloc_real(n);
    out = fftw_alloc_complex(n / 2 + 1);
    forward = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
    backward = fftw_plan_dft_c2r_1d(static_cast<int>(n), out, in, FFTW_ESTIMATE);
  }
  ~RealFft() {
    fftw_destroy_plan(forward);
    fftw_destroy_plan(backward);
    fftw_free(in);
    fftw_free(out);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
};

}  // namespace

SpectralTensor analyze(const Waveform& signal, const StftConfig& cfg) {
  cfg.validate();
  if (signal.n_samples < cfg.nfft) {
    throw SignalTooShort("stft: signal has " + std::to_string(signal.n_samples) +
                         " samples, need at least " + std::to_string(cfg.nfft));
  }
  const std::size_t n_frames = n_frames_for(signal.n_samples, cfg);
  const std::size_t n_freq = cfg.n_freq();
  const std::size_t lead = cfg.nfft - cfg.hop;
  const auto window = hamming(cfg.nfft);

  SpectralTensor X(n_freq, n_frames, signal.n_chan);
  RealFft fft(cfg.nfft);
  for (std::size_t c = 0; c < signal.n_chan; ++c) {
    const double* x = signal.channel(c);
    for (std::size_t n = 0; n < n_frames; ++n) {
      for (std::size_t t = 0; t < cfg.nfft; ++t) {
        // position in the padded signal is n*hop + t, original index is that minus lead
        const std::size_t pos = n * cfg.hop + t;
        double v = 0.0;
        if (pos >= lead && pos - lead < signal.n_samples) v = x[pos - lead];
        fft.in[t] = v * window[t];
      }
      fftw_execute(fft.forward);
      for (std::size_t f = 0; f < n_freq; ++f) X(f, n, c) = Complex(fft.out[f][0], fft.out[f][1]);
    }
  }
  return X;
}

Waveform synthesize(const SpectralTensor& X, const StftConfig& cfg, std::size_t n_samples) {
  cfg.validate();
  if (X.n_freq() != cfg.n_freq()) {
    throw ShapeMismatch("istft: tensor has " + std::to_string(X.n_freq()) + " bins, config expects " +
                        std::to_string(cfg.n_freq()));
  }
  const std::size_t lead = cfg.nfft - cfg.hop;
  const std::size_t total = X.n_frames() * cfg.hop + lead;
  const std::size_t full = total - lead;
  if (n_samples == 0) n_samples = full;
  if (n_samples > full) throw ShapeMismatch("istft: requested length exceeds frame coverage");

  const auto synth = dual_window(hamming(cfg.nfft), cfg.hop);
  Waveform out(X.n_chan(), n_samples, cfg.sample_rate);
  std::vector<double> acc(total);
  RealFft fft(cfg.nfft);
  const double inv_n = 1.0 / static_cast<double>(cfg.nfft);
  for (std::size_t c = 0; c < X.n_chan(); ++c) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t n = 0; n < X.n_frames(); ++n) {
      for (std::size_t f = 0; f < cfg.n_freq(); ++f) {
        fft.out[f][0] = X(f, n, c).real();
        fft.out[f][1] = X(f, n, c).imag();
      }
      fftw_execute(fft.backward);
      for (std::size_t t = 0; t < cfg.nfft; ++t) acc[n * cfg.hop + t] += fft.in[t] * inv_n * synth[t];
    }
    double* y = out.channel(c);
    for (std::size_t t = 0; t < n_samples; ++t) y[t] = acc[t + lead];
  }
  return out;
}

}  // namespace jisa
