#pragma once

#include <cstddef>
#include <vector>

#include "jisa/linalg.hpp"

namespace jisa {

class SignalTooShort : public Error {
 public:
  using Error::Error;
};

/// Complex STFT data laid out as [frequency f][frame n][channel m].
///
/// For a fixed f the N x M block is contiguous with channels fastest, so
/// frame(f) maps it as an M x N column-major matrix whose columns are x_fn.
class SpectralTensor {
 public:
  SpectralTensor() = default;
  SpectralTensor(std::size_t n_freq, std::size_t n_frames, std::size_t n_chan);

  std::size_t n_freq() const { return n_freq_; }
  std::size_t n_frames() const { return n_frames_; }
  std::size_t n_chan() const { return n_chan_; }

  Complex& operator()(std::size_t f, std::size_t n, std::size_t m) {
    return data_[(f * n_frames_ + n) * n_chan_ + m];
  }
  const Complex& operator()(std::size_t f, std::size_t n, std::size_t m) const {
    return data_[(f * n_frames_ + n) * n_chan_ + m];
  }

  using FrameMap = Eigen::Map<Eigen::MatrixXcd>;
  using ConstFrameMap = Eigen::Map<const Eigen::MatrixXcd>;

  /// M x N view of all frames at bin f.
  FrameMap bin(std::size_t f);
  ConstFrameMap bin(std::size_t f) const;

  std::vector<Complex>& data() { return data_; }
  const std::vector<Complex>& data() const { return data_; }

  /// Copy of one channel laid out [f][n].
  std::vector<Complex> channel(std::size_t m) const;

  bool same_shape(const SpectralTensor& other) const {
    return n_freq_ == other.n_freq_ && n_frames_ == other.n_frames_ && n_chan_ == other.n_chan_;
  }

 private:
  std::size_t n_freq_ = 0;
  std::size_t n_frames_ = 0;
  std::size_t n_chan_ = 0;
  std::vector<Complex> data_;
};

/// Multichannel real waveform, channel-major: sample(c, t) = data[c * n_samples + t].
struct Waveform {
  std::size_t n_chan = 0;
  std::size_t n_samples = 0;
  double sample_rate = 16000.0;
  std::vector<double> data;

  Waveform() = default;
  Waveform(std::size_t channels, std::size_t samples, double fs = 16000.0)
      : n_chan(channels), n_samples(samples), sample_rate(fs), data(channels * samples, 0.0) {}

  double& at(std::size_t c, std::size_t t) { return data[c * n_samples + t]; }
  double at(std::size_t c, std::size_t t) const { return data[c * n_samples + t]; }
  const double* channel(std::size_t c) const { return data.data() + c * n_samples; }
  double* channel(std::size_t c) { return data.data() + c * n_samples; }
};

enum class WindowKind { Hamming };

struct StftConfig {
  std::size_t nfft = 4096;
  std::size_t hop = 1024;
  WindowKind window = WindowKind::Hamming;
  double sample_rate = 16000.0;

  std::size_t n_freq() const { return nfft / 2 + 1; }
  /// Throws Error when nfft is not a power of two or hop does not divide nfft.
  void validate() const;
};

/// Periodic Hamming window of length n.
std::vector<double> hamming(std::size_t n);

/// Canonical dual of `analysis` for the given hop:
/// g[t] = w[t] / sum_k w[t + k hop]^2.
std::vector<double> dual_window(const std::vector<double>& analysis, std::size_t hop);

/// Number of frames produced for a signal of `n_samples` samples.
std::size_t n_frames_for(std::size_t n_samples, const StftConfig& cfg);

/// Forward STFT. The signal is zero-padded by nfft - hop samples in front and
/// up to a full frame at the end so every sample is covered by nfft/hop frames.
/// Bins are unnormalized (sum over the frame, no 1/nfft).
SpectralTensor analyze(const Waveform& signal, const StftConfig& cfg);

/// Weighted overlap-add with the dual window. When `n_samples` is zero the
/// full length implied by the frame count is returned.
Waveform synthesize(const SpectralTensor& X, const StftConfig& cfg, std::size_t n_samples = 0);

}  // namespace jisa
