#pragma once

#include <string>

#include "jisa/stft.hpp"

namespace jisa {

enum class WavFormat { Pcm16, Float32 };

/// Reads a RIFF/WAVE file holding 16-bit PCM or 32-bit IEEE float samples,
/// mono or interleaved multichannel. PCM samples are scaled to [-1, 1).
Waveform read_wav(const std::string& path);

/// Writes interleaved samples. PCM16 output is clipped to [-1, 1].
void write_wav(const std::string& path, const Waveform& signal, WavFormat format = WavFormat::Float32);

}  // namespace jisa
