#include "jisa/wav.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace jisa {

namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::vector<unsigned char>& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::vector<unsigned char>& buf, std::uint16_t v) {
  buf.push_back(static_cast<unsigned char>(v & 0xff));
  buf.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
}

}  // namespace

Waveform read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("wav: cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw Error("wav: not a RIFF/WAVE file: " + path);
  }

  std::uint16_t fmt_tag = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::size_t len = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + len > bytes.size()) throw Error("wav: truncated chunk in " + path);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (len < 16) throw Error("wav: short fmt chunk in " + path);
      fmt_tag = read_u16(chunk + 8);
      channels = read_u16(chunk + 10);
      rate = read_u32(chunk + 12);
      bits = read_u16(chunk + 22);
      if (fmt_tag == 0xFFFE && len >= 26) fmt_tag = read_u16(chunk + 32);  // extensible
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_len = len;
    }
    pos = body + len + (len & 1u);
  }
  if (data == nullptr || channels == 0) throw Error("wav: missing fmt or data chunk in " + path);

  const bool pcm16 = fmt_tag == 1 && bits == 16;
  const bool float32 = fmt_tag == 3 && bits == 32;
  if (!pcm16 && !float32) {
    throw Error("wav: unsupported sample format (only PCM16 and float32) in " + path);
  }
  const std::size_t width = bits / 8;
  const std::size_t frames = data_len / (width * channels);
  Waveform out(channels, frames, static_cast<double>(rate));
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + (t * channels + c) * width;
      if (pcm16) {
        out.at(c, t) = static_cast<std::int16_t>(read_u16(p)) / 32768.0;
      } else {
        const std::uint32_t raw = read_u32(p);
        float v;
        std::memcpy(&v, &raw, sizeof v);
        out.at(c, t) = v;
      }
    }
  }
  return out;
}

void write_wav(const std::string& path, const Waveform& signal, WavFormat format) {
  const std::uint16_t bits = format == WavFormat::Pcm16 ? 16 : 32;
  const std::uint16_t tag = format == WavFormat::Pcm16 ? 1 : 3;
  const std::uint16_t channels = static_cast<std::uint16_t>(signal.n_chan);
  const std::uint32_t rate = static_cast<std::uint32_t>(std::lround(signal.sample_rate));
  const std::uint32_t data_len = static_cast<std::uint32_t>(signal.n_samples * channels * (bits / 8));

  std::vector<unsigned char> buf;
  buf.reserve(44 + data_len);
  buf.insert(buf.end(), {'R', 'I', 'F', 'F'});
  put_u32(buf, 36 + data_len);
  buf.insert(buf.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(buf, 16);
  put_u16(buf, tag);
  put_u16(buf, channels);
  put_u32(buf, rate);
  put_u32(buf, rate * channels * (bits / 8));
  put_u16(buf, static_cast<std::uint16_t>(channels * (bits / 8)));
  put_u16(buf, bits);
  buf.insert(buf.end(), {'d', 'a', 't', 'a'});
  put_u32(buf, data_len);
  for (std::size_t t = 0; t < signal.n_samples; ++t) {
    for (std::size_t c = 0; c < signal.n_chan; ++c) {
      const double v = signal.at(c, t);
      if (format == WavFormat::Pcm16) {
        const double clipped = std::clamp(v, -1.0, 32767.0 / 32768.0);
        put_u16(buf, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(clipped * 32768.0))));
      } else {
        const float fv = static_cast<float>(v);
        std::uint32_t raw;
        std::memcpy(&raw, &fv, sizeof raw);
        put_u32(buf, raw);
      }
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("wav: cannot write " + path);
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

}  // namespace jisa
