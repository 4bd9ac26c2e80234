#include "mrpcen/audio.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "mrpcen/error.hpp"

namespace mrpcen {

AudioClip::AudioClip(Eigen::VectorXd s, int sr) : samples(std::move(s)), sample_rate(sr) {
  validate();
}

void AudioClip::validate() const {
  require(sample_rate > 0, "AudioClip: sample_rate must be positive");
  require(samples.allFinite(), "AudioClip: samples must be finite");
}

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

struct WavLayout {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
  std::size_t data_offset = 0;
  std::size_t data_size = 0;
};

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open WAV file: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

WavLayout parse_header(const std::vector<unsigned char>& bytes, const std::string& name) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError(name + ": not a RIFF/WAVE file");
  }
  WavLayout w;
  bool have_fmt = false;
  bool have_data = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::size_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + 16 > bytes.size()) throw FormatError(name + ": truncated fmt chunk");
      const unsigned char* f = bytes.data() + body;
      w.format = read_u16(f);
      w.channels = read_u16(f + 2);
      w.sample_rate = read_u32(f + 4);
      w.bits = read_u16(f + 14);
      if (w.format == kFormatExtensible) {
        if (size < 40 || body + 26 > bytes.size()) {
          throw FormatError(name + ": truncated WAVE_FORMAT_EXTENSIBLE header");
        }
        // First two bytes of the subformat GUID carry the plain format tag.
        w.format = read_u16(f + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      w.data_offset = body;
      // Tolerate writers that leave a too-large or streaming size.
      w.data_size = std::min(size, bytes.size() - body);
      have_data = true;
      break;
    }
    pos = body + size + (size & 1U);
  }
  if (!have_fmt) throw FormatError(name + ": missing fmt chunk");
  if (!have_data) throw FormatError(name + ": missing data chunk");
  if (w.channels == 0) throw FormatError(name + ": zero channels");
  if (w.sample_rate == 0) throw FormatError(name + ": zero sample rate");

  const bool pcm_ok = w.format == kFormatPcm && (w.bits == 16 || w.bits == 24 || w.bits == 32);
  const bool float_ok = w.format == kFormatFloat && w.bits == 32;
  if (!pcm_ok && !float_ok) {
    throw FormatError(name + ": unsupported codec (format tag " + std::to_string(w.format) +
                      ", " + std::to_string(w.bits) + " bits)");
  }
  return w;
}

double decode_sample(const unsigned char* p, const WavLayout& w) {
  switch (w.bits) {
    case 16:
      return static_cast<std::int16_t>(read_u16(p)) / 32768.0;
    case 24: {
      std::int32_t v = static_cast<std::int32_t>(p[0] | (p[1] << 8) | (p[2] << 16));
      if (v & 0x800000) v -= 0x1000000;
      return v / 8388608.0;
    }
    default: {
      const std::uint32_t u = read_u32(p);
      if (w.format == kFormatFloat) {
        float f;
        std::memcpy(&f, &u, sizeof f);
        return f;
      }
      return static_cast<std::int32_t>(u) / 2147483648.0;
    }
  }
}

}  // namespace

AudioClip load_wav(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  const WavLayout w = parse_header(bytes, path.string());
  const std::size_t frame_bytes = static_cast<std::size_t>(w.channels) * (w.bits / 8);
  const std::size_t n = w.data_size / frame_bytes;

  Eigen::VectorXd mono = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  const unsigned char* data = bytes.data() + w.data_offset;
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::uint16_t c = 0; c < w.channels; ++c) {
      acc += decode_sample(data + i * frame_bytes + c * (w.bits / 8), w);
    }
    mono[static_cast<Eigen::Index>(i)] = acc / w.channels;
  }
  if (!mono.allFinite()) throw FormatError(path.string() + ": non-finite float samples");
  return AudioClip(std::move(mono), static_cast<int>(w.sample_rate));
}

std::pair<int, std::size_t> wav_info(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  const WavLayout w = parse_header(bytes, path.string());
  const std::size_t frame_bytes = static_cast<std::size_t>(w.channels) * (w.bits / 8);
  return {static_cast<int>(w.sample_rate), w.data_size / frame_bytes};
}

namespace {

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::int64_t quantize(double x, int bits) {
  const double scale = std::ldexp(1.0, bits - 1);
  const double q = std::round(x * scale);
  return static_cast<std::int64_t>(std::clamp(q, -scale, scale - 1.0));
}

}  // namespace

void write_wav(const std::filesystem::path& path, const Eigen::MatrixXd& frames, int sample_rate,
               WavEncoding encoding) {
  require(sample_rate > 0, "write_wav: sample_rate must be positive");
  require(frames.cols() >= 1, "write_wav: need at least one channel");
  const auto channels = static_cast<std::uint16_t>(frames.cols());
  std::uint16_t bits = 16;
  std::uint16_t format = kFormatPcm;
  switch (encoding) {
    case WavEncoding::Pcm16: bits = 16; break;
    case WavEncoding::Pcm24: bits = 24; break;
    case WavEncoding::Pcm32: bits = 32; break;
    case WavEncoding::Float32: bits = 32; format = kFormatFloat; break;
  }
  const std::uint32_t block = channels * (bits / 8U);
  const auto data_size = static_cast<std::uint32_t>(frames.rows() * block);

  std::string out;
  out.reserve(44 + data_size);
  out += "RIFF";
  put_u32(out, 36 + data_size);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, format);
  put_u16(out, channels);
  put_u32(out, static_cast<std::uint32_t>(sample_rate));
  put_u32(out, static_cast<std::uint32_t>(sample_rate) * block);
  put_u16(out, static_cast<std::uint16_t>(block));
  put_u16(out, bits);
  out += "data";
  put_u32(out, data_size);

  for (Eigen::Index i = 0; i < frames.rows(); ++i) {
    for (Eigen::Index c = 0; c < frames.cols(); ++c) {
      const double x = frames(i, c);
      if (encoding == WavEncoding::Float32) {
        const float f = static_cast<float>(x);
        std::uint32_t u;
        std::memcpy(&u, &f, sizeof u);
        put_u32(out, u);
        continue;
      }
      const std::int64_t q = quantize(x, bits);
      const auto u = static_cast<std::uint32_t>(q);
      for (int b = 0; b < bits / 8; ++b) out.push_back(static_cast<char>((u >> (8 * b)) & 0xFF));
    }
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write WAV file: " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("short write: " + path.string());
}

}  // namespace mrpcen
