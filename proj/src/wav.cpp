#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "speechgrade/audio.hpp"
#include "speechgrade/errors.hpp"

namespace sg {

namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0]) |
         static_cast<std::uint16_t>(static_cast<std::uint32_t>(p[1]) << 8);
}

void put_u32(std::vector<unsigned char>& b, std::uint32_t v) {
  b.push_back(static_cast<unsigned char>(v & 0xff));
  b.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
  b.push_back(static_cast<unsigned char>((v >> 16) & 0xff));
  b.push_back(static_cast<unsigned char>((v >> 24) & 0xff));
}

void put_u16(std::vector<unsigned char>& b, std::uint16_t v) {
  b.push_back(static_cast<unsigned char>(v & 0xff));
  b.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
}

}  // namespace

AudioClip read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open WAV file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw FormatError("not a RIFF/WAVE file: " + path);

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* tag = reinterpret_cast<const char*>(bytes.data() + pos);
    const std::uint32_t chunk = read_u32(bytes.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (body + chunk > bytes.size())
      throw FormatError("truncated WAV chunk in " + path);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      if (chunk < 16) throw FormatError("short fmt chunk in " + path);
      format = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      rate = read_u32(bytes.data() + body + 4);
      bits = read_u16(bytes.data() + body + 14);
      if (format == 0xFFFE && chunk >= 40)  // WAVE_FORMAT_EXTENSIBLE
        format = read_u16(bytes.data() + body + 24);
    } else if (std::memcmp(tag, "data", 4) == 0) {
      data = bytes.data() + body;
      data_len = chunk;
    }
    pos = body + chunk + (chunk & 1);  // chunks are word-aligned
  }
  if (!data || channels == 0 || rate == 0)
    throw FormatError("missing fmt/data chunk in " + path);
  if (!((format == 1 && bits == 16) || (format == 3 && bits == 32)))
    throw FormatError("unsupported WAV encoding in " + path +
                      " (need 16-bit PCM or 32-bit float)");

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * channels;
  const std::size_t n_frames = data_len / frame_bytes;

  AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  clip.samples.resize(n_frames);
  for (std::size_t f = 0; f < n_frames; ++f) {
    double acc = 0.0;
    for (std::size_t ch = 0; ch < channels; ++ch) {
      const unsigned char* p = data + f * frame_bytes + ch * bytes_per_sample;
      if (format == 1) {
        const std::int16_t raw =
            static_cast<std::int16_t>(read_u16(p));
        acc += static_cast<double>(raw) / 32768.0;
      } else {
        float v;
        std::memcpy(&v, p, 4);
        if (!std::isfinite(v))
          throw FormatError("non-finite sample in " + path);
        acc += static_cast<double>(v);
      }
    }
    clip.samples[f] =
        std::clamp(acc / static_cast<double>(channels), -1.0, 1.0);
  }
  return clip;
}

void write_wav(const std::string& path, const AudioClip& clip) {
  if (clip.sample_rate <= 0)
    throw ParameterError("write_wav: sample rate must be positive");
  const std::uint32_t n = static_cast<std::uint32_t>(clip.samples.size());
  const std::uint32_t data_bytes = n * 2;

  std::vector<unsigned char> b;
  b.reserve(44 + data_bytes);
  const char* riff = "RIFF";
  b.insert(b.end(), riff, riff + 4);
  put_u32(b, 36 + data_bytes);
  const char* wavefmt = "WAVEfmt ";
  b.insert(b.end(), wavefmt, wavefmt + 8);
  put_u32(b, 16);
  put_u16(b, 1);  // PCM
  put_u16(b, 1);  // mono
  put_u32(b, static_cast<std::uint32_t>(clip.sample_rate));
  put_u32(b, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  put_u16(b, 2);   // block align
  put_u16(b, 16);  // bits
  const char* datatag = "data";
  b.insert(b.end(), datatag, datatag + 4);
  put_u32(b, data_bytes);
  for (double s : clip.samples) {
    const double clamped = std::clamp(s, -1.0, 1.0);
    const std::int16_t q =
        static_cast<std::int16_t>(std::lround(clamped * 32767.0));
    put_u16(b, static_cast<std::uint16_t>(q));
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write WAV file: " + path);
  out.write(reinterpret_cast<const char*>(b.data()),
            static_cast<std::streamsize>(b.size()));
  if (!out) throw IoError("failed writing WAV file: " + path);
}

}  // namespace sg
