#include "hebtts/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace hebtts {

namespace {

uint32_t u32le(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) |
         (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t u16le(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, uint32_t v) {
  out.push_back(static_cast<char>(v));
  out.push_back(static_cast<char>(v >> 8));
  out.push_back(static_cast<char>(v >> 16));
  out.push_back(static_cast<char>(v >> 24));
}

void put_u16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v));
  out.push_back(static_cast<char>(v >> 8));
}

}  // namespace

AudioBuffer read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<unsigned char> data((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (data.size() < 44 || std::memcmp(data.data(), "RIFF", 4) != 0 ||
      std::memcmp(data.data() + 8, "WAVE", 4) != 0) {
    throw std::runtime_error(path + ": not a RIFF/WAVE file");
  }
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t sample_rate = 0;
  size_t data_offset = 0, data_size = 0;
  size_t pos = 12;
  while (pos + 8 <= data.size()) {
    const uint32_t chunk_size = u32le(data.data() + pos + 4);
    if (std::memcmp(data.data() + pos, "fmt ", 4) == 0 && chunk_size >= 16) {
      format = u16le(data.data() + pos + 8);
      channels = u16le(data.data() + pos + 10);
      sample_rate = u32le(data.data() + pos + 12);
      bits = u16le(data.data() + pos + 22);
    } else if (std::memcmp(data.data() + pos, "data", 4) == 0) {
      data_offset = pos + 8;
      data_size = std::min<size_t>(chunk_size, data.size() - data_offset);
    }
    pos += 8 + chunk_size + (chunk_size & 1);
  }
  if (sample_rate == 0 || channels == 0 || data_offset == 0) {
    throw std::runtime_error(path + ": missing fmt/data chunk");
  }
  if (channels > 2) {
    throw std::runtime_error(path + ": only mono/stereo supported");
  }

  AudioBuffer audio;
  audio.sample_rate = sample_rate;
  audio.channels = channels;
  if (format == 1 && bits == 16) {
    const size_t n = data_size / 2;
    audio.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
      const auto s = static_cast<int16_t>(
          u16le(data.data() + data_offset + 2 * i));
      audio.samples[i] = static_cast<double>(s) / 32768.0;
    }
  } else if (format == 3 && bits == 32) {
    const size_t n = data_size / 4;
    audio.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
      const uint32_t b = u32le(data.data() + data_offset + 4 * i);
      float f;
      std::memcpy(&f, &b, 4);
      audio.samples[i] = static_cast<double>(f);
    }
  } else {
    throw std::runtime_error(path + ": unsupported WAV encoding (want PCM16 "
                                    "or float32)");
  }
  return audio;
}

std::string encode_wav_pcm16(const AudioBuffer& audio) {
  if (audio.sample_rate == 0 || audio.channels == 0) {
    throw std::invalid_argument("encode_wav_pcm16: invalid audio buffer");
  }
  std::string out;
  const auto n = static_cast<uint32_t>(audio.samples.size());
  const uint32_t data_bytes = n * 2;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, audio.channels);
  put_u32(out, audio.sample_rate);
  put_u32(out, audio.sample_rate * audio.channels * 2);
  put_u16(out, static_cast<uint16_t>(audio.channels * 2));
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_bytes);
  for (double s : audio.samples) {
    const double clamped = std::clamp(s, -1.0, 1.0);
    const auto v = static_cast<int16_t>(std::lround(clamped * 32767.0));
    put_u16(out, static_cast<uint16_t>(v));
  }
  return out;
}

void write_wav(const std::string& path, const AudioBuffer& audio) {
  const std::string out = encode_wav_pcm16(audio);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace hebtts
