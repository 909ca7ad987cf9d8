#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hebtts {

// Interleaved samples in [-1, 1].
struct AudioBuffer {
  std::vector<double> samples;
  uint32_t sample_rate = 0;
  uint16_t channels = 1;

  size_t frame_count() const {
    return channels == 0 ? 0 : samples.size() / channels;
  }
  double duration_s() const {
    return sample_rate == 0
               ? 0.0
               : static_cast<double>(frame_count()) / sample_rate;
  }
};

// PCM16 and IEEE float32 WAV.
AudioBuffer read_wav(const std::string& path);
void write_wav(const std::string& path, const AudioBuffer& audio);
std::string encode_wav_pcm16(const AudioBuffer& audio);

}  // namespace hebtts
