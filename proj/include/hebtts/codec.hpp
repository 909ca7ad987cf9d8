#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hebtts {

struct CodecSpec {
  uint32_t n_codebooks = 8;
  uint32_t codebook_size = 1024;
  double frame_rate = 75.0;   // frames/second
  uint32_t sample_rate = 24000;
};

// T x N_cb grid of discrete acoustic codes. Immutable after construction.
class CodeMatrix {
 public:
  CodeMatrix() = default;
  CodeMatrix(std::vector<uint16_t> codes, CodecSpec spec);

  uint32_t frames() const { return frames_; }
  const CodecSpec& spec() const { return spec_; }
  double duration_s() const { return frames_ / spec_.frame_rate; }

  uint16_t at(uint32_t frame, uint32_t codebook) const {
    return codes_[frame * spec_.n_codebooks + codebook];
  }
  const std::vector<uint16_t>& raw() const { return codes_; }

  bool operator==(const CodeMatrix& other) const;

  // Little-endian binary container (.codemat).
  void save(const std::string& path) const;
  static CodeMatrix load(const std::string& path);

 private:
  std::vector<uint16_t> codes_;  // row-major, frames x n_codebooks
  CodecSpec spec_;
  uint32_t frames_ = 0;
};

struct AcousticPrompt {
  CodeMatrix codes;
  std::string speaker_tag;
};

// Leading floor(seconds * frame_rate) frames, all codebooks.
AcousticPrompt extract_prompt(const CodeMatrix& full, double seconds,
                              const std::string& speaker_tag = {});

// Column 1, the AR target stream.
std::vector<uint16_t> first_codebook(const CodeMatrix& c);

// Columns 2..N_cb, row-major frames x (N_cb - 1).
std::vector<uint16_t> rest_codebooks(const CodeMatrix& c);

// Descriptor for the deterministic stand-in codec used in desk-scale tests;
// the real neural codec stays an external process behind CodecClient.
struct SyntheticSignal {
  uint64_t seed = 0;
  double duration_s = 0.0;
};

CodeMatrix synth_codec_encode(const SyntheticSignal& signal,
                              const CodecSpec& spec);

// Interface for a real codec: audio file -> codes and back. Out-of-process;
// no implementation ships here.
class CodecClient {
 public:
  virtual ~CodecClient() = default;
  virtual CodeMatrix encode(const std::string& audio_path) = 0;
  virtual void decode(const CodeMatrix& codes,
                      const std::string& audio_path) = 0;
};

}  // namespace hebtts
