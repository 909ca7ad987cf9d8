#include "hebtts/codec.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace hebtts {

namespace {

constexpr uint32_t kMagic = 0x434D4154;  // "CMAT"
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

void write_f64(std::ostream& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  write_u32(out, static_cast<uint32_t>(bits));
  write_u32(out, static_cast<uint32_t>(bits >> 32));
}

double read_f64(std::istream& in) {
  const uint64_t lo = read_u32(in);
  const uint64_t hi = read_u32(in);
  const uint64_t bits = lo | (hi << 32);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

CodeMatrix::CodeMatrix(std::vector<uint16_t> codes, CodecSpec spec)
    : codes_(std::move(codes)), spec_(spec) {
  if (spec_.n_codebooks == 0 || spec_.codebook_size < 2 ||
      spec_.frame_rate <= 0) {
    throw std::invalid_argument("CodeMatrix: invalid codec spec");
  }
  if (codes_.empty() || codes_.size() % spec_.n_codebooks != 0) {
    throw std::invalid_argument("CodeMatrix: code count not a frame multiple");
  }
  frames_ = static_cast<uint32_t>(codes_.size() / spec_.n_codebooks);
  for (uint16_t c : codes_) {
    if (c >= spec_.codebook_size) {
      throw std::invalid_argument("CodeMatrix: code outside codebook range");
    }
  }
}

bool CodeMatrix::operator==(const CodeMatrix& other) const {
  return frames_ == other.frames_ &&
         spec_.n_codebooks == other.spec_.n_codebooks &&
         spec_.codebook_size == other.spec_.codebook_size &&
         spec_.frame_rate == other.spec_.frame_rate && codes_ == other.codes_;
}

void CodeMatrix::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_u32(out, kMagic);
  write_u32(out, kVersion);
  write_u32(out, frames_);
  write_u32(out, spec_.n_codebooks);
  write_u32(out, spec_.codebook_size);
  write_u32(out, spec_.sample_rate);
  write_f64(out, spec_.frame_rate);
  for (uint16_t c : codes_) {
    const unsigned char b[2] = {static_cast<unsigned char>(c),
                                static_cast<unsigned char>(c >> 8)};
    out.write(reinterpret_cast<const char*>(b), 2);
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

CodeMatrix CodeMatrix::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  if (read_u32(in) != kMagic) {
    throw std::runtime_error(path + ": not a codemat file");
  }
  if (read_u32(in) != kVersion) {
    throw std::runtime_error(path + ": unsupported codemat version");
  }
  const uint32_t frames = read_u32(in);
  CodecSpec spec;
  spec.n_codebooks = read_u32(in);
  spec.codebook_size = read_u32(in);
  spec.sample_rate = read_u32(in);
  spec.frame_rate = read_f64(in);
  std::vector<uint16_t> codes(static_cast<size_t>(frames) * spec.n_codebooks);
  for (auto& c : codes) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    c = static_cast<uint16_t>(b[0] | (b[1] << 8));
  }
  if (!in) throw std::runtime_error(path + ": truncated codemat file");
  return CodeMatrix(std::move(codes), spec);
}

AcousticPrompt extract_prompt(const CodeMatrix& full, double seconds,
                              const std::string& speaker_tag) {
  const auto want =
      static_cast<uint32_t>(std::floor(seconds * full.spec().frame_rate));
  if (want == 0 || want > full.frames()) {
    throw std::invalid_argument(
        "extract_prompt: source shorter than requested prompt");
  }
  std::vector<uint16_t> codes(
      full.raw().begin(),
      full.raw().begin() + static_cast<size_t>(want) * full.spec().n_codebooks);
  return {CodeMatrix(std::move(codes), full.spec()), speaker_tag};
}

std::vector<uint16_t> first_codebook(const CodeMatrix& c) {
  std::vector<uint16_t> out(c.frames());
  for (uint32_t t = 0; t < c.frames(); ++t) out[t] = c.at(t, 0);
  return out;
}

std::vector<uint16_t> rest_codebooks(const CodeMatrix& c) {
  const uint32_t n = c.spec().n_codebooks;
  if (n < 2) {
    throw std::invalid_argument("rest_codebooks: single-codebook matrix");
  }
  std::vector<uint16_t> out(static_cast<size_t>(c.frames()) * (n - 1));
  for (uint32_t t = 0; t < c.frames(); ++t) {
    for (uint32_t j = 1; j < n; ++j) {
      out[static_cast<size_t>(t) * (n - 1) + (j - 1)] = c.at(t, j);
    }
  }
  return out;
}

CodeMatrix synth_codec_encode(const SyntheticSignal& signal,
                              const CodecSpec& spec) {
  if (signal.duration_s <= 0) {
    throw std::invalid_argument("synth_codec_encode: non-positive duration");
  }
  const auto frames = static_cast<uint32_t>(
      std::max(1.0, std::round(signal.duration_s * spec.frame_rate)));
  std::vector<uint16_t> codes(static_cast<size_t>(frames) * spec.n_codebooks);
  for (uint32_t t = 0; t < frames; ++t) {
    for (uint32_t j = 0; j < spec.n_codebooks; ++j) {
      const uint64_t h = splitmix64(
          signal.seed ^ splitmix64((static_cast<uint64_t>(t) << 20) | j));
      codes[static_cast<size_t>(t) * spec.n_codebooks + j] =
          static_cast<uint16_t>(h % spec.codebook_size);
    }
  }
  return CodeMatrix(std::move(codes), spec);
}

}  // namespace hebtts
