#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "hebtts/codec.hpp"

using namespace hebtts;

namespace {

CodecSpec small_spec() {
  CodecSpec spec;
  spec.n_codebooks = 4;
  spec.codebook_size = 64;
  spec.frame_rate = 75.0;
  spec.sample_rate = 24000;
  return spec;
}

}  // namespace

TEST_CASE("prompt extraction arithmetic") {
  const auto m = synth_codec_encode({1, 10.0}, small_spec());
  const auto prompt = extract_prompt(m, 3.0);
  CHECK(prompt.codes.frames() == 225);
}

TEST_CASE("prompt longer than source is rejected") {
  const auto m = synth_codec_encode({1, 2.0}, small_spec());
  CHECK_THROWS_AS(extract_prompt(m, 3.0), std::invalid_argument);
}

TEST_CASE("prompt is an element-wise prefix of the source") {
  const auto m = synth_codec_encode({7, 5.0}, small_spec());
  const auto prompt = extract_prompt(m, 2.0);
  for (uint32_t t = 0; t < prompt.codes.frames(); ++t) {
    for (uint32_t j = 0; j < m.spec().n_codebooks; ++j) {
      CHECK(prompt.codes.at(t, j) == m.at(t, j));
    }
  }
}

TEST_CASE("single-codebook matrix flattens to its first codebook") {
  CodecSpec spec = small_spec();
  spec.n_codebooks = 1;
  const auto m = synth_codec_encode({3, 1.0}, spec);
  const auto fc = first_codebook(m);
  CHECK(fc == m.raw());
  CHECK_THROWS_AS(rest_codebooks(m), std::invalid_argument);
}

TEST_CASE("first and rest codebooks partition the matrix") {
  const auto m = synth_codec_encode({11, 2.5}, small_spec());
  const auto fc = first_codebook(m);
  const auto rest = rest_codebooks(m);
  const uint32_t n = m.spec().n_codebooks;
  for (uint32_t t = 0; t < m.frames(); ++t) {
    CHECK(fc[t] == m.at(t, 0));
    CHECK(fc[t] < m.spec().codebook_size);
    for (uint32_t j = 1; j < n; ++j) {
      CHECK(rest[static_cast<size_t>(t) * (n - 1) + (j - 1)] == m.at(t, j));
    }
  }
}

TEST_CASE("synthetic codec is deterministic") {
  const auto a = synth_codec_encode({42, 3.0}, small_spec());
  const auto b = synth_codec_encode({42, 3.0}, small_spec());
  CHECK(a == b);
  const auto c = synth_codec_encode({43, 3.0}, small_spec());
  CHECK_FALSE(a == c);
}

TEST_CASE("synthetic codec frame count follows frame rate") {
  const auto m = synth_codec_encode({0, 1.0}, small_spec());
  CHECK(m.frames() == 75);
  CHECK(m.duration_s() == doctest::Approx(1.0));
  CHECK_THROWS_AS(synth_codec_encode({0, 0.0}, small_spec()),
                  std::invalid_argument);
}

TEST_CASE("synthetic codes stay inside the codebook over many descriptors") {
  std::mt19937_64 rng(1);
  CodecSpec spec = small_spec();
  spec.codebook_size = 17;  // non-power-of-two exercises the modulus
  for (int i = 0; i < 10000; ++i) {
    const auto m =
        synth_codec_encode({rng(), 0.01 + 0.05 * (i % 7)}, spec);
    for (uint16_t c : m.raw()) CHECK(c < spec.codebook_size);
  }
}

TEST_CASE("codemat serialization round-trips") {
  const auto m = synth_codec_encode({99, 1.7}, small_spec());
  const auto tmp =
      (std::filesystem::temp_directory_path() / "hebtts_test.codemat")
          .string();
  m.save(tmp);
  const auto loaded = CodeMatrix::load(tmp);
  CHECK(loaded == m);

  // write(read(m)) is byte-identical.
  loaded.save(tmp + ".2");
  std::ifstream fa(tmp, std::ios::binary), fb(tmp + ".2", std::ios::binary);
  const std::string ca((std::istreambuf_iterator<char>(fa)), {});
  const std::string cb((std::istreambuf_iterator<char>(fb)), {});
  CHECK(ca == cb);
}

TEST_CASE("loading garbage fails cleanly") {
  const auto tmp =
      (std::filesystem::temp_directory_path() / "hebtts_bad.codemat").string();
  std::ofstream(tmp, std::ios::binary) << "not a codemat";
  CHECK_THROWS(CodeMatrix::load(tmp));
}

TEST_CASE("code matrix validates its invariants") {
  CodecSpec spec = small_spec();
  CHECK_THROWS_AS(CodeMatrix({1, 2, 3}, spec), std::invalid_argument);
  std::vector<uint16_t> over(spec.n_codebooks, spec.codebook_size);
  CHECK_THROWS_AS(CodeMatrix(std::move(over), spec), std::invalid_argument);
}
