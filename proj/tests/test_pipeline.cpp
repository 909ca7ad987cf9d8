#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "hebtts/pipeline.hpp"
#include "hebtts/text_norm.hpp"
#include "hebtts/wav.hpp"

using namespace hebtts;

namespace {

AudioBuffer tone(double freq_hz, double duration_s, uint32_t rate,
                 double amplitude = 0.5) {
  AudioBuffer a;
  a.sample_rate = rate;
  a.channels = 1;
  const auto n = static_cast<size_t>(std::llround(duration_s * rate));
  a.samples.resize(n);
  for (size_t i = 0; i < n; ++i) {
    a.samples[i] =
        amplitude * std::sin(2.0 * M_PI * freq_hz * i / rate);
  }
  return a;
}

AudioBuffer silence(double duration_s, uint32_t rate) {
  AudioBuffer a;
  a.sample_rate = rate;
  a.channels = 1;
  a.samples.assign(static_cast<size_t>(std::llround(duration_s * rate)), 0.0);
  return a;
}

AudioBuffer concat(const std::vector<AudioBuffer>& parts) {
  AudioBuffer out;
  out.sample_rate = parts.front().sample_rate;
  out.channels = 1;
  for (const auto& p : parts) {
    out.samples.insert(out.samples.end(), p.samples.begin(), p.samples.end());
  }
  return out;
}

// Magnitude of the DFT at one frequency (Goertzel-style direct sum).
double spectrum_peak_at(const AudioBuffer& a, double freq_hz) {
  std::complex<double> acc = 0;
  for (size_t i = 0; i < a.samples.size(); ++i) {
    const double phase = -2.0 * M_PI * freq_hz * i / a.sample_rate;
    acc += a.samples[i] * std::complex<double>(std::cos(phase),
                                               std::sin(phase));
  }
  return std::abs(acc) / static_cast<double>(a.samples.size());
}

}  // namespace

TEST_CASE("resample at the same rate is an identity") {
  const AudioBuffer a = tone(440.0, 0.5, 16000);
  const AudioBuffer b = resample_mono(a, 16000);
  REQUIRE(b.samples.size() == a.samples.size());
  double rms = 0;
  for (size_t i = 0; i < a.samples.size(); ++i) {
    const double d = a.samples[i] - b.samples[i];
    rms += d * d;
  }
  CHECK(std::sqrt(rms / static_cast<double>(a.samples.size())) < 1e-6);
}

TEST_CASE("downsampling a pure tone keeps its peak and rejects aliases") {
  const AudioBuffer src = tone(440.0, 1.0, 48000);
  const AudioBuffer dst = resample_mono(src, 16000);
  CHECK(dst.sample_rate == 16000);
  CHECK(dst.samples.size() ==
        static_cast<size_t>(std::llround(src.samples.size() / 3.0)));
  const double peak = spectrum_peak_at(dst, 440.0);
  CHECK(peak > 0.2);  // 0.25 for a 0.5-amplitude tone
  // No significant energy at arbitrary other frequencies.
  for (double f : {1234.0, 3000.0, 6500.0}) {
    CHECK(spectrum_peak_at(dst, f) < peak * 0.01);
  }
}

TEST_CASE("opposite-phase stereo cancels to silence") {
  AudioBuffer stereo;
  stereo.sample_rate = 16000;
  stereo.channels = 2;
  const AudioBuffer mono = tone(300.0, 0.2, 16000);
  for (double s : mono.samples) {
    stereo.samples.push_back(s);
    stereo.samples.push_back(-s);
  }
  const AudioBuffer out = resample_mono(stereo, 16000);
  for (double s : out.samples) CHECK(std::abs(s) < 1e-12);
}

TEST_CASE("resample rejects degenerate input") {
  AudioBuffer empty;
  empty.sample_rate = 16000;
  CHECK_THROWS_AS(resample_mono(empty, 16000), std::invalid_argument);
  CHECK_THROWS_AS(resample_mono(tone(100, 0.1, 16000), 0),
                  std::invalid_argument);
}

TEST_CASE("two tone bursts with a 150ms gap give two padded segments") {
  const uint32_t rate = 16000;
  const AudioBuffer wave = concat({tone(440, 2.0, rate), silence(0.15, rate),
                                   tone(440, 2.0, rate)});
  SegmentationConfig cfg;
  const auto segs = vad_segments(wave, cfg);
  REQUIRE(segs.size() == 2);
  const double frame_s = cfg.vad_frame_ms / 1000.0 + 1e-9;
  CHECK(segs[0].start_s <= frame_s);
  CHECK(std::abs(segs[0].end_s - segs[0].start_s - (2.0 + 2 * cfg.pad_s)) <=
        frame_s);
  CHECK(std::abs(segs[1].start_s - (2.15 - cfg.pad_s)) <= frame_s);
  CHECK(std::abs(segs[1].end_s - (4.15 + cfg.pad_s)) <= frame_s);
  // Un-padded gap respects the silence rule.
  CHECK(segs[1].start_s + cfg.pad_s - (segs[0].end_s - cfg.pad_s) >=
        cfg.min_silence_gap_s - 1e-9);
}

TEST_CASE("sub-second burst yields no segments") {
  const uint32_t rate = 16000;
  const AudioBuffer wave = concat({silence(1.0, rate), tone(440, 0.5, rate),
                                   silence(1.0, rate)});
  CHECK(vad_segments(wave, SegmentationConfig{}).empty());
}

TEST_CASE("all-silence input yields no segments") {
  CHECK(vad_segments(silence(3.0, 16000), SegmentationConfig{}).empty());
}

TEST_CASE("sub-gap pauses are merged into one segment") {
  const uint32_t rate = 16000;
  const AudioBuffer wave = concat({tone(440, 1.0, rate), silence(0.06, rate),
                                   tone(440, 1.0, rate)});
  const auto segs = vad_segments(wave, SegmentationConfig{});
  CHECK(segs.size() == 1);
}

TEST_CASE("over-length segments are split under the maximum") {
  const uint32_t rate = 16000;
  SegmentationConfig cfg;
  cfg.max_segment_s = 3.0;
  const AudioBuffer wave = tone(440, 8.0, rate);
  const auto segs = vad_segments(wave, cfg);
  CHECK(segs.size() >= 3);
  for (const auto& s : segs) {
    CHECK(s.end_s - s.start_s <= cfg.max_segment_s + 2 * cfg.pad_s + 1e-9);
    CHECK(s.end_s - s.start_s >= cfg.min_segment_s - 1e-9);
  }
}

TEST_CASE("segment durations always satisfy the min/max bounds") {
  std::mt19937_64 rng(31);
  SegmentationConfig cfg;
  cfg.max_segment_s = 4.0;
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<AudioBuffer> parts;
    for (int k = 0; k < 6; ++k) {
      if (rng() % 2 == 0) {
        parts.push_back(tone(300 + 100.0 * (rng() % 5),
                             0.3 + 0.002 * (rng() % 2000), 16000));
      } else {
        parts.push_back(silence(0.05 + 0.001 * (rng() % 500), 16000));
      }
    }
    const auto segs = vad_segments(concat(parts), cfg);
    for (size_t i = 0; i < segs.size(); ++i) {
      const double dur = segs[i].end_s - segs[i].start_s;
      CHECK(dur >= cfg.min_segment_s - 1e-9);
      CHECK(dur <= cfg.max_segment_s + 2 * cfg.pad_s + 1e-9);
      if (i > 0) {
        // Overlap only within the pad margins.
        CHECK(segs[i].start_s + cfg.pad_s >= segs[i - 1].end_s - cfg.pad_s);
      }
    }
  }
}

TEST_CASE("transcribe normalizes the mock response") {
  MockASRClient client(std::string("  Hello,   World! "));
  ManifestEntry entry;
  entry.source_id = "s";
  entry.start_s = 0;
  entry.end_s = 1;
  entry.duration_s = 1;
  const auto out = transcribe(entry, tone(440, 0.1, 16000), client);
  CHECK(out.transcript == "Hello World");
  CHECK(out.transcript_status == "transcribed");
}

TEST_CASE("transcription failure is recorded, not dropped") {
  MockASRClient client(std::vector<ASRResult>{{false, "", "timeout"}});
  ManifestEntry entry;
  entry.source_id = "s";
  const auto out = transcribe(entry, tone(440, 0.1, 16000), client);
  CHECK(out.transcript_status == "failed");
  CHECK(out.failure_reason == "timeout");
}

TEST_CASE("batch with scripted failures loses nothing") {
  std::vector<ASRResult> script;
  for (int i = 0; i < 100; ++i) {
    if (i % 10 == 3) {
      script.push_back({false, "", "err"});
    } else {
      script.push_back({true, "text " + std::to_string(i), ""});
    }
  }
  MockASRClient client(script);
  size_t ok = 0, failed = 0;
  const AudioBuffer audio = tone(440, 0.05, 16000);
  for (int i = 0; i < 100; ++i) {
    ManifestEntry entry;
    entry.source_id = "s" + std::to_string(i);
    const auto out = transcribe(entry, audio, client);
    if (out.transcript_status == "transcribed") ++ok;
    if (out.transcript_status == "failed") ++failed;
  }
  CHECK(ok == 90);
  CHECK(failed == 10);
}

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

}  // namespace

TEST_CASE("run_pipeline end to end on synthetic sources") {
  const auto dir = std::filesystem::temp_directory_path() / "hebtts_pipe";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const std::string wav_path = (dir / "ep1.wav").string();
  write_wav(wav_path, concat({tone(440, 2.0, 16000), silence(0.2, 16000),
                              tone(440, 2.0, 16000)}));

  const std::string manifest = (dir / "manifest.jsonl").string();
  SegmentationConfig cfg;
  {
    MockASRClient client(std::string("shalom olam"));
    const auto result = run_pipeline({wav_path}, cfg, client, manifest);
    CHECK(result.entries.size() == 2);
    CHECK(result.failures.empty());
    for (const auto& e : result.entries) {
      CHECK(e.source_id == "ep1.wav");
      CHECK(e.transcript == "shalom olam");
      CHECK(e.transcript_status == "transcribed");
      CHECK(e.duration_s ==
            doctest::Approx(e.end_s - e.start_s).epsilon(1e-6));
    }
  }
  const std::string first = slurp(manifest);

  // Re-run: ledger short-circuits, manifest is byte-identical.
  {
    MockASRClient client(std::string("DIFFERENT"));
    const auto result = run_pipeline({wav_path}, cfg, client, manifest);
    CHECK(result.skipped_sources == 1);
    CHECK(result.entries.size() == 2);
  }
  CHECK(slurp(manifest) == first);
}

TEST_CASE("run_pipeline with empty source list writes an empty manifest") {
  const auto dir = std::filesystem::temp_directory_path() / "hebtts_pipe2";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const std::string manifest = (dir / "m.jsonl").string();
  MockASRClient client(std::string("x"));
  const auto result =
      run_pipeline({}, SegmentationConfig{}, client, manifest);
  CHECK(result.entries.empty());
  CHECK(std::filesystem::exists(manifest));
  CHECK(slurp(manifest).empty());
}

TEST_CASE("unreadable source is logged and skipped") {
  const auto dir = std::filesystem::temp_directory_path() / "hebtts_pipe3";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const std::string manifest = (dir / "m.jsonl").string();
  MockASRClient client(std::string("x"));
  const auto result = run_pipeline({(dir / "missing.wav").string()},
                                   SegmentationConfig{}, client, manifest);
  CHECK(result.entries.empty());
  REQUIRE(result.failures.size() == 1);
  CHECK(std::filesystem::exists(manifest + ".failures"));
}

TEST_CASE("manifest entries round-trip through JSONL") {
  ManifestEntry e;
  e.source_id = "pod.wav";
  e.start_s = 1.23;
  e.end_s = 4.56;
  e.duration_s = 3.33;
  e.transcript = "שלום";
  e.transcript_status = "transcribed";
  const ManifestEntry back = ManifestEntry::from_jsonl(e.to_jsonl());
  CHECK(back.source_id == e.source_id);
  CHECK(back.start_s == e.start_s);
  CHECK(back.end_s == e.end_s);
  CHECK(back.transcript == e.transcript);
  CHECK(back.transcript_status == e.transcript_status);
}
