#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "hebtts/wav.hpp"

namespace hebtts {

struct SegmentationConfig {
  double min_segment_s = 1.0;
  double min_silence_gap_s = 0.100;
  double pad_s = 0.030;
  double max_segment_s = 18.0;
  double vad_threshold = 0.1;  // fraction of global RMS
  double vad_frame_ms = 30.0;
  uint32_t target_sample_rate = 16000;
};

struct ManifestEntry {
  std::string source_id;
  double start_s = 0.0;
  double end_s = 0.0;
  double duration_s = 0.0;
  std::string transcript;
  std::string transcript_status = "pending";  // transcribed | pending | failed
  std::string failure_reason;

  std::string to_jsonl() const;
  static ManifestEntry from_jsonl(const std::string& line);
};

// Channel-average to mono, then windowed-sinc resample.
AudioBuffer resample_mono(const AudioBuffer& audio, uint32_t target_hz);

struct Segment {
  double start_s = 0.0;
  double end_s = 0.0;
};

// Energy VAD: a frame is active when its RMS exceeds
// vad_threshold * global RMS. Active regions separated by less than the
// silence gap merge; sub-minimum regions drop; survivors get padded and
// over-length regions split at their lowest-energy interior frame.
std::vector<Segment> vad_segments(const AudioBuffer& audio,
                                  const SegmentationConfig& cfg);

struct ASRResult {
  bool ok = false;
  std::string text;
  std::string error;
};

class ASRClient {
 public:
  virtual ~ASRClient() = default;
  virtual ASRResult transcribe(const AudioBuffer& audio) = 0;
};

// Scripted client for tests: returns queued responses in order.
class MockASRClient : public ASRClient {
 public:
  explicit MockASRClient(std::vector<ASRResult> script)
      : script_(std::move(script)) {}
  explicit MockASRClient(std::string fixed_text)
      : fixed_({true, std::move(fixed_text), {}}), use_fixed_(true) {}
  ASRResult transcribe(const AudioBuffer& audio) override;

 private:
  std::vector<ASRResult> script_;
  ASRResult fixed_;
  bool use_fixed_ = false;
  size_t next_ = 0;
};

// POSTs segment audio as WAV to `<endpoint>/transcribe`; the response body
// is the transcript. Endpoint default comes from HEBTTS_ASR_ENDPOINT.
class HttpASRClient : public ASRClient {
 public:
  explicit HttpASRClient(std::string endpoint);
  ASRResult transcribe(const AudioBuffer& audio) override;

 private:
  std::string host_;
  int port_ = 80;
};

// Attaches the normalized weak transcript; failures are recorded, never
// dropped.
ManifestEntry transcribe(const ManifestEntry& entry, const AudioBuffer& audio,
                         ASRClient& client);

struct PipelineResult {
  std::vector<ManifestEntry> entries;
  std::vector<std::string> failures;  // unreadable sources etc.
  size_t skipped_sources = 0;         // reused from the checksum ledger
};

// resample -> vad -> transcribe for every source; idempotent per source via
// a JSON checksum ledger stored next to the manifest.
PipelineResult run_pipeline(const std::vector<std::string>& sources,
                            const SegmentationConfig& cfg, ASRClient& client,
                            const std::string& manifest_path);

void write_manifest(const std::string& path, const PipelineResult& result);

}  // namespace hebtts
