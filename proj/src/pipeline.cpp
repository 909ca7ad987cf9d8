#include "hebtts/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "hebtts/text_norm.hpp"
#include "httplib.h"
#include "json.hpp"

namespace hebtts {

namespace {

double global_rms(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double s = 0;
  for (double v : x) s += v * v;
  return std::sqrt(s / static_cast<double>(x.size()));
}

uint64_t fnv1a64(const std::string& bytes) {
  uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::string file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  std::ostringstream hex;
  hex << std::hex << fnv1a64(buf.str());
  return hex.str();
}

}  // namespace

std::string ManifestEntry::to_jsonl() const {
  nlohmann::ordered_json j;
  j["source_id"] = source_id;
  j["start_s"] = start_s;
  j["end_s"] = end_s;
  j["duration_s"] = duration_s;
  j["transcript"] = transcript;
  j["transcript_status"] = transcript_status;
  if (!failure_reason.empty()) j["failure_reason"] = failure_reason;
  return j.dump();
}

ManifestEntry ManifestEntry::from_jsonl(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  ManifestEntry e;
  e.source_id = j.at("source_id").get<std::string>();
  e.start_s = j.at("start_s").get<double>();
  e.end_s = j.at("end_s").get<double>();
  e.duration_s = j.at("duration_s").get<double>();
  e.transcript = j.at("transcript").get<std::string>();
  e.transcript_status = j.at("transcript_status").get<std::string>();
  if (j.contains("failure_reason")) {
    e.failure_reason = j.at("failure_reason").get<std::string>();
  }
  return e;
}

AudioBuffer resample_mono(const AudioBuffer& audio, uint32_t target_hz) {
  if (audio.sample_rate == 0 || target_hz == 0) {
    throw std::invalid_argument("resample_mono: zero sample rate");
  }
  if (audio.samples.empty()) {
    throw std::invalid_argument("resample_mono: empty buffer");
  }
  // Channel average.
  std::vector<double> mono(audio.frame_count());
  for (size_t i = 0; i < mono.size(); ++i) {
    double s = 0;
    for (uint16_t c = 0; c < audio.channels; ++c) {
      s += audio.samples[i * audio.channels + c];
    }
    mono[i] = s / audio.channels;
  }
  AudioBuffer out;
  out.sample_rate = target_hz;
  out.channels = 1;
  if (target_hz == audio.sample_rate) {
    out.samples = std::move(mono);
    return out;
  }

  const double ratio =
      static_cast<double>(target_hz) / audio.sample_rate;
  const auto out_len = static_cast<size_t>(
      std::llround(static_cast<double>(mono.size()) * ratio));
  out.samples.resize(out_len);

  // Windowed sinc, lowpassed at the narrower Nyquist when downsampling.
  const double cutoff = std::min(1.0, ratio);
  const int half_taps = static_cast<int>(std::ceil(32.0 / cutoff));
  for (size_t m = 0; m < out_len; ++m) {
    const double t = static_cast<double>(m) / ratio;
    const auto center = static_cast<long>(std::floor(t));
    double acc = 0;
    for (long n = center - half_taps; n <= center + half_taps + 1; ++n) {
      if (n < 0 || n >= static_cast<long>(mono.size())) continue;
      const double u = t - static_cast<double>(n);
      double sinc;
      if (std::abs(u) < 1e-12) {
        sinc = 1.0;
      } else {
        sinc = std::sin(M_PI * cutoff * u) / (M_PI * cutoff * u);
      }
      // Blackman window over the tap span.
      const double w_arg = 0.5 + u / (2.0 * (half_taps + 1));
      const double window =
          0.42 - 0.5 * std::cos(2.0 * M_PI * w_arg) +
          0.08 * std::cos(4.0 * M_PI * w_arg);
      acc += mono[static_cast<size_t>(n)] * sinc * window * cutoff;
    }
    out.samples[m] = acc;
  }
  return out;
}

namespace {

struct FrameView {
  std::vector<double> rms;  // per-frame RMS
  size_t frame_len = 0;     // samples
  double frame_s = 0.0;
};

FrameView frame_energy(const AudioBuffer& audio,
                       const SegmentationConfig& cfg) {
  FrameView fv;
  fv.frame_len = std::max<size_t>(
      1, static_cast<size_t>(
             std::llround(cfg.vad_frame_ms / 1000.0 * audio.sample_rate)));
  fv.frame_s = static_cast<double>(fv.frame_len) / audio.sample_rate;
  const size_t n_frames = audio.samples.size() / fv.frame_len;
  fv.rms.resize(n_frames);
  for (size_t f = 0; f < n_frames; ++f) {
    double s = 0;
    for (size_t k = 0; k < fv.frame_len; ++k) {
      const double v = audio.samples[f * fv.frame_len + k];
      s += v * v;
    }
    fv.rms[f] = std::sqrt(s / static_cast<double>(fv.frame_len));
  }
  return fv;
}

struct FrameRegion {
  size_t begin;  // frame index, inclusive
  size_t end;    // exclusive
};

// Splits [begin,end) at lowest-energy interior frames until each piece fits
// max_frames; pieces that end up under min_frames are discarded.
void split_region(const FrameRegion& region, const FrameView& fv,
                  size_t max_frames, size_t min_frames,
                  std::vector<FrameRegion>& out) {
  const size_t len = region.end - region.begin;
  if (len <= max_frames) {
    if (len >= min_frames) out.push_back(region);
    return;
  }
  size_t cut = region.begin + 1;
  for (size_t f = region.begin + 1; f + 1 < region.end; ++f) {
    if (fv.rms[f] < fv.rms[cut]) cut = f;
  }
  split_region({region.begin, cut}, fv, max_frames, min_frames, out);
  split_region({cut, region.end}, fv, max_frames, min_frames, out);
}

}  // namespace

std::vector<Segment> vad_segments(const AudioBuffer& audio,
                                  const SegmentationConfig& cfg) {
  if (audio.channels != 1) {
    throw std::invalid_argument("vad_segments: mono input required");
  }
  const FrameView fv = frame_energy(audio, cfg);
  const double threshold = cfg.vad_threshold * global_rms(audio.samples);
  if (fv.rms.empty()) return {};

  // Active runs of frames.
  std::vector<FrameRegion> regions;
  for (size_t f = 0; f < fv.rms.size(); ++f) {
    const bool active = fv.rms[f] > threshold && fv.rms[f] > 0.0;
    if (active) {
      if (!regions.empty() && regions.back().end == f) {
        regions.back().end = f + 1;
      } else {
        regions.push_back({f, f + 1});
      }
    }
  }

  // Merge across sub-gap silences.
  const auto gap_frames = static_cast<size_t>(
      std::ceil(cfg.min_silence_gap_s / fv.frame_s));
  std::vector<FrameRegion> merged;
  for (const auto& r : regions) {
    if (!merged.empty() && r.begin - merged.back().end < gap_frames) {
      merged.back().end = r.end;
    } else {
      merged.push_back(r);
    }
  }

  // Drop sub-minimum regions (pre-padding), split over-length ones.
  const auto min_frames = static_cast<size_t>(
      std::ceil(cfg.min_segment_s / fv.frame_s - 1e-9));
  const auto max_frames = std::max<size_t>(
      1, static_cast<size_t>(std::floor(cfg.max_segment_s / fv.frame_s)));
  std::vector<FrameRegion> kept;
  for (const auto& r : merged) {
    if (r.end - r.begin < min_frames) continue;
    split_region(r, fv, max_frames, min_frames, kept);
  }

  const double total_s = audio.duration_s();
  std::vector<Segment> segments;
  for (const auto& r : kept) {
    Segment s;
    s.start_s =
        std::max(0.0, static_cast<double>(r.begin) * fv.frame_s - cfg.pad_s);
    s.end_s =
        std::min(total_s, static_cast<double>(r.end) * fv.frame_s + cfg.pad_s);
    segments.push_back(s);
  }
  return segments;
}

ASRResult MockASRClient::transcribe(const AudioBuffer&) {
  if (use_fixed_) return fixed_;
  if (next_ >= script_.size()) {
    return {false, "", "mock script exhausted"};
  }
  return script_[next_++];
}

HttpASRClient::HttpASRClient(std::string endpoint) {
  if (endpoint.rfind("http://", 0) == 0) endpoint = endpoint.substr(7);
  const auto colon = endpoint.find(':');
  if (colon == std::string::npos) {
    host_ = endpoint;
  } else {
    host_ = endpoint.substr(0, colon);
    port_ = std::stoi(endpoint.substr(colon + 1));
  }
}

ASRResult HttpASRClient::transcribe(const AudioBuffer& audio) {
  httplib::Client client(host_, port_);
  client.set_read_timeout(60, 0);
  const auto res =
      client.Post("/transcribe", encode_wav_pcm16(audio), "audio/wav");
  if (!res) {
    return {false, "", "asr endpoint unreachable: " + host_};
  }
  if (res->status != 200) {
    return {false, "", "asr endpoint returned " + std::to_string(res->status)};
  }
  return {true, res->body, ""};
}

ManifestEntry transcribe(const ManifestEntry& entry, const AudioBuffer& audio,
                         ASRClient& client) {
  ManifestEntry out = entry;
  const ASRResult res = client.transcribe(audio);
  if (res.ok) {
    out.transcript = normalize_for_scoring(res.text);
    out.transcript_status = "transcribed";
    out.failure_reason.clear();
  } else {
    out.transcript_status = "failed";
    out.failure_reason = res.error;
  }
  return out;
}

namespace {

using Ledger = std::map<std::string, std::string>;

Ledger read_ledger(const std::string& path) {
  Ledger ledger;
  std::ifstream in(path);
  if (!in) return ledger;
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception&) {
    return ledger;
  }
  for (auto& [k, v] : j.items()) ledger[k] = v.get<std::string>();
  return ledger;
}

void write_ledger(const std::string& path, const Ledger& ledger) {
  nlohmann::ordered_json j;
  for (const auto& [k, v] : ledger) j[k] = v;
  std::ofstream out(path, std::ios::binary);
  out << j.dump(2) << '\n';
}

std::vector<ManifestEntry> read_manifest_entries(const std::string& path) {
  std::vector<ManifestEntry> entries;
  std::ifstream in(path);
  if (!in) return entries;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      entries.push_back(ManifestEntry::from_jsonl(line));
    } catch (const nlohmann::json::exception&) {
      // Malformed line: regenerate rather than trust the artifact.
      return {};
    }
  }
  return entries;
}

}  // namespace

PipelineResult run_pipeline(const std::vector<std::string>& sources,
                            const SegmentationConfig& cfg, ASRClient& client,
                            const std::string& manifest_path) {
  const std::string ledger_path = manifest_path + ".ledger";
  const Ledger old_ledger = read_ledger(ledger_path);
  const auto old_entries = read_manifest_entries(manifest_path);
  Ledger new_ledger;

  PipelineResult result;
  for (const auto& source : sources) {
    const std::string source_id =
        std::filesystem::path(source).filename().string();
    std::string checksum;
    try {
      checksum = file_checksum(source);
    } catch (const std::exception& e) {
      result.failures.push_back(source + ": " + e.what());
      continue;
    }

    const auto it = old_ledger.find(source);
    if (it != old_ledger.end() && it->second == checksum) {
      bool reused = false;
      for (const auto& e : old_entries) {
        if (e.source_id == source_id) {
          result.entries.push_back(e);
          reused = true;
        }
      }
      if (reused || !old_entries.empty()) {
        new_ledger[source] = checksum;
        ++result.skipped_sources;
        continue;
      }
    }

    try {
      const AudioBuffer raw = read_wav(source);
      const AudioBuffer audio = resample_mono(raw, cfg.target_sample_rate);
      for (const Segment& seg : vad_segments(audio, cfg)) {
        ManifestEntry entry;
        entry.source_id = source_id;
        entry.start_s = seg.start_s;
        entry.end_s = seg.end_s;
        entry.duration_s = seg.end_s - seg.start_s;
        const auto begin = static_cast<size_t>(
            std::llround(seg.start_s * audio.sample_rate));
        const auto end = std::min(
            audio.samples.size(),
            static_cast<size_t>(std::llround(seg.end_s * audio.sample_rate)));
        AudioBuffer cut;
        cut.sample_rate = audio.sample_rate;
        cut.channels = 1;
        cut.samples.assign(audio.samples.begin() + static_cast<long>(begin),
                           audio.samples.begin() + static_cast<long>(end));
        result.entries.push_back(transcribe(entry, cut, client));
      }
      new_ledger[source] = checksum;
    } catch (const std::exception& e) {
      result.failures.push_back(source + ": " + e.what());
    }
  }

  std::stable_sort(result.entries.begin(), result.entries.end(),
                   [](const ManifestEntry& a, const ManifestEntry& b) {
                     if (a.source_id != b.source_id) {
                       return a.source_id < b.source_id;
                     }
                     return a.start_s < b.start_s;
                   });
  write_manifest(manifest_path, result);
  write_ledger(ledger_path, new_ledger);
  return result;
}

void write_manifest(const std::string& path, const PipelineResult& result) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write manifest " + path);
  for (const auto& e : result.entries) out << e.to_jsonl() << '\n';
  if (!result.failures.empty()) {
    std::ofstream fail(path + ".failures", std::ios::binary);
    for (const auto& f : result.failures) fail << f << '\n';
  } else {
    std::error_code ec;
    std::filesystem::remove(path + ".failures", ec);
  }
}

}  // namespace hebtts
