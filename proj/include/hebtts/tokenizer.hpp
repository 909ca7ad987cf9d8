#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hebtts {

struct MergeRecord {
  std::string left;
  std::string right;
  double score = 0.0;
};

// Ordered word-piece inventory. Entries are laid out as
// [special tokens][single-character seeds][merged pieces in merge order];
// continuation pieces carry the "##" prefix.
struct Vocabulary {
  std::vector<std::string> entries;
  std::vector<std::string> special_tokens;
  std::vector<MergeRecord> merge_log;
  size_t target_size = 0;

  static constexpr const char* kUnk = "[UNK]";
  static constexpr const char* kPad = "[PAD]";
  static constexpr const char* kBos = "[BOS]";
  static constexpr const char* kEos = "[EOS]";

  int id_of(const std::string& piece) const;
  int unk_id() const { return id_of(kUnk); }
  size_t size() const { return entries.size(); }

  // vocab.txt (one entry per line) plus meta.json in `dir`.
  void save(const std::string& dir) const;
  static Vocabulary load(const std::string& dir);

  void rebuild_index();

 private:
  std::unordered_map<std::string, int> index_;
};

struct TokenSequence {
  std::vector<int> ids;
  size_t source_len = 0;  // codepoints of the originating text
};

struct TrainConfig {
  size_t target_size = 1000;
  size_t min_pair_count = 2;
};

// Eq.-style merge priority: pair_count / (left_count * right_count).
double pair_score(size_t pair_count, size_t left_count, size_t right_count);

// Grows the vocabulary from the per-character seed set by repeatedly merging
// the adjacent pair with maximal pair_score until target_size entries exist
// or no pair is seen min_pair_count times. Ties break lexicographically on
// (left, right) so training is replayable.
Vocabulary train_wordpiece(const std::vector<std::string>& corpus,
                           const TrainConfig& cfg);

// Seed-only vocabulary for the character-tokenizer baseline.
Vocabulary train_chars(const std::vector<std::string>& corpus);

// Greedy longest-match-first segmentation per whitespace-delimited word.
// A word with no matching prefix becomes a single [UNK].
TokenSequence encode_wordpiece(std::string_view text, const Vocabulary& vocab);

// One token per codepoint (seed pieces only); [UNK] per uncovered word.
TokenSequence encode_chars(std::string_view text, const Vocabulary& vocab);

std::string decode(const TokenSequence& tokens, const Vocabulary& vocab);

struct TokenizerStats {
  size_t total_words = 0;
  size_t total_tokens = 0;
  size_t unk_tokens = 0;
  double tokens_per_word = 0.0;
  double vocab_utilization = 0.0;  // distinct entries used / |entries|
  std::vector<size_t> sequence_lengths;  // tokens per corpus line
};

TokenizerStats tokenizer_stats(const std::vector<std::string>& corpus,
                               const Vocabulary& vocab);

}  // namespace hebtts
