#include "hebtts/tokenizer.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

#include "hebtts/unicode.hpp"
#include "json.hpp"

namespace hebtts {

namespace {

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (char32_t cp : unicode::decode_utf8(text)) {
    if (unicode::is_whitespace(cp)) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else {
      unicode::append_utf8(current, cp);
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

// Initial tokenization of a word: first codepoint bare, the rest "##"-prefixed.
std::vector<std::string> char_pieces(const std::string& word) {
  std::vector<std::string> pieces;
  bool first = true;
  for (char32_t cp : unicode::decode_utf8(word)) {
    std::string piece = first ? "" : "##";
    unicode::append_utf8(piece, cp);
    pieces.push_back(std::move(piece));
    first = false;
  }
  return pieces;
}

std::string merge_pieces(const std::string& left, const std::string& right) {
  std::string merged = left;
  merged += right.substr(right.rfind("##", 0) == 0 ? 2 : 0);
  return merged;
}

std::vector<std::string> default_specials() {
  return {Vocabulary::kUnk, Vocabulary::kPad, Vocabulary::kBos,
          Vocabulary::kEos};
}

// Piece ordering used for deterministic tie-breaks: compare the piece
// content with any "##" prefix stripped, and on equal content put the
// word-initial form before the continuation form.
bool piece_less(const std::string& a, const std::string& b) {
  const bool a_cont = a.rfind("##", 0) == 0;
  const bool b_cont = b.rfind("##", 0) == 0;
  const std::string_view a_body = std::string_view(a).substr(a_cont ? 2 : 0);
  const std::string_view b_body = std::string_view(b).substr(b_cont ? 2 : 0);
  if (a_body != b_body) return a_body < b_body;
  return a_cont < b_cont;
}

struct PairLess {
  bool operator()(const std::pair<std::string, std::string>& a,
                  const std::pair<std::string, std::string>& b) const {
    if (a.first != b.first) return piece_less(a.first, b.first);
    if (a.second != b.second) return piece_less(a.second, b.second);
    return false;
  }
};

}  // namespace

int Vocabulary::id_of(const std::string& piece) const {
  auto it = index_.find(piece);
  return it == index_.end() ? -1 : it->second;
}

void Vocabulary::rebuild_index() {
  index_.clear();
  for (size_t i = 0; i < entries.size(); ++i) {
    index_[entries[i]] = static_cast<int>(i);
  }
}

void Vocabulary::save(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(std::filesystem::path(dir) / "vocab.txt",
                      std::ios::binary);
    if (!out) throw std::runtime_error("cannot write vocab.txt in " + dir);
    for (const auto& e : entries) out << e << '\n';
  }
  nlohmann::ordered_json meta;
  meta["special_tokens"] = special_tokens;
  meta["target_size"] = target_size;
  auto& log = meta["merge_log"] = nlohmann::ordered_json::array();
  for (const auto& m : merge_log) {
    log.push_back({m.left, m.right, m.score});
  }
  std::ofstream out(std::filesystem::path(dir) / "meta.json",
                    std::ios::binary);
  if (!out) throw std::runtime_error("cannot write meta.json in " + dir);
  out << meta.dump(2) << '\n';
}

Vocabulary Vocabulary::load(const std::string& dir) {
  Vocabulary vocab;
  std::ifstream in(std::filesystem::path(dir) / "vocab.txt", std::ios::binary);
  if (!in) throw std::runtime_error("cannot read vocab.txt in " + dir);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) vocab.entries.push_back(line);
  }
  std::ifstream meta_in(std::filesystem::path(dir) / "meta.json",
                        std::ios::binary);
  if (!meta_in) throw std::runtime_error("cannot read meta.json in " + dir);
  auto meta = nlohmann::json::parse(meta_in);
  vocab.special_tokens = meta.at("special_tokens").get<std::vector<std::string>>();
  vocab.target_size = meta.at("target_size").get<size_t>();
  for (const auto& m : meta.at("merge_log")) {
    vocab.merge_log.push_back(
        {m.at(0).get<std::string>(), m.at(1).get<std::string>(),
         m.at(2).get<double>()});
  }
  vocab.rebuild_index();
  return vocab;
}

double pair_score(size_t pair_count, size_t left_count, size_t right_count) {
  if (left_count == 0 || right_count == 0) {
    throw std::invalid_argument("pair_score: zero constituent count");
  }
  return static_cast<double>(pair_count) /
         (static_cast<double>(left_count) * static_cast<double>(right_count));
}

Vocabulary train_wordpiece(const std::vector<std::string>& corpus,
                           const TrainConfig& cfg) {
  if (corpus.empty()) {
    throw std::invalid_argument("train_wordpiece: empty corpus");
  }

  // Word types with multiplicities; piece sequences evolve in place.
  std::map<std::string, size_t> word_counts;
  for (const auto& line : corpus) {
    for (auto& w : split_words(line)) ++word_counts[w];
  }
  struct WordState {
    std::vector<std::string> pieces;
    size_t count;
  };
  std::vector<WordState> words;
  words.reserve(word_counts.size());
  std::map<std::string, size_t> seed_set;  // ordered for determinism
  for (const auto& [word, count] : word_counts) {
    WordState ws{char_pieces(word), count};
    for (const auto& p : ws.pieces) seed_set[p] += count;
    words.push_back(std::move(ws));
  }

  Vocabulary vocab;
  vocab.special_tokens = default_specials();
  vocab.target_size = cfg.target_size;
  for (const auto& s : vocab.special_tokens) vocab.entries.push_back(s);
  for (const auto& [seed, _] : seed_set) vocab.entries.push_back(seed);
  if (cfg.target_size < vocab.entries.size()) {
    throw std::invalid_argument(
        "train_wordpiece: target_size below seed+special size");
  }
  vocab.rebuild_index();

  while (vocab.entries.size() < cfg.target_size) {
    std::map<std::pair<std::string, std::string>, size_t, PairLess> pair_freq;
    std::map<std::string, size_t> piece_freq;
    for (const auto& ws : words) {
      for (size_t i = 0; i < ws.pieces.size(); ++i) {
        piece_freq[ws.pieces[i]] += ws.count;
        if (i + 1 < ws.pieces.size()) {
          pair_freq[{ws.pieces[i], ws.pieces[i + 1]}] += ws.count;
        }
      }
    }

    bool found = false;
    std::pair<std::string, std::string> best;
    double best_score = 0.0;
    for (const auto& [pair, count] : pair_freq) {
      if (count < cfg.min_pair_count) continue;
      const std::string merged = merge_pieces(pair.first, pair.second);
      if (vocab.id_of(merged) >= 0) continue;  // entries stay unique
      const double score =
          pair_score(count, piece_freq[pair.first], piece_freq[pair.second]);
      // Strict > keeps the first pair in piece order on a tie since
      // pair_freq iterates in PairLess order.
      if (!found || score > best_score) {
        found = true;
        best = pair;
        best_score = score;
      }
    }
    if (!found) break;

    const std::string merged = merge_pieces(best.first, best.second);
    vocab.entries.push_back(merged);
    vocab.merge_log.push_back({best.first, best.second, best_score});
    vocab.rebuild_index();
    for (auto& ws : words) {
      auto& p = ws.pieces;
      for (size_t i = 0; i + 1 < p.size();) {
        if (p[i] == best.first && p[i + 1] == best.second) {
          p[i] = merged;
          p.erase(p.begin() + static_cast<long>(i) + 1);
        } else {
          ++i;
        }
      }
    }
  }
  return vocab;
}

Vocabulary train_chars(const std::vector<std::string>& corpus) {
  TrainConfig cfg;
  cfg.target_size = std::numeric_limits<size_t>::max();
  cfg.min_pair_count = std::numeric_limits<size_t>::max();  // no merges
  Vocabulary vocab = train_wordpiece(corpus, cfg);
  vocab.target_size = vocab.entries.size();
  return vocab;
}

namespace {

// Greedy longest-prefix segmentation; empty result means UNK fallback.
std::vector<int> segment_word(const std::vector<char32_t>& word,
                              const Vocabulary& vocab, bool chars_only) {
  std::vector<int> ids;
  size_t pos = 0;
  while (pos < word.size()) {
    const size_t max_len = chars_only ? 1 : word.size() - pos;
    int match = -1;
    size_t match_len = 0;
    for (size_t len = max_len; len >= 1; --len) {
      std::string candidate = pos > 0 ? "##" : "";
      for (size_t k = 0; k < len; ++k) {
        unicode::append_utf8(candidate, word[pos + k]);
      }
      const int id = vocab.id_of(candidate);
      if (id >= 0) {
        match = id;
        match_len = len;
        break;
      }
    }
    if (match < 0) return {};
    ids.push_back(match);
    pos += match_len;
  }
  return ids;
}

TokenSequence encode_impl(std::string_view text, const Vocabulary& vocab,
                          bool chars_only) {
  TokenSequence seq;
  seq.source_len = unicode::decode_utf8(text).size();
  for (const auto& word : split_words(text)) {
    const auto cps = unicode::decode_utf8(word);
    auto ids = segment_word(cps, vocab, chars_only);
    if (ids.empty()) {
      seq.ids.push_back(vocab.unk_id());
    } else {
      seq.ids.insert(seq.ids.end(), ids.begin(), ids.end());
    }
  }
  return seq;
}

}  // namespace

TokenSequence encode_wordpiece(std::string_view text,
                               const Vocabulary& vocab) {
  return encode_impl(text, vocab, /*chars_only=*/false);
}

TokenSequence encode_chars(std::string_view text, const Vocabulary& vocab) {
  return encode_impl(text, vocab, /*chars_only=*/true);
}

std::string decode(const TokenSequence& tokens, const Vocabulary& vocab) {
  std::string out;
  for (int id : tokens.ids) {
    if (id < 0 || static_cast<size_t>(id) >= vocab.entries.size()) {
      throw std::out_of_range("decode: token id out of range");
    }
    const std::string& piece = vocab.entries[static_cast<size_t>(id)];
    if (piece.rfind("##", 0) == 0) {
      out += piece.substr(2);
    } else {
      if (!out.empty()) out.push_back(' ');
      out += piece;
    }
  }
  return out;
}

TokenizerStats tokenizer_stats(const std::vector<std::string>& corpus,
                               const Vocabulary& vocab) {
  TokenizerStats stats;
  std::vector<bool> used(vocab.entries.size(), false);
  for (const auto& line : corpus) {
    const TokenSequence seq = encode_wordpiece(line, vocab);
    stats.sequence_lengths.push_back(seq.ids.size());
    stats.total_tokens += seq.ids.size();
    stats.total_words += split_words(line).size();
    for (int id : seq.ids) {
      used[static_cast<size_t>(id)] = true;
      if (id == vocab.unk_id()) ++stats.unk_tokens;
    }
  }
  if (stats.total_words > 0) {
    stats.tokens_per_word = static_cast<double>(stats.total_tokens) /
                            static_cast<double>(stats.total_words);
  }
  if (!vocab.entries.empty()) {
    const auto used_count =
        static_cast<size_t>(std::count(used.begin(), used.end(), true));
    stats.vocab_utilization =
        static_cast<double>(used_count) / static_cast<double>(vocab.size());
  }
  return stats;
}

}  // namespace hebtts
