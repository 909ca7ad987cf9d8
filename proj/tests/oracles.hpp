// Independent reference implementations used only by tests. These stay
// deliberately naive: every round recounts from scratch and scans all pairs.
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace oracles {

// Plain quadratic DP Levenshtein over token vectors, total distance only.
inline size_t dp_distance(const std::vector<std::string>& a,
                          const std::vector<std::string>& b) {
  std::vector<size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (size_t j = 1; j <= b.size(); ++j) {
      const size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

struct RefMerge {
  std::string left, right;
  double score;
};

// Tie-break key for a piece: its content without the "##" prefix, then a
// flag putting the word-initial form before the continuation form.
inline std::pair<std::string, int> ref_piece_key(const std::string& p) {
  const bool cont = p.rfind("##", 0) == 0;
  return {cont ? p.substr(2) : p, cont ? 1 : 0};
}

// Brute-force word-piece trainer: tokenizes every word occurrence into
// pieces, rescans all adjacent pairs each round, scores them with
// pair/(left*right), merges the max. Ties go to the lowest (left, right)
// under ref_piece_key ordering. ASCII corpora only; one byte = one
// character.
inline std::vector<RefMerge> ref_wordpiece_merges(
    const std::vector<std::string>& corpus, size_t max_merges,
    size_t min_pair_count = 2) {
  std::vector<std::vector<std::string>> words;
  for (const auto& line : corpus) {
    std::string w;
    auto flush = [&] {
      if (w.empty()) return;
      std::vector<std::string> pieces;
      for (size_t i = 0; i < w.size(); ++i) {
        pieces.push_back((i == 0 ? std::string() : std::string("##")) +
                         w[i]);
      }
      words.push_back(std::move(pieces));
      w.clear();
    };
    for (char c : line) {
      if (c == ' ' || c == '\t' || c == '\n') {
        flush();
      } else {
        w.push_back(c);
      }
    }
    flush();
  }

  std::map<std::string, bool> vocab;
  for (const auto& pieces : words) {
    for (const auto& p : pieces) vocab[p] = true;
  }

  std::vector<RefMerge> merges;
  while (merges.size() < max_merges) {
    std::map<std::pair<std::string, std::string>, size_t> pair_count;
    std::map<std::string, size_t> piece_count;
    for (const auto& pieces : words) {
      for (size_t i = 0; i < pieces.size(); ++i) {
        ++piece_count[pieces[i]];
        if (i + 1 < pieces.size()) ++pair_count[{pieces[i], pieces[i + 1]}];
      }
    }
    bool found = false;
    std::pair<std::string, std::string> best;
    double best_score = 0;
    for (const auto& [pair, count] : pair_count) {
      if (count < min_pair_count) continue;
      std::string merged =
          pair.first +
          (pair.second.rfind("##", 0) == 0 ? pair.second.substr(2)
                                           : pair.second);
      if (vocab.count(merged) != 0) continue;
      const double score =
          static_cast<double>(count) /
          (static_cast<double>(piece_count[pair.first]) *
           static_cast<double>(piece_count[pair.second]));
      const auto key = std::make_pair(ref_piece_key(pair.first),
                                      ref_piece_key(pair.second));
      const auto best_key = std::make_pair(ref_piece_key(best.first),
                                           ref_piece_key(best.second));
      if (!found || score > best_score ||
          (score == best_score && key < best_key)) {
        found = true;
        best = pair;
        best_score = score;
      }
    }
    if (!found) break;
    const std::string merged =
        best.first +
        (best.second.rfind("##", 0) == 0 ? best.second.substr(2)
                                         : best.second);
    vocab[merged] = true;
    merges.push_back({best.first, best.second, best_score});
    for (auto& pieces : words) {
      for (size_t i = 0; i + 1 < pieces.size();) {
        if (pieces[i] == best.first && pieces[i + 1] == best.second) {
          pieces[i] = merged;
          pieces.erase(pieces.begin() + static_cast<long>(i) + 1);
        } else {
          ++i;
        }
      }
    }
  }
  return merges;
}

}  // namespace oracles
