#include "hebtts/eval.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "hebtts/text_norm.hpp"
#include "hebtts/unicode.hpp"
#include "json.hpp"

namespace hebtts {

EditCounts edit_distance(const std::vector<std::string>& ref,
                         const std::vector<std::string>& hyp) {
  const size_t n = ref.size();
  const size_t m = hyp.size();
  std::vector<std::vector<size_t>> cost(n + 1, std::vector<size_t>(m + 1));
  // Substitutions are preferred over insert+delete pairs: among min-cost
  // alignments we maximize the substitution count, which pins the (S,I,D)
  // decomposition uniquely (I - D and S + I + D are then both fixed).
  std::vector<std::vector<size_t>> subs(n + 1, std::vector<size_t>(m + 1, 0));
  for (size_t i = 0; i <= n; ++i) cost[i][0] = i;
  for (size_t j = 0; j <= m; ++j) cost[0][j] = j;
  for (size_t i = 1; i <= n; ++i) {
    for (size_t j = 1; j <= m; ++j) {
      const bool mismatch = ref[i - 1] != hyp[j - 1];
      const size_t diag = cost[i - 1][j - 1] + (mismatch ? 1 : 0);
      const size_t del = cost[i - 1][j] + 1;
      const size_t ins = cost[i][j - 1] + 1;
      const size_t best = std::min({diag, del, ins});
      cost[i][j] = best;
      size_t s = 0;
      if (diag == best) {
        s = std::max(s, subs[i - 1][j - 1] + (mismatch ? 1 : 0));
      }
      if (del == best) s = std::max(s, subs[i - 1][j]);
      if (ins == best) s = std::max(s, subs[i][j - 1]);
      subs[i][j] = s;
    }
  }
  EditCounts counts;
  const size_t total = cost[n][m];
  counts.substitutions = subs[n][m];
  // I - D = m - n and S + I + D = total.
  counts.insertions = (total - counts.substitutions + m - n) / 2;
  counts.deletions = total - counts.substitutions - counts.insertions;
  return counts;
}

std::vector<std::string> word_tokens(std::string_view normalized) {
  std::vector<std::string> words;
  std::string current;
  for (char c : normalized) {
    if (c == ' ') {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

std::vector<std::string> char_tokens(std::string_view normalized) {
  std::vector<std::string> chars;
  for (char32_t cp : unicode::decode_utf8(normalized)) {
    std::string s;
    unicode::append_utf8(s, cp);
    chars.push_back(std::move(s));
  }
  return chars;
}

namespace {

void require_normalized(std::string_view text, const char* who) {
  if (normalize_for_scoring(text) != text) {
    throw std::invalid_argument(std::string(who) +
                                ": input is not normalized text");
  }
}

double rate(const std::vector<std::string>& ref,
            const std::vector<std::string>& hyp) {
  if (ref.empty()) {
    return hyp.empty() ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return static_cast<double>(edit_distance(ref, hyp).total()) /
         static_cast<double>(ref.size());
}

}  // namespace

double wer(std::string_view reference, std::string_view hypothesis) {
  require_normalized(reference, "wer");
  require_normalized(hypothesis, "wer");
  return rate(word_tokens(reference), word_tokens(hypothesis));
}

double cer(std::string_view reference, std::string_view hypothesis) {
  require_normalized(reference, "cer");
  require_normalized(hypothesis, "cer");
  return rate(char_tokens(reference), char_tokens(hypothesis));
}

BestCandidate best_of_n(const std::vector<std::string>& candidates,
                        std::string_view reference) {
  if (candidates.empty()) {
    throw std::invalid_argument("best_of_n: empty candidate list");
  }
  BestCandidate best{0, wer(reference, candidates[0])};
  for (size_t i = 1; i < candidates.size(); ++i) {
    const double w = wer(reference, candidates[i]);
    if (w < best.wer) best = {i, w};
  }
  return best;
}

namespace {

double norm(const Embedding& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

double speaker_similarity(const Embedding& test,
                          const std::vector<Embedding>& enrollment) {
  if (enrollment.empty()) {
    throw std::invalid_argument("speaker_similarity: empty enrollment set");
  }
  const size_t dim = test.size();
  if (dim == 0) throw std::invalid_argument("speaker_similarity: empty vector");
  Embedding centroid(dim, 0.0);
  for (const auto& e : enrollment) {
    if (e.size() != dim) {
      throw std::invalid_argument("speaker_similarity: dimension mismatch");
    }
    const double n = norm(e);
    if (n == 0.0) {
      throw std::invalid_argument("speaker_similarity: zero-norm enrollment");
    }
    for (size_t i = 0; i < dim; ++i) centroid[i] += e[i] / n;
  }
  const double cn = norm(centroid);
  const double tn = norm(test);
  if (tn == 0.0 || cn == 0.0) {
    throw std::invalid_argument("speaker_similarity: zero-norm vector");
  }
  double dot = 0;
  for (size_t i = 0; i < dim; ++i) dot += test[i] * centroid[i];
  return dot / (tn * cn);
}

EvalReport evaluate(const std::vector<EvalUtterance>& utterances,
                    const SpeakerEmbeddings* embeddings) {
  EvalReport report;
  size_t total_word_edits = 0, total_words = 0;
  size_t total_char_edits = 0, total_chars = 0;
  double sim_sum = 0;
  size_t sim_count = 0;

  for (const auto& utt : utterances) {
    const std::string ref = normalize_for_scoring(utt.reference);
    if (utt.candidates.empty()) {
      throw std::invalid_argument("evaluate: utterance '" + utt.id +
                                  "' has no candidates");
    }
    std::vector<std::string> normalized;
    normalized.reserve(utt.candidates.size());
    for (const auto& c : utt.candidates) {
      normalized.push_back(normalize_for_scoring(c));
    }
    const BestCandidate best = best_of_n(normalized, ref);
    const std::string& hyp = normalized[best.index];

    UtteranceEval ue;
    ue.id = utt.id;
    ue.chosen_candidate = best.index;
    const auto rw = word_tokens(ref);
    const auto hw = word_tokens(hyp);
    const auto rc = char_tokens(ref);
    const auto hc = char_tokens(hyp);
    ue.ref_words = rw.size();
    ue.ref_chars = rc.size();
    ue.word_edits = edit_distance(rw, hw);
    ue.char_edits = edit_distance(rc, hc);
    ue.wer = rate(rw, hw);
    ue.cer = rate(rc, hc);
    if (std::isinf(ue.wer) || std::isinf(ue.cer)) {
      report.empty_reference_flag = true;
    }
    total_word_edits += ue.word_edits.total();
    total_words += rw.size();
    total_char_edits += ue.char_edits.total();
    total_chars += rc.size();

    if (embeddings != nullptr && !embeddings->enrollment.empty()) {
      for (const auto& [id, vec] : embeddings->test) {
        if (id == utt.id) {
          ue.spk_sim = speaker_similarity(vec, embeddings->enrollment);
          ue.has_spk_sim = true;
          sim_sum += ue.spk_sim;
          ++sim_count;
          break;
        }
      }
    }
    report.per_utterance.push_back(std::move(ue));
  }

  report.wer = total_words > 0 ? static_cast<double>(total_word_edits) /
                                     static_cast<double>(total_words)
             : total_word_edits > 0
                 ? std::numeric_limits<double>::infinity()
                 : 0.0;
  report.cer = total_chars > 0 ? static_cast<double>(total_char_edits) /
                                     static_cast<double>(total_chars)
             : total_char_edits > 0
                 ? std::numeric_limits<double>::infinity()
                 : 0.0;
  if (sim_count > 0) {
    report.spk_sim = sim_sum / static_cast<double>(sim_count);
    report.has_spk_sim = true;
  }
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["wer"] = wer;
  j["cer"] = cer;
  if (has_spk_sim) j["spk_sim"] = spk_sim;
  j["empty_reference_flag"] = empty_reference_flag;
  auto& rows = j["per_utterance"] = nlohmann::ordered_json::array();
  for (const auto& u : per_utterance) {
    nlohmann::ordered_json row;
    row["id"] = u.id;
    row["wer"] = u.wer;
    row["cer"] = u.cer;
    row["chosen_candidate"] = u.chosen_candidate;
    row["ref_words"] = u.ref_words;
    row["ref_chars"] = u.ref_chars;
    if (u.has_spk_sim) row["spk_sim"] = u.spk_sim;
    rows.push_back(std::move(row));
  }
  return j.dump(2);
}

std::string EvalReport::to_table() const {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << "id\twer\tcer\tchosen\n";
  for (const auto& u : per_utterance) {
    out << u.id << '\t' << u.wer << '\t' << u.cer << '\t'
        << u.chosen_candidate << '\n';
  }
  out << "----\n";
  out << "corpus\twer=" << wer << "\tcer=" << cer;
  if (has_spk_sim) out << "\tspk_sim=" << spk_sim;
  out << '\n';
  return out.str();
}

}  // namespace hebtts
