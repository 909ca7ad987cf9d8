#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace hebtts {

struct EditCounts {
  size_t substitutions = 0;
  size_t insertions = 0;
  size_t deletions = 0;
  size_t total() const { return substitutions + insertions + deletions; }
};

// Minimal-cost Levenshtein alignment with unit costs; on ties a substitution
// is preferred over an insertion+deletion pair.
EditCounts edit_distance(const std::vector<std::string>& ref,
                         const std::vector<std::string>& hyp);

std::vector<std::string> word_tokens(std::string_view normalized);
std::vector<std::string> char_tokens(std::string_view normalized);  // spaces count

// Both sides must already satisfy the normalized-text invariants
// (no punctuation, no diacritics, collapsed whitespace); raw input is
// rejected rather than silently re-normalized.
double wer(std::string_view reference, std::string_view hypothesis);
double cer(std::string_view reference, std::string_view hypothesis);

// Index of the candidate with minimal WER; ties go to the lowest index.
struct BestCandidate {
  size_t index = 0;
  double wer = 0.0;
};
BestCandidate best_of_n(const std::vector<std::string>& candidates,
                        std::string_view reference);

using Embedding = std::vector<double>;

// Cosine similarity between `test` and the L2-normalized mean of the
// L2-normalized enrollment vectors.
double speaker_similarity(const Embedding& test,
                          const std::vector<Embedding>& enrollment);

struct UtteranceEval {
  std::string id;
  double wer = 0.0;
  double cer = 0.0;
  size_t chosen_candidate = 0;
  size_t ref_words = 0;
  size_t ref_chars = 0;
  EditCounts word_edits;
  EditCounts char_edits;
  double spk_sim = 0.0;
  bool has_spk_sim = false;
};

struct EvalReport {
  double wer = 0.0;   // micro-averaged: total edits / total reference units
  double cer = 0.0;
  double spk_sim = 0.0;  // mean over utterances carrying embeddings
  bool has_spk_sim = false;
  bool empty_reference_flag = false;  // some pair hit the empty-ref sentinel
  std::vector<UtteranceEval> per_utterance;

  std::string to_json() const;
  std::string to_table() const;
};

struct EvalUtterance {
  std::string id;
  std::string reference;                   // raw; normalized internally
  std::vector<std::string> candidates;     // >= 1
};

// Per-utterance embeddings keyed by id; the enrollment set is shared.
struct SpeakerEmbeddings {
  std::vector<std::pair<std::string, Embedding>> test;
  std::vector<Embedding> enrollment;
};

EvalReport evaluate(const std::vector<EvalUtterance>& utterances,
                    const SpeakerEmbeddings* embeddings = nullptr);

}  // namespace hebtts
