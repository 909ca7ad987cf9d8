#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "hebtts/codec.hpp"
#include "hebtts/lm/nn.hpp"

namespace hebtts::lm {

struct NARConfig {
  int model_dim = 128;
  int n_layers = 4;
  int n_heads = 4;
  int ff_dim = 512;
  int text_vocab = 0;
  int code_vocab = 0;    // K, shared by all codebooks
  int n_codebooks = 8;   // N_cb
  int max_seq_frames = 2048;
  uint64_t seed = 0;
};

// One training batch: predict codebook `target_codebook` (2-based index in
// [2, N_cb]) at every frame, conditioned on the text, the full acoustic
// prompt, and the summed embeddings of codebooks 1..target_codebook-1.
struct NARBatch {
  std::vector<int> text_ids;
  CodeMatrix full_prompt;                       // all N_cb codebooks
  std::vector<std::vector<uint16_t>> known;     // [codebook][frame], 1..i-1
  int target_codebook = 2;
  std::vector<uint16_t> target;                 // codebook i, length T
};

// Non-causal transformer; one parameter set serves all codebook indices via
// a learned per-index embedding added to the conditioning sum.
class NARModel {
 public:
  explicit NARModel(const NARConfig& cfg);

  const NARConfig& config() const { return cfg_; }

  // Logits (T x K) at the target-frame positions. `sum_order` optionally
  // permutes the order in which previous-codebook embeddings are added;
  // the result is the same sum either way.
  Mat forward(const std::vector<int>& text_ids, const CodeMatrix& prompt,
              const std::vector<std::vector<uint16_t>>& known,
              int target_codebook,
              const std::vector<int>* sum_order = nullptr) const;

  double loss(const NARBatch& batch, bool accumulate_grads);

  // Fills codebooks 2..N_cb by argmax, one pass per codebook; column 1 of
  // the result is `first_cb` verbatim.
  CodeMatrix generate(const std::vector<int>& text_ids,
                      const CodeMatrix& prompt,
                      const std::vector<uint16_t>& first_cb,
                      const CodecSpec& spec) const;

  std::vector<ParamRef>& params() { return params_; }
  const std::vector<ParamRef>& params() const { return params_; }

 private:
  Mat build_embeddings(const std::vector<int>& text_ids,
                       const CodeMatrix& prompt,
                       const std::vector<std::vector<uint16_t>>& known,
                       int target_codebook,
                       const std::vector<int>* sum_order) const;

  NARConfig cfg_;
  Mat text_emb_, dtext_emb_;
  std::vector<Mat> code_emb_, dcode_emb_;  // one K x dim table per codebook
  Mat index_emb_, dindex_emb_;             // (N_cb - 1) x dim
  Transformer body_;
  Linear head_;
  std::vector<ParamRef> params_;
};

}  // namespace hebtts::lm
