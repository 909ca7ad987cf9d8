#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "hebtts/lm/nn.hpp"

namespace hebtts::lm {

struct ARConfig {
  int model_dim = 128;
  int n_layers = 4;
  int n_heads = 4;
  int ff_dim = 512;
  int text_vocab = 0;   // token ids from the text tokenizer
  int code_vocab = 0;   // K, first-codebook code ids
  int max_seq_frames = 2048;
  uint64_t seed = 0;
};

// One teacher-forcing example: text, acoustic-prompt first-codebook stream,
// and the target first-codebook stream. EOS is appended as a target only.
struct ARSequence {
  std::vector<int> text_ids;
  std::vector<uint16_t> prompt_codes;
  std::vector<uint16_t> target_codes;
};

struct SamplingConfig {
  int top_k = 50;
  double temperature = 1.0;
  int max_frames = 0;  // hard generation cap, > 0
};

// Decoder-only causal transformer over one joint embedding table:
// rows [0, text_vocab) are text ids, [text_vocab, text_vocab+K) are codes,
// and the last row is EOS. The output head covers codes plus EOS.
class ARModel {
 public:
  explicit ARModel(const ARConfig& cfg);

  const ARConfig& config() const { return cfg_; }
  int eos_output() const { return cfg_.code_vocab; }

  // Logits (L x (K+1)) for every position of the joint input sequence.
  Mat forward(const std::vector<int>& input_rows) const;

  // Mean next-token cross-entropy over target positions of the batch, in
  // nats/token. accumulate_grads adds into the registered gradients.
  double loss(const std::vector<ARSequence>& batch, bool accumulate_grads);

  // Top-k / temperature sampling until EOS or the frame cap. Returns
  // generated first-codebook codes, prompt and EOS excluded. When
  // `sampled_topk_ok` is given, each emitted step also records whether the
  // sample fell inside that step's top-k logit set.
  std::vector<uint16_t> generate(const std::vector<int>& text_ids,
                                 const std::vector<uint16_t>& prompt_codes,
                                 const SamplingConfig& sampling,
                                 std::mt19937_64& rng,
                                 std::vector<bool>* sampled_topk_ok = nullptr) const;

  std::vector<ParamRef>& params() { return params_; }
  const std::vector<ParamRef>& params() const { return params_; }

  // Joint-table row indices used by the loss/generation plumbing.
  std::vector<int> build_input(const ARSequence& seq) const;
  int code_row(uint16_t code) const { return cfg_.text_vocab + code; }

 private:
  Mat embed(const std::vector<int>& input_rows) const;

  ARConfig cfg_;
  Mat embedding_, dembedding_;  // (text_vocab + K + 1) x dim
  Transformer body_;
  Linear head_;
  std::vector<ParamRef> params_;
};

// Sampling helper shared by AR generation and its tests: index sampled from
// the top-k, temperature-scaled distribution of one logit row; temperature 0
// degenerates to argmax (lowest index on ties).
int sample_top_k(const Eigen::RowVectorXd& logits, int top_k,
                 double temperature, std::mt19937_64& rng);

std::vector<int> top_k_set(const Eigen::RowVectorXd& logits, int top_k);

}  // namespace hebtts::lm
