#include "hebtts/lm/ar_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hebtts::lm {

ARModel::ARModel(const ARConfig& cfg) : cfg_(cfg) {
  if (cfg_.text_vocab <= 0 || cfg_.code_vocab <= 0) {
    throw std::invalid_argument("ARModel: vocab sizes must be positive");
  }
  if (cfg_.model_dim % cfg_.n_heads != 0) {
    throw std::invalid_argument("ARModel: model_dim not divisible by n_heads");
  }
  std::mt19937_64 rng(cfg_.seed);
  const int v_in = cfg_.text_vocab + cfg_.code_vocab + 1;  // + EOS
  embedding_.resize(v_in, cfg_.model_dim);
  init_normal(embedding_, rng, 0.02);
  dembedding_ = Mat::Zero(v_in, cfg_.model_dim);
  body_.init(cfg_.model_dim, cfg_.n_layers, cfg_.n_heads, cfg_.ff_dim,
             /*causal=*/true, rng);
  head_.init(cfg_.model_dim, cfg_.code_vocab + 1, rng);

  params_.push_back({"ar.embedding", &embedding_, &dembedding_});
  body_.collect("ar.body", params_);
  head_.collect("ar.head", params_);
}

Mat ARModel::embed(const std::vector<int>& input_rows) const {
  const int len = static_cast<int>(input_rows.size());
  Mat x(len, cfg_.model_dim);
  for (int p = 0; p < len; ++p) {
    const int row = input_rows[static_cast<size_t>(p)];
    if (row < 0 || row >= embedding_.rows()) {
      throw std::out_of_range("ARModel: embedding row out of range");
    }
    x.row(p) = embedding_.row(row);
  }
  x += sinusoidal_positions(len, cfg_.model_dim);
  return x;
}

Mat ARModel::forward(const std::vector<int>& input_rows) const {
  Transformer::Cache bodyc;
  Linear::Cache headc;
  return head_.forward(body_.forward(embed(input_rows), bodyc), headc);
}

std::vector<int> ARModel::build_input(const ARSequence& seq) const {
  std::vector<int> rows;
  rows.reserve(seq.text_ids.size() + seq.prompt_codes.size() +
               seq.target_codes.size());
  for (int t : seq.text_ids) {
    if (t < 0 || t >= cfg_.text_vocab) {
      throw std::out_of_range("ARModel: text id out of range");
    }
    rows.push_back(t);
  }
  for (uint16_t c : seq.prompt_codes) rows.push_back(code_row(c));
  for (uint16_t c : seq.target_codes) rows.push_back(code_row(c));
  return rows;
}

double ARModel::loss(const std::vector<ARSequence>& batch,
                     bool accumulate_grads) {
  if (batch.empty()) throw std::invalid_argument("ar_loss: empty batch");
  size_t total_targets = 0;
  for (const auto& seq : batch) {
    if (seq.target_codes.empty()) {
      throw std::invalid_argument("ar_loss: sequence with no target codes");
    }
    total_targets += seq.target_codes.size() + 1;  // + EOS
  }

  double weighted = 0.0;
  for (const auto& seq : batch) {
    const auto rows = build_input(seq);
    const int len = static_cast<int>(rows.size());
    if (len > cfg_.max_seq_frames) {
      throw std::invalid_argument("ar_loss: sequence exceeds max_seq_frames");
    }
    const int context = static_cast<int>(seq.text_ids.size() +
                                         seq.prompt_codes.size());
    if (context < 1) {
      throw std::invalid_argument("ar_loss: empty conditioning context");
    }
    // Position p predicts token p+1; the final position predicts EOS.
    std::vector<int> target_rows, target_ids;
    for (size_t t = 0; t < seq.target_codes.size(); ++t) {
      target_rows.push_back(context - 1 + static_cast<int>(t));
      target_ids.push_back(seq.target_codes[t]);
    }
    target_rows.push_back(len - 1);
    target_ids.push_back(eos_output());

    Transformer::Cache bodyc;
    Linear::Cache headc;
    const Mat logits =
        head_.forward(body_.forward(embed(rows), bodyc), headc);
    Mat dlogits;
    const double seq_loss = cross_entropy(
        logits, target_rows, target_ids, accumulate_grads ? &dlogits : nullptr);
    const double n_seq = static_cast<double>(target_rows.size());
    weighted += seq_loss * n_seq;

    if (accumulate_grads) {
      dlogits *= n_seq / static_cast<double>(total_targets);
      Mat dx = body_.backward(head_.backward(dlogits, headc), bodyc);
      for (int p = 0; p < len; ++p) {
        dembedding_.row(rows[static_cast<size_t>(p)]) += dx.row(p);
      }
    }
  }
  const double loss = weighted / static_cast<double>(total_targets);
  if (!std::isfinite(loss)) {
    throw std::runtime_error("ar_loss: non-finite loss (training fault)");
  }
  return loss;
}

std::vector<int> top_k_set(const Eigen::RowVectorXd& logits, int top_k) {
  std::vector<int> idx(static_cast<size_t>(logits.size()));
  std::iota(idx.begin(), idx.end(), 0);
  const int k = std::min<int>(top_k, static_cast<int>(logits.size()));
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return logits(a) > logits(b);
  });
  idx.resize(static_cast<size_t>(k));
  return idx;
}

int sample_top_k(const Eigen::RowVectorXd& logits, int top_k,
                 double temperature, std::mt19937_64& rng) {
  if (temperature <= 0.0) {
    int best = 0;
    for (int i = 1; i < logits.size(); ++i) {
      if (logits(i) > logits(best)) best = i;
    }
    return best;
  }
  const auto idx = top_k_set(logits, top_k);
  std::vector<double> probs(idx.size());
  const double mx = logits(idx[0]);
  double z = 0.0;
  for (size_t i = 0; i < idx.size(); ++i) {
    probs[i] = std::exp((logits(idx[i]) - mx) / temperature);
    z += probs[i];
  }
  const double u = uniform01(rng) * z;
  double acc = 0.0;
  for (size_t i = 0; i < idx.size(); ++i) {
    acc += probs[i];
    if (u < acc) return idx[i];
  }
  return idx.back();
}

std::vector<uint16_t> ARModel::generate(
    const std::vector<int>& text_ids, const std::vector<uint16_t>& prompt_codes,
    const SamplingConfig& sampling, std::mt19937_64& rng,
    std::vector<bool>* sampled_topk_ok) const {
  if (text_ids.empty()) {
    throw std::invalid_argument("ar_generate: empty text");
  }
  if (sampling.max_frames <= 0) {
    throw std::invalid_argument("ar_generate: max_frames must be positive");
  }
  std::vector<int> rows;
  for (int t : text_ids) rows.push_back(t);
  for (uint16_t c : prompt_codes) rows.push_back(code_row(c));

  std::vector<uint16_t> out;
  while (static_cast<int>(out.size()) < sampling.max_frames) {
    const Mat logits = forward(rows);
    const Eigen::RowVectorXd last = logits.row(logits.rows() - 1);
    const int id = sample_top_k(last, sampling.top_k, sampling.temperature, rng);
    if (sampled_topk_ok != nullptr) {
      const auto topk = top_k_set(last, sampling.top_k);
      sampled_topk_ok->push_back(
          std::find(topk.begin(), topk.end(), id) != topk.end());
    }
    if (id == eos_output()) break;
    out.push_back(static_cast<uint16_t>(id));
    rows.push_back(code_row(static_cast<uint16_t>(id)));
  }
  return out;
}

}  // namespace hebtts::lm
