#include "hebtts/lm/nar_model.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hebtts::lm {

NARModel::NARModel(const NARConfig& cfg) : cfg_(cfg) {
  if (cfg_.text_vocab <= 0 || cfg_.code_vocab <= 0 || cfg_.n_codebooks < 2) {
    throw std::invalid_argument("NARModel: invalid vocab/codebook config");
  }
  std::mt19937_64 rng(cfg_.seed);
  text_emb_.resize(cfg_.text_vocab, cfg_.model_dim);
  init_normal(text_emb_, rng, 0.02);
  dtext_emb_ = Mat::Zero(cfg_.text_vocab, cfg_.model_dim);
  code_emb_.resize(static_cast<size_t>(cfg_.n_codebooks));
  dcode_emb_.resize(static_cast<size_t>(cfg_.n_codebooks));
  for (int j = 0; j < cfg_.n_codebooks; ++j) {
    code_emb_[static_cast<size_t>(j)].resize(cfg_.code_vocab, cfg_.model_dim);
    init_normal(code_emb_[static_cast<size_t>(j)], rng, 0.02);
    dcode_emb_[static_cast<size_t>(j)] =
        Mat::Zero(cfg_.code_vocab, cfg_.model_dim);
  }
  index_emb_.resize(cfg_.n_codebooks - 1, cfg_.model_dim);
  init_normal(index_emb_, rng, 0.02);
  dindex_emb_ = Mat::Zero(cfg_.n_codebooks - 1, cfg_.model_dim);
  body_.init(cfg_.model_dim, cfg_.n_layers, cfg_.n_heads, cfg_.ff_dim,
             /*causal=*/false, rng);
  head_.init(cfg_.model_dim, cfg_.code_vocab, rng);

  params_.push_back({"nar.text_emb", &text_emb_, &dtext_emb_});
  for (int j = 0; j < cfg_.n_codebooks; ++j) {
    params_.push_back({"nar.code_emb" + std::to_string(j),
                       &code_emb_[static_cast<size_t>(j)],
                       &dcode_emb_[static_cast<size_t>(j)]});
  }
  params_.push_back({"nar.index_emb", &index_emb_, &dindex_emb_});
  body_.collect("nar.body", params_);
  head_.collect("nar.head", params_);
}

Mat NARModel::build_embeddings(const std::vector<int>& text_ids,
                               const CodeMatrix& prompt,
                               const std::vector<std::vector<uint16_t>>& known,
                               int target_codebook,
                               const std::vector<int>* sum_order) const {
  if (target_codebook < 2 || target_codebook > cfg_.n_codebooks) {
    throw std::invalid_argument("NARModel: target codebook out of [2, N_cb]");
  }
  const int n_known = target_codebook - 1;
  if (static_cast<int>(known.size()) != n_known) {
    throw std::invalid_argument(
        "NARModel: known codebooks must be exactly 1..i-1");
  }
  const size_t frames = known.empty() ? 0 : known[0].size();
  for (const auto& cb : known) {
    if (cb.size() != frames) {
      throw std::invalid_argument("NARModel: known codebook length mismatch");
    }
  }
  std::vector<int> order(static_cast<size_t>(n_known));
  std::iota(order.begin(), order.end(), 0);
  if (sum_order != nullptr) {
    if (sum_order->size() != order.size()) {
      throw std::invalid_argument("NARModel: bad summation order");
    }
    order = *sum_order;
  }

  const size_t text_len = text_ids.size();
  const size_t prompt_len = prompt.frames();
  const auto len = static_cast<int>(text_len + prompt_len + frames);
  Mat x(len, cfg_.model_dim);
  for (size_t p = 0; p < text_len; ++p) {
    const int id = text_ids[p];
    if (id < 0 || id >= cfg_.text_vocab) {
      throw std::out_of_range("NARModel: text id out of range");
    }
    x.row(static_cast<Eigen::Index>(p)) = text_emb_.row(id);
  }
  // Prompt frames carry the sum over all N_cb codebooks.
  const int prompt_cbs =
      std::min<int>(cfg_.n_codebooks, static_cast<int>(prompt.spec().n_codebooks));
  for (size_t t = 0; t < prompt_len; ++t) {
    Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(cfg_.model_dim);
    for (int j = 0; j < prompt_cbs; ++j) {
      sum += code_emb_[static_cast<size_t>(j)].row(
          prompt.at(static_cast<uint32_t>(t), static_cast<uint32_t>(j)));
    }
    x.row(static_cast<Eigen::Index>(text_len + t)) = sum;
  }
  for (size_t t = 0; t < frames; ++t) {
    Eigen::RowVectorXd sum = index_emb_.row(target_codebook - 2);
    for (int j : order) {
      sum += code_emb_[static_cast<size_t>(j)].row(
          known[static_cast<size_t>(j)][t]);
    }
    x.row(static_cast<Eigen::Index>(text_len + prompt_len + t)) = sum;
  }
  x += sinusoidal_positions(len, cfg_.model_dim);
  return x;
}

Mat NARModel::forward(const std::vector<int>& text_ids,
                      const CodeMatrix& prompt,
                      const std::vector<std::vector<uint16_t>>& known,
                      int target_codebook,
                      const std::vector<int>* sum_order) const {
  const Mat x = build_embeddings(text_ids, prompt, known, target_codebook,
                                 sum_order);
  Transformer::Cache bodyc;
  Linear::Cache headc;
  const Mat all = head_.forward(body_.forward(x, bodyc), headc);
  const auto frames = static_cast<Eigen::Index>(known[0].size());
  return all.bottomRows(frames);
}

double NARModel::loss(const NARBatch& batch, bool accumulate_grads) {
  const size_t frames = batch.target.size();
  if (frames == 0 || batch.known.empty() || batch.known[0].size() != frames) {
    throw std::invalid_argument("nar_loss: shape mismatch");
  }
  const Mat x = build_embeddings(batch.text_ids, batch.full_prompt,
                                 batch.known, batch.target_codebook, nullptr);
  Transformer::Cache bodyc;
  Linear::Cache headc;
  const Mat logits = head_.forward(body_.forward(x, bodyc), headc);

  const auto target_start =
      static_cast<int>(x.rows() - static_cast<Eigen::Index>(frames));
  std::vector<int> target_rows(frames), target_ids(frames);
  for (size_t t = 0; t < frames; ++t) {
    target_rows[t] = target_start + static_cast<int>(t);
    target_ids[t] = batch.target[t];
  }
  Mat dlogits;
  const double loss = cross_entropy(logits, target_rows, target_ids,
                                    accumulate_grads ? &dlogits : nullptr);
  if (!std::isfinite(loss)) {
    throw std::runtime_error("nar_loss: non-finite loss (training fault)");
  }
  if (accumulate_grads) {
    const Mat dx = body_.backward(head_.backward(dlogits, headc), bodyc);
    const size_t text_len = batch.text_ids.size();
    const size_t prompt_len = batch.full_prompt.frames();
    for (size_t p = 0; p < text_len; ++p) {
      dtext_emb_.row(batch.text_ids[p]) += dx.row(static_cast<Eigen::Index>(p));
    }
    const int prompt_cbs = std::min<int>(
        cfg_.n_codebooks, static_cast<int>(batch.full_prompt.spec().n_codebooks));
    for (size_t t = 0; t < prompt_len; ++t) {
      const auto row = dx.row(static_cast<Eigen::Index>(text_len + t));
      for (int j = 0; j < prompt_cbs; ++j) {
        dcode_emb_[static_cast<size_t>(j)].row(batch.full_prompt.at(
            static_cast<uint32_t>(t), static_cast<uint32_t>(j))) += row;
      }
    }
    for (size_t t = 0; t < frames; ++t) {
      const auto row =
          dx.row(static_cast<Eigen::Index>(text_len + prompt_len + t));
      dindex_emb_.row(batch.target_codebook - 2) += row;
      for (size_t j = 0; j < batch.known.size(); ++j) {
        dcode_emb_[j].row(batch.known[j][t]) += row;
      }
    }
  }
  return loss;
}

CodeMatrix NARModel::generate(const std::vector<int>& text_ids,
                              const CodeMatrix& prompt,
                              const std::vector<uint16_t>& first_cb,
                              const CodecSpec& spec) const {
  if (first_cb.empty()) {
    throw std::invalid_argument("nar_generate: empty first codebook");
  }
  std::vector<std::vector<uint16_t>> columns;
  columns.push_back(first_cb);
  for (int i = 2; i <= static_cast<int>(spec.n_codebooks); ++i) {
    const Mat logits = forward(text_ids, prompt, columns, i);
    std::vector<uint16_t> col(first_cb.size());
    for (size_t t = 0; t < first_cb.size(); ++t) {
      Eigen::Index best = 0;
      logits.row(static_cast<Eigen::Index>(t)).maxCoeff(&best);
      col[t] = static_cast<uint16_t>(best);
    }
    columns.push_back(std::move(col));
  }
  std::vector<uint16_t> codes(first_cb.size() * spec.n_codebooks);
  for (size_t t = 0; t < first_cb.size(); ++t) {
    for (size_t j = 0; j < spec.n_codebooks; ++j) {
      codes[t * spec.n_codebooks + j] = columns[j][t];
    }
  }
  return CodeMatrix(std::move(codes), spec);
}

}  // namespace hebtts::lm
