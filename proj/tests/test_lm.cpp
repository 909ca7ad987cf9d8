#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "doctest.h"
#include "hebtts/lm/ar_model.hpp"
#include "hebtts/lm/nar_model.hpp"
#include "hebtts/lm/train.hpp"

using namespace hebtts;
using namespace hebtts::lm;

namespace {

ARConfig micro_ar() {
  ARConfig cfg;
  cfg.model_dim = 8;
  cfg.n_layers = 1;
  cfg.n_heads = 2;
  cfg.ff_dim = 16;
  cfg.text_vocab = 7;
  cfg.code_vocab = 11;
  cfg.seed = 3;
  return cfg;
}

NARConfig micro_nar() {
  NARConfig cfg;
  cfg.model_dim = 8;
  cfg.n_layers = 1;
  cfg.n_heads = 2;
  cfg.ff_dim = 16;
  cfg.text_vocab = 7;
  cfg.code_vocab = 11;
  cfg.n_codebooks = 3;
  cfg.seed = 4;
  return cfg;
}

ARSequence micro_sequence(std::mt19937_64& rng, const ARConfig& cfg,
                          size_t text_len, size_t prompt_len,
                          size_t target_len) {
  ARSequence seq;
  for (size_t i = 0; i < text_len; ++i) {
    seq.text_ids.push_back(static_cast<int>(rng() % cfg.text_vocab));
  }
  for (size_t i = 0; i < prompt_len; ++i) {
    seq.prompt_codes.push_back(static_cast<uint16_t>(rng() % cfg.code_vocab));
  }
  for (size_t i = 0; i < target_len; ++i) {
    seq.target_codes.push_back(static_cast<uint16_t>(rng() % cfg.code_vocab));
  }
  return seq;
}

CodecSpec micro_codec(const NARConfig& cfg) {
  CodecSpec spec;
  spec.n_codebooks = static_cast<uint32_t>(cfg.n_codebooks);
  spec.codebook_size = static_cast<uint32_t>(cfg.code_vocab);
  spec.frame_rate = 10.0;
  return spec;
}

NARBatch micro_batch(std::mt19937_64& rng, const NARConfig& cfg,
                     int target_cb, size_t frames) {
  NARBatch batch;
  batch.text_ids = {1, 2, 3};
  batch.full_prompt = synth_codec_encode({rng(), 0.5}, micro_codec(cfg));
  batch.target_codebook = target_cb;
  for (int j = 0; j < target_cb - 1; ++j) {
    std::vector<uint16_t> cb(frames);
    for (auto& c : cb) c = static_cast<uint16_t>(rng() % cfg.code_vocab);
    batch.known.push_back(std::move(cb));
  }
  batch.target.resize(frames);
  for (auto& c : batch.target) {
    c = static_cast<uint16_t>(rng() % cfg.code_vocab);
  }
  return batch;
}

// Central finite differences over every parameter entry.
template <typename Model, typename LossFn>
void check_gradients(Model& model, LossFn&& loss_fn, double tol) {
  zero_grads(model.params());
  loss_fn(true);
  const double eps = 1e-5;
  for (const auto& p : model.params()) {
    for (Eigen::Index r = 0; r < p.value->rows(); ++r) {
      for (Eigen::Index c = 0; c < p.value->cols(); ++c) {
        const double saved = (*p.value)(r, c);
        (*p.value)(r, c) = saved + eps;
        const double up = loss_fn(false);
        (*p.value)(r, c) = saved - eps;
        const double down = loss_fn(false);
        (*p.value)(r, c) = saved;
        const double fd = (up - down) / (2 * eps);
        const double an = (*p.grad)(r, c);
        const double denom = std::max({std::abs(fd), std::abs(an), 1e-4});
        INFO(p.name << "(" << r << "," << c << "): fd=" << fd
                    << " analytic=" << an);
        CHECK(std::abs(fd - an) / denom < tol);
      }
    }
  }
}

}  // namespace

TEST_CASE("untrained AR loss is close to uniform entropy") {
  // Tiny init scale leaves logits near-flat.
  ARConfig cfg = micro_ar();
  cfg.code_vocab = 50;
  ARModel model(cfg);
  std::mt19937_64 rng(1);
  std::vector<ARSequence> batch = {micro_sequence(rng, cfg, 4, 5, 12)};
  const double loss = model.loss(batch, false);
  const double uniform = std::log(static_cast<double>(cfg.code_vocab + 1));
  CHECK(std::abs(loss - uniform) / uniform < 0.05);
}

TEST_CASE("AR loss is invariant to batch order") {
  const ARConfig cfg = micro_ar();
  ARModel model(cfg);
  std::mt19937_64 rng(2);
  std::vector<ARSequence> batch;
  for (int i = 0; i < 4; ++i) {
    batch.push_back(micro_sequence(rng, cfg, 3, 4, 6 + i));
  }
  const double a = model.loss(batch, false);
  std::reverse(batch.begin(), batch.end());
  const double b = model.loss(batch, false);
  CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("AR gradients match central finite differences") {
  const ARConfig cfg = micro_ar();
  ARModel model(cfg);
  std::mt19937_64 rng(5);
  std::vector<ARSequence> batch = {micro_sequence(rng, cfg, 2, 3, 4),
                                   micro_sequence(rng, cfg, 3, 2, 5)};
  check_gradients(
      model,
      [&](bool grads) {
        if (grads) return model.loss(batch, true);
        return model.loss(batch, false);
      },
      1e-4);
}

TEST_CASE("NAR gradients match central finite differences") {
  const NARConfig cfg = micro_nar();
  NARModel model(cfg);
  std::mt19937_64 rng(6);
  const NARBatch batch = micro_batch(rng, cfg, 3, 4);
  check_gradients(
      model,
      [&](bool grads) { return model.loss(batch, grads); },
      1e-4);
}

TEST_CASE("untrained NAR loss is close to uniform entropy") {
  NARConfig cfg = micro_nar();
  cfg.code_vocab = 40;
  NARModel model(cfg);
  std::mt19937_64 rng(7);
  NARBatch batch = micro_batch(rng, cfg, 2, 8);
  const double loss = model.loss(batch, false);
  const double uniform = std::log(static_cast<double>(cfg.code_vocab));
  CHECK(std::abs(loss - uniform) / uniform < 0.05);
}

TEST_CASE("NAR rejects malformed batches") {
  const NARConfig cfg = micro_nar();
  NARModel model(cfg);
  std::mt19937_64 rng(8);
  NARBatch batch = micro_batch(rng, cfg, 3, 4);
  batch.target_codebook = 5;  // > N_cb
  CHECK_THROWS_AS(model.loss(batch, false), std::invalid_argument);
  NARBatch bad = micro_batch(rng, cfg, 3, 4);
  bad.known.pop_back();
  CHECK_THROWS_AS(model.loss(bad, false), std::invalid_argument);
}

TEST_CASE("NAR conditioning sum is order-invariant") {
  const NARConfig cfg = micro_nar();
  NARModel model(cfg);
  std::mt19937_64 rng(9);
  const NARBatch batch = micro_batch(rng, cfg, 3, 6);
  const Mat base = model.forward(batch.text_ids, batch.full_prompt,
                                 batch.known, batch.target_codebook);
  std::vector<int> order = {1, 0};
  const Mat permuted = model.forward(batch.text_ids, batch.full_prompt,
                                     batch.known, batch.target_codebook,
                                     &order);
  CHECK((base - permuted).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("AR logits are causal w.r.t. target positions") {
  const ARConfig cfg = micro_ar();
  ARModel model(cfg);
  std::mt19937_64 rng(10);
  ARSequence seq = micro_sequence(rng, cfg, 3, 3, 8);
  const auto rows = model.build_input(seq);
  const Mat base = model.forward(rows);

  const size_t perturb_at = rows.size() - 3;
  auto rows2 = rows;
  rows2[perturb_at] = model.code_row(
      static_cast<uint16_t>((seq.target_codes.back() + 1) % cfg.code_vocab));
  const Mat changed = model.forward(rows2);
  for (size_t p = 0; p < perturb_at; ++p) {
    CHECK((base.row(static_cast<Eigen::Index>(p)) -
           changed.row(static_cast<Eigen::Index>(p)))
              .cwiseAbs()
              .maxCoeff() < 1e-12);
  }
  // And the perturbation is visible at/after the change.
  CHECK((base.bottomRows(2) - changed.bottomRows(2)).cwiseAbs().maxCoeff() >
        0.0);
}

TEST_CASE("temperature zero equals argmax decoding") {
  const ARConfig cfg = micro_ar();
  ARModel model(cfg);
  std::mt19937_64 rng(11);

  for (int trial = 0; trial < 5; ++trial) {
    const ARSequence seq = micro_sequence(rng, cfg, 3, 4, 0);
    SamplingConfig sampling;
    sampling.top_k = 5;
    sampling.temperature = 0.0;
    sampling.max_frames = 10;
    std::mt19937_64 gen_rng(100 + trial);
    const auto sampled =
        model.generate(seq.text_ids, seq.prompt_codes, sampling, gen_rng);

    // Explicit argmax loop.
    std::vector<int> rows;
    for (int t : seq.text_ids) rows.push_back(t);
    for (uint16_t c : seq.prompt_codes) rows.push_back(model.code_row(c));
    std::vector<uint16_t> expected;
    while (static_cast<int>(expected.size()) < sampling.max_frames) {
      const Mat logits = model.forward(rows);
      Eigen::Index best = 0;
      logits.row(logits.rows() - 1).maxCoeff(&best);
      if (static_cast<int>(best) == model.eos_output()) break;
      expected.push_back(static_cast<uint16_t>(best));
      rows.push_back(model.code_row(static_cast<uint16_t>(best)));
    }
    CHECK(sampled == expected);
  }
}

TEST_CASE("sampled tokens always lie in the top-k set") {
  const ARConfig cfg = micro_ar();
  ARModel model(cfg);
  std::mt19937_64 rng(12);
  const ARSequence seq = micro_sequence(rng, cfg, 2, 3, 0);
  SamplingConfig sampling;
  sampling.top_k = 3;
  sampling.temperature = 1.3;
  sampling.max_frames = 40;
  std::mt19937_64 gen_rng(13);
  std::vector<bool> in_topk;
  model.generate(seq.text_ids, seq.prompt_codes, sampling, gen_rng, &in_topk);
  CHECK(!in_topk.empty());
  for (bool ok : in_topk) CHECK(ok);
}

TEST_CASE("generation always halts at the frame cap") {
  const ARConfig cfg = micro_ar();
  ARModel model(cfg);
  std::mt19937_64 rng(14);
  const ARSequence seq = micro_sequence(rng, cfg, 2, 2, 0);
  SamplingConfig sampling;
  sampling.top_k = 50;
  sampling.temperature = 1.0;
  sampling.max_frames = 17;
  for (int trial = 0; trial < 20; ++trial) {
    std::mt19937_64 gen_rng(static_cast<uint64_t>(trial));
    const auto out =
        model.generate(seq.text_ids, seq.prompt_codes, sampling, gen_rng);
    CHECK(out.size() <= 17);
  }
}

TEST_CASE("NAR generate passes the first codebook through") {
  const NARConfig cfg = micro_nar();
  NARModel model(cfg);
  const CodecSpec spec = micro_codec(cfg);
  const auto prompt = synth_codec_encode({21, 0.5}, spec);
  std::vector<uint16_t> first_cb = {1, 5, 3, 7, 2};
  const CodeMatrix out = model.generate({0, 1}, prompt, first_cb, spec);
  CHECK(out.frames() == first_cb.size());
  CHECK(out.spec().n_codebooks == spec.n_codebooks);
  for (uint32_t t = 0; t < out.frames(); ++t) {
    CHECK(out.at(t, 0) == first_cb[t]);
    for (uint32_t j = 0; j < spec.n_codebooks; ++j) {
      CHECK(out.at(t, j) < spec.codebook_size);
    }
  }
}

TEST_CASE("NAR generate with a single-codebook spec is the identity") {
  const NARConfig cfg = micro_nar();
  NARModel model(cfg);
  CodecSpec mono = micro_codec(cfg);
  const auto prompt = synth_codec_encode({22, 0.5}, micro_codec(cfg));
  mono.n_codebooks = 1;
  const std::vector<uint16_t> first_cb = {4, 4, 9};
  const CodeMatrix out = model.generate({0}, prompt, first_cb, mono);
  CHECK(out.raw() == first_cb);
}

TEST_CASE("training is deterministic under a fixed seed") {
  auto run = [] {
    const ARConfig cfg = micro_ar();
    ARModel model(cfg);
    std::mt19937_64 rng(20);
    std::vector<ARSequence> data = {micro_sequence(rng, cfg, 3, 3, 5)};
    TrainOptions opts;
    opts.steps = 30;
    opts.peak_lr = 1e-3;
    opts.warmup_steps = 5;
    opts.log_every = 5;
    return train_ar(model, data, opts);
  };
  const TrainState a = run();
  const TrainState b = run();
  REQUIRE(a.loss_history.size() == b.loss_history.size());
  for (size_t i = 0; i < a.loss_history.size(); ++i) {
    CHECK(a.loss_history[i].first == b.loss_history[i].first);
    CHECK(a.loss_history[i].second == b.loss_history[i].second);
  }
}

TEST_CASE("loss decreases on a small synthetic set") {
  ARConfig cfg = micro_ar();
  cfg.model_dim = 16;
  cfg.ff_dim = 32;
  ARModel model(cfg);
  std::mt19937_64 rng(21);
  std::vector<ARSequence> data;
  for (int i = 0; i < 4; ++i) data.push_back(micro_sequence(rng, cfg, 3, 4, 8));
  TrainOptions opts;
  opts.steps = 300;
  opts.peak_lr = 3e-3;
  opts.warmup_steps = 20;
  opts.log_every = 50;
  const TrainState state = train_ar(model, data, opts);
  CHECK(state.loss_history.back().second < state.loss_history.front().second);
}

TEST_CASE("divergence aborts with a report") {
  const ARConfig cfg = micro_ar();
  ARModel model(cfg);
  std::mt19937_64 rng(22);
  std::vector<ARSequence> data = {micro_sequence(rng, cfg, 2, 2, 4)};
  TrainOptions opts;
  opts.steps = 2000;
  opts.peak_lr = 50.0;  // deliberately unstable
  opts.warmup_steps = 1;
  opts.divergence_patience = 20;
  CHECK_THROWS_AS(train_ar(model, data, opts), std::exception);
}

TEST_CASE("checkpoints round-trip parameters and config") {
  const ARConfig cfg = micro_ar();
  ARModel model(cfg);
  const auto path =
      (std::filesystem::temp_directory_path() / "hebtts_micro.ckpt").string();
  save_checkpoint(path, "{\"kind\":\"ar\"}", model.params());

  ARModel restored(cfg);
  const std::string config = load_checkpoint(path, restored.params());
  CHECK(config == "{\"kind\":\"ar\"}");
  CHECK(peek_checkpoint_config(path) == config);
  for (size_t i = 0; i < model.params().size(); ++i) {
    const Mat& a = *model.params()[i].value;
    const Mat& b = *restored.params()[i].value;
    // Stored as float32: equal after the same rounding.
    CHECK((a.cast<float>() - b.cast<float>()).cwiseAbs().maxCoeff() == 0.0f);
  }
}

TEST_CASE("inverse-sqrt schedule warms up then decays") {
  InverseSqrtSchedule sched(5e-2, 100);
  CHECK(sched.lr(1) == doctest::Approx(5e-4));
  CHECK(sched.lr(100) == doctest::Approx(5e-2));
  CHECK(sched.lr(400) == doctest::Approx(5e-2 * 0.5));
  CHECK(sched.lr(200) < sched.lr(100));
}
