// Single entry-point binary for the desk-scale Hebrew TTS toolkit.
//
// Subcommands: normalize, tokenizer (train/encode), codec synth,
// lm (train-ar/train-nar/generate), pipeline run, eval (wer/report),
// ablate-tokenizer, demo. stdout carries data, stderr carries diagnostics
// and the resolved configuration; every error exits nonzero.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "hebtts/codec.hpp"
#include "hebtts/eval.hpp"
#include "hebtts/lm/ar_model.hpp"
#include "hebtts/lm/nar_model.hpp"
#include "hebtts/lm/train.hpp"
#include "hebtts/pipeline.hpp"
#include "hebtts/text_norm.hpp"
#include "hebtts/tokenizer.hpp"

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr const char* kVersion = "0.1.0";

uint64_t fnv1a64(const std::string& data) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

// Config file: a JSON object, or flat `key = value` lines (# comments).
json load_config_file(const std::string& path) {
  const std::string text = read_file(path);
  const size_t first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    return json::parse(text);
  }
  json cfg = json::object();
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const size_t b = s.find_first_not_of(" \t\r\"");
      const size_t e = s.find_last_not_of(" \t\r\"");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) continue;
    try {
      cfg[key] = json::parse(value);
    } catch (const json::exception&) {
      cfg[key] = value;  // bare string
    }
  }
  return cfg;
}

// Precedence: CLI flag > config file > built-in default.
template <typename T>
void apply_config(const json& cfg, const CLI::Option* opt,
                  const std::string& key, T& var) {
  if (opt != nullptr && opt->count() > 0) return;
  if (cfg.contains(key)) var = cfg.at(key).get<T>();
}

void echo_config(const ordered_json& resolved) {
  std::cerr << "resolved config: " << resolved.dump() << "\n";
}

// ---------------------------------------------------------------------------
// Shared LM plumbing: synthetic (text, codes) pairs derived from a corpus.

struct LmOptions {
  std::string corpus;
  std::string vocab_dir;
  std::string out;
  std::string config_file;
  int steps = 200;
  int dim = 64;
  int layers = 2;
  int heads = 4;
  int ff = 128;
  int codebook_size = 64;
  int codebooks = 4;
  double frame_rate = 12.5;
  double peak_lr = 5e-2;
  int warmup = 100;
  uint64_t seed = 0;
};

constexpr uint32_t kPromptFrames = 4;

hebtts::CodecSpec lm_codec_spec(const LmOptions& o) {
  hebtts::CodecSpec spec;
  spec.n_codebooks = static_cast<uint32_t>(o.codebooks);
  spec.codebook_size = static_cast<uint32_t>(o.codebook_size);
  spec.frame_rate = o.frame_rate;
  return spec;
}

// Deterministic stand-in utterance for corpus line `index`: frame count
// grows with the token count, codes come from the synthetic codec.
hebtts::CodeMatrix line_codes(const LmOptions& o, size_t index,
                              size_t n_tokens) {
  const uint32_t frames =
      kPromptFrames + 2 * static_cast<uint32_t>(n_tokens);
  const double duration = (frames + 0.5) / o.frame_rate;
  return hebtts::synth_codec_encode(
      {o.seed * 1000003ull + index, duration}, lm_codec_spec(o));
}

struct LmCorpus {
  hebtts::Vocabulary vocab;
  std::vector<std::vector<int>> text_ids;   // per surviving line
  std::vector<hebtts::CodeMatrix> codes;    // matching code matrices
};

LmCorpus load_lm_corpus(const LmOptions& o) {
  LmCorpus data;
  data.vocab = hebtts::Vocabulary::load(o.vocab_dir);
  size_t index = 0;
  for (const auto& line : read_lines(o.corpus)) {
    const std::string norm = hebtts::normalize_for_scoring(line);
    if (norm.empty()) continue;
    auto ids = hebtts::encode_wordpiece(norm, data.vocab).ids;
    if (ids.empty()) continue;
    data.codes.push_back(line_codes(o, index++, ids.size()));
    data.text_ids.push_back(std::move(ids));
  }
  if (data.text_ids.empty()) {
    throw std::runtime_error("corpus produced no trainable lines: " +
                             o.corpus);
  }
  return data;
}

ordered_json lm_config_json(const char* kind, const LmOptions& o,
                            size_t text_vocab, const std::string& vocab_hash) {
  ordered_json cfg;
  cfg["kind"] = kind;
  cfg["model_dim"] = o.dim;
  cfg["n_layers"] = o.layers;
  cfg["n_heads"] = o.heads;
  cfg["ff_dim"] = o.ff;
  cfg["text_vocab"] = text_vocab;
  cfg["code_vocab"] = o.codebook_size;
  cfg["n_codebooks"] = o.codebooks;
  cfg["frame_rate"] = o.frame_rate;
  cfg["seed"] = o.seed;
  cfg["vocab_hash"] = vocab_hash;
  return cfg;
}

void add_lm_train_options(CLI::App* cmd, LmOptions& o,
                          std::map<std::string, CLI::Option*>& opts) {
  opts["corpus"] = cmd->add_option("--corpus", o.corpus, "text corpus, one utterance per line")->required();
  opts["vocab"] = cmd->add_option("--vocab", o.vocab_dir, "tokenizer vocabulary directory")->required();
  opts["out"] = cmd->add_option("--out", o.out, "checkpoint output path")->required();
  cmd->add_option("--config", o.config_file, "config file (json or key=value)");
  opts["steps"] = cmd->add_option("--steps", o.steps, "optimizer steps");
  opts["dim"] = cmd->add_option("--dim", o.dim, "model width");
  opts["layers"] = cmd->add_option("--layers", o.layers, "transformer layers");
  opts["heads"] = cmd->add_option("--heads", o.heads, "attention heads");
  opts["ff"] = cmd->add_option("--ff", o.ff, "feed-forward width");
  opts["codebook_size"] = cmd->add_option("--codebook-size", o.codebook_size, "codes per codebook");
  opts["codebooks"] = cmd->add_option("--codebooks", o.codebooks, "number of codebooks");
  opts["frame_rate"] = cmd->add_option("--frame-rate", o.frame_rate, "code frames per second");
  opts["peak_lr"] = cmd->add_option("--peak-lr", o.peak_lr, "schedule peak learning rate");
  opts["warmup"] = cmd->add_option("--warmup", o.warmup, "warmup steps");
  opts["seed"] = cmd->add_option("--seed", o.seed, "random seed");
}

void apply_lm_config(LmOptions& o, std::map<std::string, CLI::Option*>& opts) {
  if (o.config_file.empty()) return;
  const json cfg = load_config_file(o.config_file);
  apply_config(cfg, opts["steps"], "steps", o.steps);
  apply_config(cfg, opts["dim"], "dim", o.dim);
  apply_config(cfg, opts["layers"], "layers", o.layers);
  apply_config(cfg, opts["heads"], "heads", o.heads);
  apply_config(cfg, opts["ff"], "ff", o.ff);
  apply_config(cfg, opts["codebook_size"], "codebook_size", o.codebook_size);
  apply_config(cfg, opts["codebooks"], "codebooks", o.codebooks);
  apply_config(cfg, opts["frame_rate"], "frame_rate", o.frame_rate);
  apply_config(cfg, opts["peak_lr"], "peak_lr", o.peak_lr);
  apply_config(cfg, opts["warmup"], "warmup", o.warmup);
  apply_config(cfg, opts["seed"], "seed", o.seed);
}

int run_train_ar(LmOptions& o, std::map<std::string, CLI::Option*>& opts) {
  apply_lm_config(o, opts);
  const LmCorpus data = load_lm_corpus(o);
  const std::string vocab_hash =
      hex64(fnv1a64(read_file(std::filesystem::path(o.vocab_dir) / "vocab.txt")));
  const ordered_json cfg_json =
      lm_config_json("ar", o, data.vocab.size(), vocab_hash);
  echo_config(cfg_json);

  hebtts::lm::ARConfig cfg;
  cfg.model_dim = o.dim;
  cfg.n_layers = o.layers;
  cfg.n_heads = o.heads;
  cfg.ff_dim = o.ff;
  cfg.text_vocab = static_cast<int>(data.vocab.size());
  cfg.code_vocab = o.codebook_size;
  cfg.seed = o.seed;
  hebtts::lm::ARModel model(cfg);

  std::vector<hebtts::lm::ARSequence> dataset;
  for (size_t i = 0; i < data.text_ids.size(); ++i) {
    hebtts::lm::ARSequence seq;
    seq.text_ids = data.text_ids[i];
    const auto stream = hebtts::first_codebook(data.codes[i]);
    seq.prompt_codes.assign(stream.begin(), stream.begin() + kPromptFrames);
    seq.target_codes.assign(stream.begin() + kPromptFrames, stream.end());
    dataset.push_back(std::move(seq));
  }

  hebtts::lm::TrainOptions topts;
  topts.steps = o.steps;
  topts.peak_lr = o.peak_lr;
  topts.warmup_steps = o.warmup;
  const auto state = hebtts::lm::train_ar(model, dataset, topts);
  std::cerr << "final loss: "
            << (state.loss_history.empty() ? 0.0
                                           : state.loss_history.back().second)
            << " nats/token after " << state.step << " steps\n";
  hebtts::lm::save_checkpoint(o.out, cfg_json.dump(), model.params());
  std::cout << o.out << "\n";
  return 0;
}

int run_train_nar(LmOptions& o, std::map<std::string, CLI::Option*>& opts) {
  apply_lm_config(o, opts);
  if (o.codebooks < 2) throw std::runtime_error("--codebooks must be >= 2");
  const LmCorpus data = load_lm_corpus(o);
  const std::string vocab_hash =
      hex64(fnv1a64(read_file(std::filesystem::path(o.vocab_dir) / "vocab.txt")));
  const ordered_json cfg_json =
      lm_config_json("nar", o, data.vocab.size(), vocab_hash);
  echo_config(cfg_json);

  hebtts::lm::NARConfig cfg;
  cfg.model_dim = o.dim;
  cfg.n_layers = o.layers;
  cfg.n_heads = o.heads;
  cfg.ff_dim = o.ff;
  cfg.text_vocab = static_cast<int>(data.vocab.size());
  cfg.code_vocab = o.codebook_size;
  cfg.n_codebooks = o.codebooks;
  cfg.seed = o.seed;
  hebtts::lm::NARModel model(cfg);

  std::vector<hebtts::lm::NARBatch> dataset;
  for (size_t i = 0; i < data.text_ids.size(); ++i) {
    const hebtts::CodeMatrix& m = data.codes[i];
    hebtts::lm::NARBatch batch;
    batch.text_ids = data.text_ids[i];
    batch.full_prompt =
        hebtts::extract_prompt(m, (kPromptFrames + 0.5) / o.frame_rate).codes;
    batch.target_codebook = 2 + static_cast<int>(i % (o.codebooks - 1));
    const uint32_t frames = m.frames() - kPromptFrames;
    for (int j = 0; j < batch.target_codebook - 1; ++j) {
      std::vector<uint16_t> cb(frames);
      for (uint32_t f = 0; f < frames; ++f) {
        cb[f] = m.at(kPromptFrames + f, static_cast<uint32_t>(j));
      }
      batch.known.push_back(std::move(cb));
    }
    batch.target.resize(frames);
    for (uint32_t f = 0; f < frames; ++f) {
      batch.target[f] = m.at(
          kPromptFrames + f, static_cast<uint32_t>(batch.target_codebook - 1));
    }
    dataset.push_back(std::move(batch));
  }

  hebtts::lm::TrainOptions topts;
  topts.steps = o.steps;
  topts.peak_lr = o.peak_lr;
  topts.warmup_steps = o.warmup;
  const auto state = hebtts::lm::train_nar(model, dataset, topts);
  std::cerr << "final loss: "
            << (state.loss_history.empty() ? 0.0
                                           : state.loss_history.back().second)
            << " nats/token after " << state.step << " steps\n";
  hebtts::lm::save_checkpoint(o.out, cfg_json.dump(), model.params());
  std::cout << o.out << "\n";
  return 0;
}

hebtts::lm::ARModel load_ar_model(const std::string& path, json* cfg_out) {
  const json cfg = json::parse(hebtts::lm::peek_checkpoint_config(path));
  if (cfg.value("kind", "") != "ar") {
    throw std::runtime_error(path + " is not an AR checkpoint");
  }
  hebtts::lm::ARConfig c;
  c.model_dim = cfg.at("model_dim");
  c.n_layers = cfg.at("n_layers");
  c.n_heads = cfg.at("n_heads");
  c.ff_dim = cfg.at("ff_dim");
  c.text_vocab = cfg.at("text_vocab");
  c.code_vocab = cfg.at("code_vocab");
  c.seed = cfg.at("seed");
  hebtts::lm::ARModel model(c);
  hebtts::lm::load_checkpoint(path, model.params());
  if (cfg_out != nullptr) *cfg_out = cfg;
  return model;
}

hebtts::lm::NARModel load_nar_model(const std::string& path, json* cfg_out) {
  const json cfg = json::parse(hebtts::lm::peek_checkpoint_config(path));
  if (cfg.value("kind", "") != "nar") {
    throw std::runtime_error(path + " is not a NAR checkpoint");
  }
  hebtts::lm::NARConfig c;
  c.model_dim = cfg.at("model_dim");
  c.n_layers = cfg.at("n_layers");
  c.n_heads = cfg.at("n_heads");
  c.ff_dim = cfg.at("ff_dim");
  c.text_vocab = cfg.at("text_vocab");
  c.code_vocab = cfg.at("code_vocab");
  c.n_codebooks = cfg.at("n_codebooks");
  c.seed = cfg.at("seed");
  hebtts::lm::NARModel model(c);
  hebtts::lm::load_checkpoint(path, model.params());
  if (cfg_out != nullptr) *cfg_out = cfg;
  return model;
}

// normalize -> encode -> AR -> NAR -> .codemat. Returns the provenance
// record describing every stage.
ordered_json generate_codes(const std::string& text,
                            const std::string& prompt_path,
                            const std::string& vocab_dir,
                            const std::string& ar_path,
                            const std::string& nar_path,
                            const std::string& out_path, uint64_t seed,
                            int top_k, double temperature,
                            double max_seconds) {
  const std::string norm = hebtts::normalize_for_scoring(text);
  if (norm.empty()) {
    throw std::runtime_error("input text is empty after normalization");
  }
  const hebtts::Vocabulary vocab = hebtts::Vocabulary::load(vocab_dir);
  const auto text_ids = hebtts::encode_wordpiece(norm, vocab).ids;

  json ar_cfg;
  hebtts::lm::ARModel ar = load_ar_model(ar_path, &ar_cfg);
  if (static_cast<size_t>(ar_cfg.at("text_vocab").get<int>()) != vocab.size()) {
    throw std::runtime_error("vocabulary size does not match the checkpoint");
  }
  const hebtts::CodeMatrix prompt = hebtts::CodeMatrix::load(prompt_path);
  if (prompt.spec().codebook_size !=
      static_cast<uint32_t>(ar_cfg.at("code_vocab").get<int>())) {
    throw std::runtime_error("prompt codebook size does not match the model");
  }

  hebtts::lm::SamplingConfig sampling;
  sampling.top_k = top_k;
  sampling.temperature = temperature;
  const double frame_rate = ar_cfg.at("frame_rate");
  sampling.max_frames =
      std::max(1, static_cast<int>(max_seconds * frame_rate));
  std::mt19937_64 rng(seed);
  const auto first_cb = ar.generate(text_ids, hebtts::first_codebook(prompt),
                                    sampling, rng);
  if (first_cb.empty()) {
    throw std::runtime_error("the AR model emitted no frames");
  }

  json nar_cfg;
  hebtts::lm::NARModel nar = load_nar_model(nar_path, &nar_cfg);
  hebtts::CodecSpec spec;
  spec.n_codebooks = static_cast<uint32_t>(nar_cfg.at("n_codebooks").get<int>());
  spec.codebook_size = static_cast<uint32_t>(nar_cfg.at("code_vocab").get<int>());
  spec.frame_rate = nar_cfg.at("frame_rate");
  spec.sample_rate = prompt.spec().sample_rate;
  const hebtts::CodeMatrix out =
      nar.generate(text_ids, prompt, first_cb, spec);
  out.save(out_path);

  ordered_json prov;
  prov["text_raw"] = text;
  prov["text_normalized"] = norm;
  prov["text_tokens"] = text_ids.size();
  prov["tokenizer"] = {{"vocab_dir", vocab_dir},
                       {"vocab_hash",
                        hex64(fnv1a64(read_file(
                            std::filesystem::path(vocab_dir) / "vocab.txt")))}};
  prov["ar"] = {{"checkpoint", ar_path},
                {"config_hash", hex64(fnv1a64(ar_cfg.dump()))}};
  prov["nar"] = {{"checkpoint", nar_path},
                 {"config_hash", hex64(fnv1a64(nar_cfg.dump()))}};
  prov["sampling"] = {{"seed", seed},
                      {"top_k", top_k},
                      {"temperature", temperature},
                      {"max_seconds", max_seconds}};
  prov["output"] = {{"path", out_path},
                    {"frames", out.frames()},
                    {"duration_s", out.duration_s()}};
  return prov;
}

// id<TAB>text lines keyed by id.
std::map<std::string, std::string> read_id_text(const std::string& path) {
  std::map<std::string, std::string> out;
  for (const auto& line : read_lines(path)) {
    if (line.empty()) continue;
    const size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw std::runtime_error(path + ": expected id<TAB>text lines");
    }
    out[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return out;
}

hebtts::SpeakerEmbeddings read_embeddings(const std::string& path) {
  const json doc = json::parse(read_file(path));
  hebtts::SpeakerEmbeddings emb;
  for (const auto& v : doc.at("enrollment")) {
    emb.enrollment.push_back(v.get<hebtts::Embedding>());
  }
  for (const auto& [id, v] : doc.at("test").items()) {
    emb.test.emplace_back(id, v.get<hebtts::Embedding>());
  }
  return emb;
}

int run_ablation(const std::string& corpus_path, size_t vocab_size, int steps,
                 uint64_t seed) {
  const auto raw_lines = read_lines(corpus_path);
  std::vector<std::string> corpus;
  for (const auto& line : raw_lines) {
    const std::string norm = hebtts::normalize_for_scoring(line);
    if (!norm.empty()) corpus.push_back(norm);
  }
  if (corpus.empty()) throw std::runtime_error("corpus is empty");

  struct Row {
    std::string name;
    double tokens_per_word = 0.0;
    double lm_loss = 0.0;
    double round_trip_wer = 0.0;
  };
  std::vector<Row> rows;

  for (const bool use_wordpiece : {false, true}) {
    hebtts::Vocabulary vocab;
    if (use_wordpiece) {
      hebtts::TrainConfig tc;
      tc.target_size = vocab_size;
      vocab = hebtts::train_wordpiece(corpus, tc);
    } else {
      vocab = hebtts::train_chars(corpus);
    }
    const auto stats = hebtts::tokenizer_stats(corpus, vocab);

    // Tiny AR model over synthetic codes, identical except for the tokenizer.
    hebtts::lm::ARConfig cfg;
    cfg.model_dim = 16;
    cfg.n_layers = 1;
    cfg.n_heads = 2;
    cfg.ff_dim = 32;
    cfg.text_vocab = static_cast<int>(vocab.size());
    cfg.code_vocab = 32;
    cfg.seed = seed;
    hebtts::lm::ARModel model(cfg);
    hebtts::CodecSpec spec;
    spec.n_codebooks = 1;
    spec.codebook_size = 32;
    spec.frame_rate = 10.0;
    std::vector<hebtts::lm::ARSequence> dataset;
    double wer_sum = 0.0;
    for (size_t i = 0; i < corpus.size(); ++i) {
      const auto ids = hebtts::encode_wordpiece(corpus[i], vocab).ids;
      const auto m = hebtts::synth_codec_encode(
          {seed * 7919 + i, (2 * ids.size() + 4.5) / spec.frame_rate}, spec);
      const auto stream = hebtts::first_codebook(m);
      hebtts::lm::ARSequence seq;
      seq.text_ids = ids;
      seq.prompt_codes.assign(stream.begin(), stream.begin() + 4);
      seq.target_codes.assign(stream.begin() + 4, stream.end());
      dataset.push_back(std::move(seq));
      wer_sum += hebtts::wer(corpus[i],
                             hebtts::decode({ids, 0}, vocab));
    }
    hebtts::lm::TrainOptions topts;
    topts.steps = steps;
    topts.log_every = steps + 1;
    const auto state = hebtts::lm::train_ar(model, dataset, topts);
    rows.push_back({use_wordpiece ? "Word-Piece" : "Chars",
                    stats.tokens_per_word,
                    state.loss_history.empty()
                        ? 0.0
                        : state.loss_history.back().second,
                    wer_sum / static_cast<double>(corpus.size())});
  }

  std::cout << "tokenizer    tokens/word  lm_loss  round_trip_wer\n";
  for (const auto& r : rows) {
    std::printf("%-12s %11.4f %8.4f %15.4f\n", r.name.c_str(),
                r.tokens_per_word, r.lm_loss, r.round_trip_wer);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale diacritic-free Hebrew TTS toolkit"};
  app.set_version_flag("--version", std::string("hebtts ") + kVersion);
  app.require_subcommand(1);

  // ---- normalize ----------------------------------------------------------
  auto* normalize_cmd = app.add_subcommand(
      "normalize", "normalize text for scoring (stdin -> stdout)");
  normalize_cmd->callback([] {
    std::string line;
    while (std::getline(std::cin, line)) {
      std::cout << hebtts::normalize_for_scoring(line) << "\n";
    }
  });

  // ---- tokenizer ----------------------------------------------------------
  auto* tok_cmd = app.add_subcommand("tokenizer", "word-piece tokenizer");
  tok_cmd->require_subcommand(1);

  struct {
    std::string corpus, out, config_file;
    size_t vocab_size = 1000;
    size_t min_pair_count = 2;
  } tok_train;
  auto* tok_train_cmd = tok_cmd->add_subcommand("train", "train a vocabulary");
  auto* tt_corpus = tok_train_cmd->add_option("--corpus", tok_train.corpus, "text corpus")->required();
  auto* tt_size = tok_train_cmd->add_option("--vocab-size", tok_train.vocab_size, "target vocabulary size");
  auto* tt_min = tok_train_cmd->add_option("--min-pair-count", tok_train.min_pair_count, "minimum pair frequency");
  tok_train_cmd->add_option("--out", tok_train.out, "output directory")->required();
  tok_train_cmd->add_option("--config", tok_train.config_file, "config file");
  (void)tt_corpus;
  tok_train_cmd->callback([&] {
    if (!tok_train.config_file.empty()) {
      const json cfg = load_config_file(tok_train.config_file);
      apply_config(cfg, tt_size, "vocab_size", tok_train.vocab_size);
      apply_config(cfg, tt_min, "min_pair_count", tok_train.min_pair_count);
    }
    echo_config({{"corpus", tok_train.corpus},
                 {"vocab_size", tok_train.vocab_size},
                 {"min_pair_count", tok_train.min_pair_count},
                 {"out", tok_train.out}});
    std::vector<std::string> corpus;
    for (const auto& line : read_lines(tok_train.corpus)) {
      const std::string norm = hebtts::normalize_for_scoring(line);
      if (!norm.empty()) corpus.push_back(norm);
    }
    hebtts::TrainConfig tc;
    tc.target_size = tok_train.vocab_size;
    tc.min_pair_count = tok_train.min_pair_count;
    const auto vocab = hebtts::train_wordpiece(corpus, tc);
    vocab.save(tok_train.out);
    std::cout << vocab.size() << " entries, " << vocab.merge_log.size()
              << " merges\n";
  });

  struct {
    std::string vocab_dir;
    std::string mode = "wordpiece";
  } tok_enc;
  auto* tok_enc_cmd =
      tok_cmd->add_subcommand("encode", "encode stdin lines to token ids");
  tok_enc_cmd->add_option("--vocab", tok_enc.vocab_dir, "vocabulary directory")->required();
  tok_enc_cmd->add_option("--mode", tok_enc.mode, "wordpiece | chars")
      ->check(CLI::IsMember({"wordpiece", "chars"}));
  tok_enc_cmd->callback([&] {
    const auto vocab = hebtts::Vocabulary::load(tok_enc.vocab_dir);
    std::string line;
    while (std::getline(std::cin, line)) {
      const auto seq = tok_enc.mode == "chars"
                           ? hebtts::encode_chars(line, vocab)
                           : hebtts::encode_wordpiece(line, vocab);
      for (size_t i = 0; i < seq.ids.size(); ++i) {
        if (i > 0) std::cout << ' ';
        std::cout << seq.ids[i];
      }
      std::cout << "\n";
    }
  });

  // ---- codec synth --------------------------------------------------------
  struct {
    double duration = 1.0;
    uint64_t seed = 0;
    std::string out;
    hebtts::CodecSpec spec;
  } synth;
  auto* codec_cmd = app.add_subcommand("codec", "code-matrix utilities");
  codec_cmd->require_subcommand(1);
  auto* synth_cmd =
      codec_cmd->add_subcommand("synth", "deterministic synthetic code matrix");
  synth_cmd->add_option("--duration", synth.duration, "seconds")->required();
  synth_cmd->add_option("--seed", synth.seed, "signal seed");
  synth_cmd->add_option("--out", synth.out, "output .codemat")->required();
  synth_cmd->add_option("--codebooks", synth.spec.n_codebooks, "codebooks");
  synth_cmd->add_option("--codebook-size", synth.spec.codebook_size, "codes per codebook");
  synth_cmd->add_option("--frame-rate", synth.spec.frame_rate, "frames per second");
  synth_cmd->add_option("--sample-rate", synth.spec.sample_rate, "nominal sample rate");
  synth_cmd->callback([&] {
    const auto m =
        hebtts::synth_codec_encode({synth.seed, synth.duration}, synth.spec);
    m.save(synth.out);
    std::cout << m.frames() << " frames x " << m.spec().n_codebooks
              << " codebooks -> " << synth.out << "\n";
  });

  // ---- lm -----------------------------------------------------------------
  auto* lm_cmd = app.add_subcommand("lm", "acoustic language models");
  lm_cmd->require_subcommand(1);

  LmOptions ar_opts;
  std::map<std::string, CLI::Option*> ar_optmap;
  auto* train_ar_cmd =
      lm_cmd->add_subcommand("train-ar", "train the first-codebook AR model");
  add_lm_train_options(train_ar_cmd, ar_opts, ar_optmap);
  train_ar_cmd->callback([&] { run_train_ar(ar_opts, ar_optmap); });

  LmOptions nar_opts;
  std::map<std::string, CLI::Option*> nar_optmap;
  auto* train_nar_cmd =
      lm_cmd->add_subcommand("train-nar", "train the residual-codebook NAR model");
  add_lm_train_options(train_nar_cmd, nar_opts, nar_optmap);
  train_nar_cmd->callback([&] { run_train_nar(nar_opts, nar_optmap); });

  struct {
    std::string text, prompt, out, vocab_dir, ar, nar;
    uint64_t seed = 0;
    int top_k = 50;
    double temperature = 1.0;
    double max_seconds = 18.0;
  } gen;
  auto* gen_cmd = lm_cmd->add_subcommand("generate", "text + prompt -> codes");
  gen_cmd->add_option("--text", gen.text, "input text")->required();
  gen_cmd->add_option("--prompt", gen.prompt, "acoustic prompt .codemat")->required();
  gen_cmd->add_option("--out", gen.out, "output .codemat")->required();
  gen_cmd->add_option("--vocab", gen.vocab_dir, "vocabulary directory")->required();
  gen_cmd->add_option("--ar", gen.ar, "AR checkpoint")->required();
  gen_cmd->add_option("--nar", gen.nar, "NAR checkpoint")->required();
  gen_cmd->add_option("--seed", gen.seed, "sampling seed");
  gen_cmd->add_option("--top-k", gen.top_k, "top-k sampling cutoff");
  gen_cmd->add_option("--temperature", gen.temperature, "sampling temperature");
  gen_cmd->add_option("--max-seconds", gen.max_seconds, "generation cap");
  gen_cmd->callback([&] {
    const auto prov =
        generate_codes(gen.text, gen.prompt, gen.vocab_dir, gen.ar, gen.nar,
                       gen.out, gen.seed, gen.top_k, gen.temperature,
                       gen.max_seconds);
    std::cout << prov.dump(2) << "\n";
  });

  // ---- pipeline run -------------------------------------------------------
  struct {
    std::string in_dir, out, config_file, asr;
  } pipe;
  auto* pipe_cmd = app.add_subcommand("pipeline", "audio preprocessing");
  pipe_cmd->require_subcommand(1);
  auto* pipe_run = pipe_cmd->add_subcommand(
      "run", "resample, segment, and weakly transcribe a directory of WAVs");
  pipe_run->add_option("--in", pipe.in_dir, "input directory of .wav files")->required();
  pipe_run->add_option("--out", pipe.out, "output manifest (jsonl)")->required();
  pipe_run->add_option("--config", pipe.config_file, "segmentation config file");
  pipe_run->add_option(
      "--asr", pipe.asr,
      "ASR endpoint (host:port), mock:<text>, or none; default "
      "$HEBTTS_ASR_ENDPOINT");
  pipe_run->callback([&] {
    hebtts::SegmentationConfig cfg;
    if (!pipe.config_file.empty()) {
      const json c = load_config_file(pipe.config_file);
      apply_config(c, nullptr, "min_segment_s", cfg.min_segment_s);
      apply_config(c, nullptr, "min_silence_gap_s", cfg.min_silence_gap_s);
      apply_config(c, nullptr, "pad_s", cfg.pad_s);
      apply_config(c, nullptr, "max_segment_s", cfg.max_segment_s);
      apply_config(c, nullptr, "vad_threshold", cfg.vad_threshold);
      apply_config(c, nullptr, "vad_frame_ms", cfg.vad_frame_ms);
      apply_config(c, nullptr, "target_sample_rate", cfg.target_sample_rate);
    }
    std::string asr = pipe.asr;
    if (asr.empty()) {
      const char* env = std::getenv("HEBTTS_ASR_ENDPOINT");
      asr = env != nullptr ? env : "none";
    }
    echo_config({{"in", pipe.in_dir},
                 {"out", pipe.out},
                 {"asr", asr},
                 {"min_segment_s", cfg.min_segment_s},
                 {"min_silence_gap_s", cfg.min_silence_gap_s},
                 {"pad_s", cfg.pad_s},
                 {"max_segment_s", cfg.max_segment_s},
                 {"vad_threshold", cfg.vad_threshold},
                 {"vad_frame_ms", cfg.vad_frame_ms},
                 {"target_sample_rate", cfg.target_sample_rate}});

    std::vector<std::string> sources;
    for (const auto& e : std::filesystem::directory_iterator(pipe.in_dir)) {
      if (e.path().extension() == ".wav") sources.push_back(e.path().string());
    }
    std::sort(sources.begin(), sources.end());

    std::unique_ptr<hebtts::ASRClient> client;
    if (asr == "none") {
      client = std::make_unique<hebtts::MockASRClient>(
          std::vector<hebtts::ASRResult>{});  // every call fails
    } else if (asr.rfind("mock:", 0) == 0) {
      client = std::make_unique<hebtts::MockASRClient>(asr.substr(5));
    } else {
      client = std::make_unique<hebtts::HttpASRClient>(asr);
    }
    const auto result =
        hebtts::run_pipeline(sources, cfg, *client, pipe.out);
    std::cout << result.entries.size() << " segments, "
              << result.failures.size() << " failures, "
              << result.skipped_sources << " sources reused\n";
    if (!result.failures.empty()) {
      for (const auto& f : result.failures) std::cerr << "failed: " << f << "\n";
    }
  });

  // ---- eval ---------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "transcript evaluation");
  eval_cmd->require_subcommand(1);

  struct {
    std::string ref, hyp;
  } ewer;
  auto* wer_cmd = eval_cmd->add_subcommand(
      "wer", "micro-averaged WER/CER from id<TAB>text files");
  wer_cmd->add_option("--ref", ewer.ref, "reference file")->required();
  wer_cmd->add_option("--hyp", ewer.hyp, "hypothesis file")->required();
  wer_cmd->callback([&] {
    const auto refs = read_id_text(ewer.ref);
    const auto hyps = read_id_text(ewer.hyp);
    std::vector<hebtts::EvalUtterance> utts;
    for (const auto& [id, ref_text] : refs) {
      const auto it = hyps.find(id);
      if (it == hyps.end()) {
        throw std::runtime_error("hypothesis missing for id " + id);
      }
      utts.push_back({id, ref_text, {it->second}});
    }
    const auto report = hebtts::evaluate(utts);
    std::cout << report.to_json() << "\n";
  });

  struct {
    std::string manifest, embeddings, out;
  } erep;
  auto* rep_cmd = eval_cmd->add_subcommand(
      "report", "full report from a jsonl manifest of candidates");
  rep_cmd->add_option("--manifest", erep.manifest,
                      "jsonl: {id, reference, candidates[]}")->required();
  rep_cmd->add_option("--embeddings", erep.embeddings,
                      "json: {enrollment[][], test{id->[]}}");
  rep_cmd->add_option("--out", erep.out, "report json output")->required();
  rep_cmd->callback([&] {
    std::vector<hebtts::EvalUtterance> utts;
    for (const auto& line : read_lines(erep.manifest)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      utts.push_back({j.at("id"), j.at("reference"),
                      j.at("candidates").get<std::vector<std::string>>()});
    }
    hebtts::SpeakerEmbeddings emb;
    const bool has_emb = !erep.embeddings.empty();
    if (has_emb) emb = read_embeddings(erep.embeddings);
    const auto report = hebtts::evaluate(utts, has_emb ? &emb : nullptr);
    std::ofstream out(erep.out, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + erep.out);
    out << report.to_json() << "\n";
    std::cout << report.to_table();
  });

  // ---- ablate-tokenizer ---------------------------------------------------
  struct {
    std::string corpus;
    size_t vocab_size = 200;
    int steps = 30;
    uint64_t seed = 0;
  } abl;
  auto* abl_cmd = app.add_subcommand(
      "ablate-tokenizer",
      "char vs word-piece comparison table on one corpus");
  abl_cmd->add_option("--corpus", abl.corpus, "text corpus")->required();
  abl_cmd->add_option("--vocab-size", abl.vocab_size, "word-piece target size");
  abl_cmd->add_option("--steps", abl.steps, "LM training steps per variant");
  abl_cmd->add_option("--seed", abl.seed, "random seed");
  abl_cmd->callback(
      [&] { run_ablation(abl.corpus, abl.vocab_size, abl.steps, abl.seed); });

  // ---- demo ---------------------------------------------------------------
  struct {
    std::string text, prompt, out, vocab_dir, ar, nar, provenance;
    uint64_t seed = 0;
    int top_k = 50;
    double temperature = 1.0;
    double max_seconds = 18.0;
  } demo;
  auto* demo_cmd = app.add_subcommand(
      "demo", "end-to-end: text + prompt -> code matrix + provenance");
  demo_cmd->add_option("--text", demo.text, "input text")->required();
  demo_cmd->add_option("--prompt", demo.prompt, "acoustic prompt .codemat")->required();
  demo_cmd->add_option("--out", demo.out, "output .codemat")->required();
  demo_cmd->add_option("--vocab", demo.vocab_dir, "vocabulary directory")->required();
  demo_cmd->add_option("--ar", demo.ar, "AR checkpoint")->required();
  demo_cmd->add_option("--nar", demo.nar, "NAR checkpoint")->required();
  demo_cmd->add_option("--provenance", demo.provenance, "provenance json path")->required();
  demo_cmd->add_option("--seed", demo.seed, "sampling seed");
  demo_cmd->add_option("--top-k", demo.top_k, "top-k sampling cutoff");
  demo_cmd->add_option("--temperature", demo.temperature, "sampling temperature");
  demo_cmd->add_option("--max-seconds", demo.max_seconds, "generation cap");
  demo_cmd->callback([&] {
    const auto prov =
        generate_codes(demo.text, demo.prompt, demo.vocab_dir, demo.ar,
                       demo.nar, demo.out, demo.seed, demo.top_k,
                       demo.temperature, demo.max_seconds);
    std::ofstream out(demo.provenance, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + demo.provenance);
    out << prov.dump(2) << "\n";
    std::cout << prov.dump(2) << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
