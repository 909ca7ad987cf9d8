#include "hebtts/lm/train.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace hebtts::lm {

double InverseSqrtSchedule::lr(int step) const {
  if (step < 1) step = 1;
  if (step <= warmup_) {
    return peak_ * static_cast<double>(step) / warmup_;
  }
  return peak_ * std::sqrt(static_cast<double>(warmup_) / step);
}

AdamOptimizer::AdamOptimizer(std::vector<ParamRef> params, OptimizerConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.push_back(Mat::Zero(p.value->rows(), p.value->cols()));
    v_.push_back(Mat::Zero(p.value->rows(), p.value->cols()));
  }
}

void AdamOptimizer::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (size_t i = 0; i < params_.size(); ++i) {
    const Mat& g = *params_[i].grad;
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    params_[i].value->array() -=
        lr * (m_[i].array() / bc1) /
        ((v_[i].array() / bc2).sqrt() + cfg_.eps);
  }
}

namespace {

template <typename LossFn>
TrainState run_training(const std::vector<ParamRef>& params, LossFn&& loss_fn,
                        const TrainOptions& opts, const LrSchedule* schedule) {
  InverseSqrtSchedule default_schedule(opts.peak_lr, opts.warmup_steps);
  const LrSchedule& sched =
      schedule != nullptr ? *schedule
                          : static_cast<const LrSchedule&>(default_schedule);
  AdamOptimizer optimizer(params);
  TrainState state;
  double initial_loss = 0.0;
  int bad_streak = 0;
  for (int step = 1; step <= opts.steps; ++step) {
    zero_grads(params);
    const double loss = loss_fn();
    if (step == 1) initial_loss = loss;
    if (loss > opts.divergence_factor * initial_loss) {
      if (++bad_streak >= opts.divergence_patience) {
        std::ostringstream msg;
        msg << "training diverged: loss " << loss << " > "
            << opts.divergence_factor << "x initial " << initial_loss
            << " for " << bad_streak << " consecutive steps (step " << step
            << ")";
        throw TrainingDiverged(msg.str());
      }
    } else {
      bad_streak = 0;
    }
    const double lr = sched.lr(step);
    optimizer.step(lr);
    state.step = step;
    state.learning_rate = lr;
    if (step == 1 || step % opts.log_every == 0 || step == opts.steps) {
      state.loss_history.emplace_back(step, loss);
    }
  }
  return state;
}

}  // namespace

TrainState train_ar(ARModel& model, const std::vector<ARSequence>& dataset,
                    const TrainOptions& opts, const LrSchedule* schedule) {
  if (dataset.empty()) throw std::invalid_argument("train_ar: empty dataset");
  return run_training(
      model.params(), [&] { return model.loss(dataset, true); }, opts,
      schedule);
}

TrainState train_nar(NARModel& model, const std::vector<NARBatch>& dataset,
                     const TrainOptions& opts, const LrSchedule* schedule) {
  if (dataset.empty()) throw std::invalid_argument("train_nar: empty dataset");
  return run_training(
      model.params(),
      [&] {
        double total = 0.0;
        for (const auto& batch : dataset) total += model.loss(batch, true);
        return total / static_cast<double>(dataset.size());
      },
      opts, schedule);
}

namespace {

constexpr uint32_t kCkptMagic = 0x4C4D434B;  // "LMCK"
constexpr uint32_t kCkptVersion = 1;

void write_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

void write_f32(std::ostream& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32(out, bits);
}

float read_f32(std::istream& in) {
  const uint32_t bits = read_u32(in);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::string& config_json,
                     const std::vector<ParamRef>& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  write_u32(out, kCkptMagic);
  write_u32(out, kCkptVersion);
  write_u32(out, static_cast<uint32_t>(config_json.size()));
  out.write(config_json.data(),
            static_cast<std::streamsize>(config_json.size()));
  write_u32(out, static_cast<uint32_t>(params.size()));
  for (const auto& p : params) {
    write_u32(out, static_cast<uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    write_u32(out, static_cast<uint32_t>(p.value->rows()));
    write_u32(out, static_cast<uint32_t>(p.value->cols()));
    for (Eigen::Index r = 0; r < p.value->rows(); ++r) {
      for (Eigen::Index c = 0; c < p.value->cols(); ++c) {
        write_f32(out, static_cast<float>((*p.value)(r, c)));
      }
    }
  }
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

std::string load_checkpoint(const std::string& path,
                            const std::vector<ParamRef>& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path);
  if (read_u32(in) != kCkptMagic) {
    throw std::runtime_error(path + ": not a checkpoint file");
  }
  if (read_u32(in) != kCkptVersion) {
    throw std::runtime_error(path + ": unsupported checkpoint version");
  }
  std::string config(read_u32(in), '\0');
  in.read(config.data(), static_cast<std::streamsize>(config.size()));
  const uint32_t n = read_u32(in);
  if (n != params.size()) {
    throw std::runtime_error(path + ": tensor count mismatch");
  }
  for (const auto& p : params) {
    std::string name(read_u32(in), '\0');
    in.read(name.data(), static_cast<std::streamsize>(name.size()));
    if (name != p.name) {
      throw std::runtime_error(path + ": tensor name mismatch: expected " +
                               p.name + ", got " + name);
    }
    const uint32_t rows = read_u32(in);
    const uint32_t cols = read_u32(in);
    if (rows != static_cast<uint32_t>(p.value->rows()) ||
        cols != static_cast<uint32_t>(p.value->cols())) {
      throw std::runtime_error(path + ": tensor shape mismatch for " + p.name);
    }
    for (uint32_t r = 0; r < rows; ++r) {
      for (uint32_t c = 0; c < cols; ++c) {
        (*p.value)(r, c) = static_cast<double>(read_f32(in));
      }
    }
  }
  if (!in) throw std::runtime_error(path + ": truncated checkpoint");
  return config;
}

std::string peek_checkpoint_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path);
  if (read_u32(in) != kCkptMagic) {
    throw std::runtime_error(path + ": not a checkpoint file");
  }
  if (read_u32(in) != kCkptVersion) {
    throw std::runtime_error(path + ": unsupported checkpoint version");
  }
  std::string config(read_u32(in), '\0');
  in.read(config.data(), static_cast<std::streamsize>(config.size()));
  if (!in) throw std::runtime_error(path + ": truncated checkpoint");
  return config;
}

}  // namespace hebtts::lm
