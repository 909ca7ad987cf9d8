#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hebtts/lm/ar_model.hpp"
#include "hebtts/lm/nar_model.hpp"

namespace hebtts::lm {

// Learning-rate schedule, queried once per optimizer step (1-based).
class LrSchedule {
 public:
  virtual ~LrSchedule() = default;
  virtual double lr(int step) const = 0;
};

// Linear warmup to `peak`, then decay proportional to 1/sqrt(step).
class InverseSqrtSchedule : public LrSchedule {
 public:
  InverseSqrtSchedule(double peak, int warmup_steps)
      : peak_(peak), warmup_(warmup_steps < 1 ? 1 : warmup_steps) {}
  double lr(int step) const override;

 private:
  double peak_;
  int warmup_;
};

class ConstantSchedule : public LrSchedule {
 public:
  explicit ConstantSchedule(double value) : value_(value) {}
  double lr(int) const override { return value_; }

 private:
  double value_;
};

struct OptimizerConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam over a fixed parameter registration order.
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<ParamRef> params, OptimizerConfig cfg = {});
  void step(double lr);

 private:
  std::vector<ParamRef> params_;
  OptimizerConfig cfg_;
  std::vector<Mat> m_, v_;
  int t_ = 0;
};

struct TrainState {
  int step = 0;
  double learning_rate = 0.0;
  std::vector<std::pair<int, double>> loss_history;
};

struct TrainOptions {
  int steps = 1000;
  double peak_lr = 5e-2;  // default scheduler peak
  int warmup_steps = 100;
  int log_every = 50;
  // Divergence abort: loss above 10x the initial loss for 100 straight steps.
  double divergence_factor = 10.0;
  int divergence_patience = 100;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

TrainState train_ar(ARModel& model, const std::vector<ARSequence>& dataset,
                    const TrainOptions& opts,
                    const LrSchedule* schedule = nullptr);

TrainState train_nar(NARModel& model, const std::vector<NARBatch>& dataset,
                     const TrainOptions& opts,
                     const LrSchedule* schedule = nullptr);

// Self-describing checkpoint: config JSON + shape-tagged little-endian
// float32 tensors.
void save_checkpoint(const std::string& path, const std::string& config_json,
                     const std::vector<ParamRef>& params);
std::string load_checkpoint(const std::string& path,
                            const std::vector<ParamRef>& params);
std::string peek_checkpoint_config(const std::string& path);

}  // namespace hebtts::lm
