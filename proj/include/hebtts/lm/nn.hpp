#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace hebtts::lm {

using Mat = Eigen::MatrixXd;  // rows = sequence positions, cols = features
using Vec = Eigen::VectorXd;

// Named view of a parameter tensor and its gradient accumulator.
// The optimizer and checkpoint writer iterate these in registration order.
struct ParamRef {
  std::string name;
  Mat* value;
  Mat* grad;
};

double uniform01(std::mt19937_64& rng);
double gaussian(std::mt19937_64& rng);  // Box-Muller, hand-rolled for replay
void init_normal(Mat& m, std::mt19937_64& rng, double stddev);

Mat sinusoidal_positions(int length, int dim);

struct LayerNorm {
  Mat gamma, beta;  // 1 x dim
  Mat dgamma, dbeta;

  struct Cache {
    Mat xhat;
    Vec inv_std;
  };

  void init(int dim);
  Mat forward(const Mat& x, Cache& cache) const;
  Mat backward(const Mat& dy, const Cache& cache);
  void collect(const std::string& prefix, std::vector<ParamRef>& out);
};

struct Linear {
  Mat weight;  // in x out
  Mat bias;    // 1 x out (empty when has_bias = false)
  Mat dweight, dbias;
  bool has_bias = true;

  struct Cache {
    Mat x;
  };

  void init(int in, int out, std::mt19937_64& rng, bool with_bias = true);
  Mat forward(const Mat& x, Cache& cache) const;
  Mat backward(const Mat& dy, const Cache& cache);
  void collect(const std::string& prefix, std::vector<ParamRef>& out);
};

struct SelfAttention {
  Linear q, k, v, o;  // all dim x dim, no bias
  int n_heads = 1;
  bool causal = true;

  struct Cache {
    Linear::Cache qc, kc, vc, oc;
    Mat qm, km, vm;
    std::vector<Mat> probs;  // per-head attention rows
  };

  void init(int dim, int heads, bool causal_mask, std::mt19937_64& rng);
  Mat forward(const Mat& x, Cache& cache) const;
  Mat backward(const Mat& dy, const Cache& cache);
  void collect(const std::string& prefix, std::vector<ParamRef>& out);
};

struct FeedForward {
  Linear in, out;

  struct Cache {
    Linear::Cache ic, oc;
    Mat hidden;  // pre-activation
  };

  void init(int dim, int ff_dim, std::mt19937_64& rng);
  Mat forward(const Mat& x, Cache& cache) const;
  Mat backward(const Mat& dy, const Cache& cache);
  void collect(const std::string& prefix, std::vector<ParamRef>& out);
};

// Pre-LN block: x + attn(ln1(x)), then + ffn(ln2(.)).
struct TransformerBlock {
  LayerNorm ln1, ln2;
  SelfAttention attn;
  FeedForward ffn;

  struct Cache {
    LayerNorm::Cache ln1c, ln2c;
    SelfAttention::Cache attnc;
    FeedForward::Cache ffnc;
  };

  void init(int dim, int heads, int ff_dim, bool causal,
            std::mt19937_64& rng);
  Mat forward(const Mat& x, Cache& cache) const;
  Mat backward(const Mat& dy, const Cache& cache);
  void collect(const std::string& prefix, std::vector<ParamRef>& out);
};

struct Transformer {
  std::vector<TransformerBlock> blocks;
  LayerNorm ln_final;

  struct Cache {
    std::vector<TransformerBlock::Cache> blockc;
    LayerNorm::Cache lnfc;
  };

  void init(int dim, int layers, int heads, int ff_dim, bool causal,
            std::mt19937_64& rng);
  Mat forward(const Mat& x, Cache& cache) const;
  Mat backward(const Mat& dy, const Cache& cache);
  void collect(const std::string& prefix, std::vector<ParamRef>& out);
};

// Mean cross-entropy (nats) over the rows of `logits` listed in
// `target_rows`; writes d(loss)/d(logits) into `dlogits` scaled so that
// backprop yields the gradient of the mean.
double cross_entropy(const Mat& logits, const std::vector<int>& target_rows,
                     const std::vector<int>& target_ids, Mat* dlogits);

void zero_grads(const std::vector<ParamRef>& params);

}  // namespace hebtts::lm
