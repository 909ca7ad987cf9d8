#include "hebtts/lm/nn.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace hebtts::lm {

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double gaussian(std::mt19937_64& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

void init_normal(Mat& m, std::mt19937_64& rng, double stddev) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      m(i, j) = stddev * gaussian(rng);
    }
  }
}

Mat sinusoidal_positions(int length, int dim) {
  Mat pe(length, dim);
  for (int p = 0; p < length; ++p) {
    for (int i = 0; i < dim; i += 2) {
      const double angle = p * std::exp(-std::log(10000.0) * i / dim);
      pe(p, i) = std::sin(angle);
      if (i + 1 < dim) pe(p, i + 1) = std::cos(angle);
    }
  }
  return pe;
}

// ---- LayerNorm ----

void LayerNorm::init(int dim) {
  gamma = Mat::Ones(1, dim);
  beta = Mat::Zero(1, dim);
  dgamma = Mat::Zero(1, dim);
  dbeta = Mat::Zero(1, dim);
}

Mat LayerNorm::forward(const Mat& x, Cache& cache) const {
  const auto n = x.cols();
  cache.xhat.resize(x.rows(), n);
  cache.inv_std.resize(x.rows());
  Mat y(x.rows(), n);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    const double inv = 1.0 / std::sqrt(var + 1e-6);
    cache.inv_std(r) = inv;
    cache.xhat.row(r) = (x.row(r).array() - mean) * inv;
    y.row(r) = cache.xhat.row(r).cwiseProduct(gamma.row(0)) + beta.row(0);
  }
  return y;
}

Mat LayerNorm::backward(const Mat& dy, const Cache& cache) {
  const auto n = static_cast<double>(dy.cols());
  Mat dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const Eigen::RowVectorXd dxhat = dy.row(r).cwiseProduct(gamma.row(0));
    const double sum_dxhat = dxhat.sum();
    const double sum_dxhat_xhat = dxhat.cwiseProduct(cache.xhat.row(r)).sum();
    dx.row(r) =
        (dxhat.array() - sum_dxhat / n -
         cache.xhat.row(r).array() * (sum_dxhat_xhat / n)) *
        cache.inv_std(r);
    dgamma.row(0) += dy.row(r).cwiseProduct(cache.xhat.row(r));
    dbeta.row(0) += dy.row(r);
  }
  return dx;
}

void LayerNorm::collect(const std::string& prefix,
                        std::vector<ParamRef>& out) {
  out.push_back({prefix + ".gamma", &gamma, &dgamma});
  out.push_back({prefix + ".beta", &beta, &dbeta});
}

// ---- Linear ----

void Linear::init(int in, int out, std::mt19937_64& rng, bool with_bias) {
  has_bias = with_bias;
  weight.resize(in, out);
  init_normal(weight, rng, 0.02);
  dweight = Mat::Zero(in, out);
  if (has_bias) {
    bias = Mat::Zero(1, out);
    dbias = Mat::Zero(1, out);
  }
}

Mat Linear::forward(const Mat& x, Cache& cache) const {
  cache.x = x;
  Mat y = x * weight;
  if (has_bias) y.rowwise() += bias.row(0);
  return y;
}

Mat Linear::backward(const Mat& dy, const Cache& cache) {
  dweight += cache.x.transpose() * dy;
  if (has_bias) dbias.row(0) += dy.colwise().sum();
  return dy * weight.transpose();
}

void Linear::collect(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".weight", &weight, &dweight});
  if (has_bias) out.push_back({prefix + ".bias", &bias, &dbias});
}

// ---- SelfAttention ----

void SelfAttention::init(int dim, int heads, bool causal_mask,
                         std::mt19937_64& rng) {
  if (dim % heads != 0) {
    throw std::invalid_argument("attention: dim not divisible by heads");
  }
  n_heads = heads;
  causal = causal_mask;
  q.init(dim, dim, rng, false);
  k.init(dim, dim, rng, false);
  v.init(dim, dim, rng, false);
  o.init(dim, dim, rng, false);
}

Mat SelfAttention::forward(const Mat& x, Cache& cache) const {
  const auto len = x.rows();
  const auto dim = x.cols();
  const auto dh = dim / n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  cache.qm = q.forward(x, cache.qc);
  cache.km = k.forward(x, cache.kc);
  cache.vm = v.forward(x, cache.vc);
  cache.probs.assign(static_cast<size_t>(n_heads), Mat());

  Mat concat(len, dim);
  for (int h = 0; h < n_heads; ++h) {
    const auto qh = cache.qm.middleCols(h * dh, dh);
    const auto kh = cache.km.middleCols(h * dh, dh);
    const auto vh = cache.vm.middleCols(h * dh, dh);
    Mat scores = qh * kh.transpose() * scale;
    if (causal) {
      for (Eigen::Index i = 0; i < len; ++i) {
        for (Eigen::Index j = i + 1; j < len; ++j) {
          scores(i, j) = -std::numeric_limits<double>::infinity();
        }
      }
    }
    Mat& probs = cache.probs[static_cast<size_t>(h)];
    probs.resize(len, len);
    for (Eigen::Index i = 0; i < len; ++i) {
      const double mx = scores.row(i).maxCoeff();
      probs.row(i) = (scores.row(i).array() - mx).exp();
      probs.row(i) /= probs.row(i).sum();
    }
    concat.middleCols(h * dh, dh) = probs * vh;
  }
  cache.oc.x = concat;
  return concat * o.weight;
}

Mat SelfAttention::backward(const Mat& dy, const Cache& cache) {
  const auto len = dy.rows();
  const auto dim = dy.cols();
  const auto dh = dim / n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  const Mat dconcat = o.backward(dy, cache.oc);
  Mat dq = Mat::Zero(len, dim);
  Mat dk = Mat::Zero(len, dim);
  Mat dv = Mat::Zero(len, dim);
  for (int h = 0; h < n_heads; ++h) {
    const auto qh = cache.qm.middleCols(h * dh, dh);
    const auto kh = cache.km.middleCols(h * dh, dh);
    const auto vh = cache.vm.middleCols(h * dh, dh);
    const Mat& probs = cache.probs[static_cast<size_t>(h)];
    const auto doh = dconcat.middleCols(h * dh, dh);

    const Mat dprobs = doh * vh.transpose();
    dv.middleCols(h * dh, dh) = probs.transpose() * doh;
    Mat dscores(len, len);
    for (Eigen::Index i = 0; i < len; ++i) {
      const double dot = dprobs.row(i).cwiseProduct(probs.row(i)).sum();
      dscores.row(i) =
          ((dprobs.row(i).array() - dot) * probs.row(i).array()).matrix();
    }
    dq.middleCols(h * dh, dh) = dscores * kh * scale;
    dk.middleCols(h * dh, dh) = dscores.transpose() * qh * scale;
  }
  Mat dx = q.backward(dq, cache.qc);
  dx += k.backward(dk, cache.kc);
  dx += v.backward(dv, cache.vc);
  return dx;
}

void SelfAttention::collect(const std::string& prefix,
                            std::vector<ParamRef>& out) {
  q.collect(prefix + ".q", out);
  k.collect(prefix + ".k", out);
  v.collect(prefix + ".v", out);
  o.collect(prefix + ".o", out);
}

// ---- FeedForward ----

void FeedForward::init(int dim, int ff_dim, std::mt19937_64& rng) {
  in.init(dim, ff_dim, rng);
  out.init(ff_dim, dim, rng);
}

Mat FeedForward::forward(const Mat& x, Cache& cache) const {
  cache.hidden = in.forward(x, cache.ic);
  const Mat activated = cache.hidden.cwiseMax(0.0);
  return out.forward(activated, cache.oc);
}

Mat FeedForward::backward(const Mat& dy, const Cache& cache) {
  Mat dhidden = out.backward(dy, cache.oc);
  dhidden = dhidden.cwiseProduct(
      (cache.hidden.array() > 0.0).cast<double>().matrix());
  return in.backward(dhidden, cache.ic);
}

void FeedForward::collect(const std::string& prefix,
                          std::vector<ParamRef>& out_params) {
  in.collect(prefix + ".in", out_params);
  out.collect(prefix + ".out", out_params);
}

// ---- TransformerBlock ----

void TransformerBlock::init(int dim, int heads, int ff_dim, bool causal,
                            std::mt19937_64& rng) {
  ln1.init(dim);
  ln2.init(dim);
  attn.init(dim, heads, causal, rng);
  ffn.init(dim, ff_dim, rng);
}

Mat TransformerBlock::forward(const Mat& x, Cache& cache) const {
  const Mat h = x + attn.forward(ln1.forward(x, cache.ln1c), cache.attnc);
  return h + ffn.forward(ln2.forward(h, cache.ln2c), cache.ffnc);
}

Mat TransformerBlock::backward(const Mat& dy, const Cache& cache) {
  Mat dh = dy + ln2.backward(ffn.backward(dy, cache.ffnc), cache.ln2c);
  return dh + ln1.backward(attn.backward(dh, cache.attnc), cache.ln1c);
}

void TransformerBlock::collect(const std::string& prefix,
                               std::vector<ParamRef>& out) {
  ln1.collect(prefix + ".ln1", out);
  attn.collect(prefix + ".attn", out);
  ln2.collect(prefix + ".ln2", out);
  ffn.collect(prefix + ".ffn", out);
}

// ---- Transformer ----

void Transformer::init(int dim, int layers, int heads, int ff_dim,
                       bool causal, std::mt19937_64& rng) {
  blocks.resize(static_cast<size_t>(layers));
  for (auto& b : blocks) b.init(dim, heads, ff_dim, causal, rng);
  ln_final.init(dim);
}

Mat Transformer::forward(const Mat& x, Cache& cache) const {
  cache.blockc.resize(blocks.size());
  Mat h = x;
  for (size_t i = 0; i < blocks.size(); ++i) {
    h = blocks[i].forward(h, cache.blockc[i]);
  }
  return ln_final.forward(h, cache.lnfc);
}

Mat Transformer::backward(const Mat& dy, const Cache& cache) {
  Mat dh = ln_final.backward(dy, cache.lnfc);
  for (size_t i = blocks.size(); i-- > 0;) {
    dh = blocks[i].backward(dh, cache.blockc[i]);
  }
  return dh;
}

void Transformer::collect(const std::string& prefix,
                          std::vector<ParamRef>& out) {
  for (size_t i = 0; i < blocks.size(); ++i) {
    blocks[i].collect(prefix + ".block" + std::to_string(i), out);
  }
  ln_final.collect(prefix + ".ln_final", out);
}

// ---- Loss ----

double cross_entropy(const Mat& logits, const std::vector<int>& target_rows,
                     const std::vector<int>& target_ids, Mat* dlogits) {
  if (target_rows.size() != target_ids.size() || target_rows.empty()) {
    throw std::invalid_argument("cross_entropy: bad target lists");
  }
  if (dlogits != nullptr) {
    dlogits->setZero(logits.rows(), logits.cols());
  }
  const double inv_n = 1.0 / static_cast<double>(target_rows.size());
  double loss = 0.0;
  for (size_t t = 0; t < target_rows.size(); ++t) {
    const int r = target_rows[t];
    const int id = target_ids[t];
    const double mx = logits.row(r).maxCoeff();
    Eigen::RowVectorXd exps = (logits.row(r).array() - mx).exp();
    const double z = exps.sum();
    loss += std::log(z) + mx - logits(r, id);
    if (dlogits != nullptr) {
      dlogits->row(r) += (exps / z) * inv_n;
      (*dlogits)(r, id) -= inv_n;
    }
  }
  return loss * inv_n;
}

void zero_grads(const std::vector<ParamRef>& params) {
  for (const auto& p : params) p.grad->setZero();
}

}  // namespace hebtts::lm
