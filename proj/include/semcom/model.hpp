#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "semcom/graph.hpp"
#include "semcom/random.hpp"

namespace semcom {

/// Fully connected stack: relu on hidden layers, linear output.
/// Weight l has shape (dims[l+1] x dims[l]); bias l is (1 x dims[l+1]).
struct Mlp {
  std::vector<std::size_t> dims;
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;

  std::size_t input_dim() const { return dims.front(); }
  std::size_t output_dim() const { return dims.back(); }
  std::size_t num_layers() const { return weights.size(); }

  /// Parameters in checkpoint order: w0, b0, w1, b1, ...
  std::vector<Tensor*> parameters() {
    std::vector<Tensor*> out;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      out.push_back(&weights[l]);
      out.push_back(&biases[l]);
    }
    return out;
  }

  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }

  Var forward(Graph& g, Var x) {
    if (x.cols() != input_dim())
      throw dimension_error("Mlp::forward: input width " + std::to_string(x.cols()) +
                            " but layer expects " + std::to_string(input_dim()));
    Var h = x;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      h = add(matmul(h, transpose(g.track(weights[l]))), g.track(biases[l]));
      if (l + 1 < weights.size()) h = relu(h);
    }
    return h;
  }

  /// Graph-free forward pass for inference.
  Matrix predict(const Matrix& x) const {
    if (x.cols() != input_dim())
      throw dimension_error("Mlp::predict: input width " + std::to_string(x.cols()) +
                            " but layer expects " + std::to_string(input_dim()));
    Matrix h = x;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      Matrix out(h.rows(), dims[l + 1]);
      detail::gemm_nt(h, weights[l].value, out);
      for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t c = 0; c < out.cols(); ++c) {
          double v = out(r, c) + biases[l].value(0, c);
          out(r, c) = (l + 1 < weights.size() && v < 0.0) ? 0.0 : v;
        }
      h = std::move(out);
    }
    return h;
  }
};

/// Kaiming-uniform weights (std √(2/fan_in)), zero biases.
inline Mlp init_mlp(const std::vector<std::size_t>& dims, std::uint64_t seed, const std::string& prefix) {
  if (dims.size() < 2) throw validation_error("init_params: need at least input and output dims");
  for (auto d : dims)
    if (d == 0) throw validation_error("init_params: zero-width layer");
  Mlp mlp;
  mlp.dims = dims;
  Rng rng = make_rng(seed, streams::init);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const double bound = std::sqrt(6.0 / static_cast<double>(dims[l]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix w(dims[l + 1], dims[l]);
    for (double& v : w.values()) v = dist(rng);
    const std::string name = prefix + ".layer" + std::to_string(l);
    mlp.weights.emplace_back(std::move(w), true, name + ".weight");
    mlp.biases.emplace_back(Matrix(1, dims[l + 1]), true, name + ".bias");
  }
  return mlp;
}

/// Per-modality semantic encoder f^m(·; α^m).
struct Encoder {
  Mlp net;
  std::size_t feature_dim() const { return net.output_dim(); }
};

/// Server-side decoder g(·; φ) producing class log-probabilities.
struct Decoder {
  Mlp net;
  std::size_t num_classes() const { return net.output_dim(); }
};

inline Encoder init_encoder(const std::vector<std::size_t>& dims, std::uint64_t seed, std::size_t modality) {
  return Encoder{init_mlp(dims, seed * 1000003ull + modality, "encoder" + std::to_string(modality))};
}

inline Decoder init_decoder(const std::vector<std::size_t>& dims, std::uint64_t seed) {
  return Decoder{init_mlp(dims, seed * 1000003ull + 999, "decoder")};
}

inline Var encode(Graph& g, Encoder& enc, Var x) { return enc.net.forward(g, x); }

inline Var decode(Graph& g, Decoder& dec, Var features) {
  if (features.cols() != dec.net.input_dim())
    throw dimension_error("decode: feature width " + std::to_string(features.cols()) +
                          " but decoder expects " + std::to_string(dec.net.input_dim()));
  return log_softmax(dec.net.forward(g, features));
}

/// Inference-only forward pass, no gradients retained.
inline Matrix encode(const Encoder& enc, const Matrix& x) { return enc.net.predict(x); }

/// Inference-only log-probabilities.
inline Matrix decode(const Decoder& dec, const Matrix& features) {
  Matrix logits = dec.net.predict(features);
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const double lse = detail::row_log_sum_exp(logits.row(r));
    for (double& v : logits.row(r)) v -= lse;
  }
  return logits;
}

struct OptimConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::size_t total_epochs = 1;

  void validate() const {
    if (!(learning_rate > 0.0)) throw validation_error("OptimConfig: learning_rate must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw validation_error("OptimConfig: momentum must be in [0,1)");
    if (!(weight_decay >= 0.0)) throw validation_error("OptimConfig: weight_decay must be >= 0");
    if (total_epochs == 0) throw validation_error("OptimConfig: total_epochs must be >= 1");
  }

  /// Cosine decay: lr₀·½(1 + cos(π·epoch/E_total)).
  double lr_at(double epoch) const {
    return learning_rate * 0.5 *
           (1.0 + std::cos(std::numbers::pi * epoch / static_cast<double>(total_epochs)));
  }
};

/// Momentum SGD with coupled weight decay. Velocity buffers are matched to
/// parameters by position, so callers must pass the same list every step.
class Sgd {
 public:
  explicit Sgd(OptimConfig cfg) : cfg_(cfg) { cfg_.validate(); }

  const OptimConfig& config() const { return cfg_; }

  void step(std::span<Tensor* const> params, double epoch) {
    if (velocity_.empty()) {
      for (const Tensor* p : params) velocity_.emplace_back(p->value.rows(), p->value.cols());
    }
    if (velocity_.size() != params.size())
      throw contract_error("Sgd::step: parameter list changed between steps");
    const double lr = cfg_.lr_at(epoch);
    for (std::size_t k = 0; k < params.size(); ++k) {
      Tensor& p = *params[k];
      if (!p.grad) throw contract_error("Sgd::step: missing gradient for '" + p.name + "'");
      auto v = velocity_[k].values();
      auto w = p.value.values();
      auto gr = p.grad->values();
      for (std::size_t i = 0; i < w.size(); ++i) {
        v[i] = cfg_.momentum * v[i] + gr[i] + cfg_.weight_decay * w[i];
        w[i] -= lr * v[i];
      }
    }
  }

 private:
  OptimConfig cfg_;
  std::vector<Matrix> velocity_;
};

}  // namespace semcom
