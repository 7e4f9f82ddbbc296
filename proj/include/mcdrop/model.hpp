#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <limits>
#include <optional>
#include <type_traits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mcdrop/dropout.hpp"
#include "mcdrop/error.hpp"
#include "mcdrop/rng.hpp"
#include "mcdrop/tokenizer.hpp"

namespace mcdrop {

struct ModelConfig {
  std::size_t n_layers = 4;
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t d_ff = 256;
  std::size_t n_t = 27;
  std::size_t max_len = 512;
  double ln_eps = 1e-5;

  void validate() const {
    if (n_layers == 0) throw ConfigError("n_layers must be positive");
    if (d_model == 0) throw ConfigError("d_model must be positive");
    if (n_heads == 0) throw ConfigError("n_heads must be positive");
    if (d_model % n_heads != 0)
      throw ConfigError("n_heads (" + std::to_string(n_heads) + ") must divide d_model (" +
                        std::to_string(d_model) + ")");
    if (d_ff == 0) throw ConfigError("d_ff must be positive");
    if (n_t < 2) throw ConfigError("n_t must be at least 2");
    if (max_len == 0) throw ConfigError("max_len must be positive");
    if (!(ln_eps > 0.0) || !std::isfinite(ln_eps)) throw ConfigError("ln_eps must be positive");
  }

  std::size_t head_dim() const noexcept { return d_model / n_heads; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct LayerParameters {
  RowVector ln1_gain, ln1_bias;
  Matrix wq, wk, wv, wo;  // d_model x d_model, applied as x * W
  RowVector ln2_gain, ln2_bias;
  Matrix w1;  // d_model x d_ff
  RowVector b1;
  Matrix w2;  // d_ff x d_model
  RowVector b2;
};

struct Parameters {
  ModelConfig config;
  Matrix token_embedding;       // n_t x d_model
  Matrix positional_embedding;  // max_len x d_model
  std::vector<LayerParameters> layers;
  RowVector final_ln_gain, final_ln_bias;
  Matrix head;  // d_model x n_t
  RowVector head_bias;
};

enum class TensorRole { kWeight, kGain, kBias };

// Flat view of one named tensor; `data` points at row-major storage.
template <typename Scalar>
struct TensorView {
  std::string name;
  std::vector<std::size_t> dims;
  TensorRole role;
  Scalar* data;

  std::size_t element_count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

namespace detail {

template <typename Scalar, typename M>
TensorView<Scalar> matrix_view(std::string name, M& m, TensorRole role) {
  return {std::move(name),
          {static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())},
          role,
          m.data()};
}

template <typename Scalar, typename V>
TensorView<Scalar> vector_view(std::string name, V& v, TensorRole role) {
  return {std::move(name), {static_cast<std::size_t>(v.size())}, role, v.data()};
}

template <typename P, typename Fn>
void visit_tensors(P& p, Fn&& fn) {
  using Scalar = std::conditional_t<std::is_const_v<P>, const double, double>;
  fn(matrix_view<Scalar>("token_embedding", p.token_embedding, TensorRole::kWeight));
  fn(matrix_view<Scalar>("positional_embedding", p.positional_embedding, TensorRole::kWeight));
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    auto& l = p.layers[i];
    const std::string prefix = "layers." + std::to_string(i) + ".";
    fn(vector_view<Scalar>(prefix + "ln1.gain", l.ln1_gain, TensorRole::kGain));
    fn(vector_view<Scalar>(prefix + "ln1.bias", l.ln1_bias, TensorRole::kBias));
    fn(matrix_view<Scalar>(prefix + "attn.wq", l.wq, TensorRole::kWeight));
    fn(matrix_view<Scalar>(prefix + "attn.wk", l.wk, TensorRole::kWeight));
    fn(matrix_view<Scalar>(prefix + "attn.wv", l.wv, TensorRole::kWeight));
    fn(matrix_view<Scalar>(prefix + "attn.wo", l.wo, TensorRole::kWeight));
    fn(vector_view<Scalar>(prefix + "ln2.gain", l.ln2_gain, TensorRole::kGain));
    fn(vector_view<Scalar>(prefix + "ln2.bias", l.ln2_bias, TensorRole::kBias));
    fn(matrix_view<Scalar>(prefix + "mlp.w1", l.w1, TensorRole::kWeight));
    fn(vector_view<Scalar>(prefix + "mlp.b1", l.b1, TensorRole::kBias));
    fn(matrix_view<Scalar>(prefix + "mlp.w2", l.w2, TensorRole::kWeight));
    fn(vector_view<Scalar>(prefix + "mlp.b2", l.b2, TensorRole::kBias));
  }
  fn(vector_view<Scalar>("final_ln.gain", p.final_ln_gain, TensorRole::kGain));
  fn(vector_view<Scalar>("final_ln.bias", p.final_ln_bias, TensorRole::kBias));
  fn(matrix_view<Scalar>("head.weight", p.head, TensorRole::kWeight));
  fn(vector_view<Scalar>("head.bias", p.head_bias, TensorRole::kBias));
}

}  // namespace detail

// Visits every tensor in the canonical (file) order.
template <typename Fn>
void for_each_tensor(Parameters& p, Fn&& fn) {
  detail::visit_tensors(p, std::forward<Fn>(fn));
}
template <typename Fn>
void for_each_tensor(const Parameters& p, Fn&& fn) {
  detail::visit_tensors(p, std::forward<Fn>(fn));
}

// Zero-filled parameters with the shapes dictated by `config`.
inline Parameters allocate_parameters(const ModelConfig& config) {
  config.validate();
  const auto d = static_cast<Eigen::Index>(config.d_model);
  const auto f = static_cast<Eigen::Index>(config.d_ff);
  const auto t = static_cast<Eigen::Index>(config.n_t);
  Parameters p;
  p.config = config;
  p.token_embedding = Matrix::Zero(t, d);
  p.positional_embedding = Matrix::Zero(static_cast<Eigen::Index>(config.max_len), d);
  p.layers.resize(config.n_layers);
  for (auto& l : p.layers) {
    l.ln1_gain = RowVector::Zero(d);
    l.ln1_bias = RowVector::Zero(d);
    l.wq = Matrix::Zero(d, d);
    l.wk = Matrix::Zero(d, d);
    l.wv = Matrix::Zero(d, d);
    l.wo = Matrix::Zero(d, d);
    l.ln2_gain = RowVector::Zero(d);
    l.ln2_bias = RowVector::Zero(d);
    l.w1 = Matrix::Zero(d, f);
    l.b1 = RowVector::Zero(f);
    l.w2 = Matrix::Zero(f, d);
    l.b2 = RowVector::Zero(d);
  }
  p.final_ln_gain = RowVector::Zero(d);
  p.final_ln_bias = RowVector::Zero(d);
  p.head = Matrix::Zero(d, t);
  p.head_bias = RowVector::Zero(t);
  return p;
}

inline constexpr double kInitStd = 0.02;

// Weights ~ N(0, 0.02^2) drawn tensor by tensor in canonical order, each
// tensor row-major; layer-norm gains 1, biases 0.
inline Parameters init_random(const ModelConfig& config, std::uint64_t seed) {
  Parameters p = allocate_parameters(config);
  Rng rng(seed);
  for_each_tensor(p, [&](const TensorView<double>& t) {
    const std::size_t n = t.element_count();
    switch (t.role) {
      case TensorRole::kWeight:
        for (std::size_t i = 0; i < n; ++i) t.data[i] = rng.normal(0.0, kInitStd);
        break;
      case TensorRole::kGain:
        std::fill_n(t.data, n, 1.0);
        break;
      case TensorRole::kBias:
        std::fill_n(t.data, n, 0.0);
        break;
    }
  });
  return p;
}

// Bitwise comparison of config and every tensor.
inline bool bit_identical(const Parameters& a, const Parameters& b) {
  if (!(a.config == b.config)) return false;
  std::vector<TensorView<const double>> ta, tb;
  for_each_tensor(a, [&](const TensorView<const double>& t) { ta.push_back(t); });
  for_each_tensor(b, [&](const TensorView<const double>& t) { tb.push_back(t); });
  if (ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (ta[i].name != tb[i].name || ta[i].dims != tb[i].dims) return false;
    if (std::memcmp(ta[i].data, tb[i].data, ta[i].element_count() * sizeof(double)) != 0)
      return false;
  }
  return true;
}

// n_a x n_t natural-log probabilities.
struct LogProbMatrix {
  Matrix values;

  std::size_t rows() const noexcept { return static_cast<std::size_t>(values.rows()); }
  std::size_t cols() const noexcept { return static_cast<std::size_t>(values.cols()); }
  double operator()(std::size_t i, std::size_t j) const {
    return values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
};

namespace detail {

inline void check_tokens(const Parameters& p, const TokenSequence& tokens) {
  if (tokens.empty()) throw EmptyInput("token sequence is empty");
  if (tokens.size() > p.config.max_len) throw SequenceTooLong(tokens.size(), p.config.max_len);
  for (TokenId id : tokens.ids)
    if (id < 0 || static_cast<std::size_t>(id) >= p.config.n_t) throw InvalidTokenId(id);
}

inline void layer_norm(const Matrix& x, const RowVector& gain, const RowVector& bias, double eps,
                       Matrix& out) {
  out.resize(x.rows(), x.cols());
  const double inv_d = 1.0 / static_cast<double>(x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto row = x.row(i);
    const double mean = row.sum() * inv_d;
    const double var = (row.array() - mean).square().sum() * inv_d;
    const double inv_std = 1.0 / std::sqrt(var + eps);
    out.row(i) = ((row.array() - mean) * inv_std * gain.array() + bias.array()).matrix();
  }
}

inline void softmax_rows(Matrix& s) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    auto row = s.row(i);
    const double m = row.maxCoeff();
    row = (row.array() - m).exp().matrix();
    row /= row.sum();
  }
}

inline double gelu(double v) { return 0.5 * v * (1.0 + std::erf(v * 0.70710678118654752440)); }

// Scratch buffers reused across layers of one pass.
struct Workspace {
  Matrix h, q, k, v, scores, attn, u;
};

// Multi-head self-attention on normalized input `h`; adds its output into x.
// Keys holding PAD are excluded unless every key is PAD. When `probe_head`
// is set, that head's attention matrix is copied into `probe_out`.
inline void attention_block(const LayerParameters& l, const ModelConfig& cfg,
                            const TokenSequence& tokens, Workspace& ws, Matrix& x,
                            std::optional<std::size_t> probe_head = std::nullopt,
                            Matrix* probe_out = nullptr) {
  const auto n = x.rows();
  const auto dh = static_cast<Eigen::Index>(cfg.head_dim());
  ws.q.noalias() = ws.h * l.wq;
  ws.k.noalias() = ws.h * l.wk;
  ws.v.noalias() = ws.h * l.wv;
  ws.attn.resize(n, x.cols());

  std::vector<Eigen::Index> pad_keys;
  for (Eigen::Index j = 0; j < n; ++j)
    if (tokens.ids[static_cast<std::size_t>(j)] == Vocabulary::kPad) pad_keys.push_back(j);
  if (static_cast<Eigen::Index>(pad_keys.size()) == n) pad_keys.clear();

  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (std::size_t h = 0; h < cfg.n_heads; ++h) {
    const auto c0 = static_cast<Eigen::Index>(h) * dh;
    ws.scores.noalias() = ws.q.middleCols(c0, dh) * ws.k.middleCols(c0, dh).transpose();
    ws.scores *= scale;
    for (Eigen::Index j : pad_keys) ws.scores.col(j).setConstant(-std::numeric_limits<double>::infinity());
    softmax_rows(ws.scores);
    if (probe_head && *probe_head == h && probe_out != nullptr) *probe_out = ws.scores;
    ws.attn.middleCols(c0, dh).noalias() = ws.scores * ws.v.middleCols(c0, dh);
  }
  x.noalias() += ws.attn * l.wo;
}

inline void mlp_block(const LayerParameters& l, Workspace& ws, Matrix& x) {
  ws.u.noalias() = ws.h * l.w1;
  ws.u.rowwise() += l.b1;
  ws.u = ws.u.unaryExpr([](double v) { return gelu(v); });
  x.noalias() += ws.u * l.w2;
  x.rowwise() += l.b2;
}

}  // namespace detail

// Row i = token_embedding[ids[i]] + positional_embedding[i].
inline Matrix embed(const Parameters& p, const TokenSequence& tokens) {
  detail::check_tokens(p, tokens);
  const auto n = static_cast<Eigen::Index>(tokens.size());
  Matrix x(n, static_cast<Eigen::Index>(p.config.d_model));
  for (Eigen::Index i = 0; i < n; ++i)
    x.row(i) = p.token_embedding.row(tokens.ids[static_cast<std::size_t>(i)]) +
               p.positional_embedding.row(i);
  return x;
}

// Pre-layer-norm transformer up to the output head. With a plan of positive
// rate, dropout is drawn from `rng` at the embedding output and then after
// each planned layer, in that order.
inline Matrix forward_logits(const Parameters& p, const TokenSequence& tokens,
                             const InjectionPlan* plan, Rng* rng) {
  Matrix x = embed(p, tokens);
  const ModelConfig& cfg = p.config;

  std::vector<bool> drop_after(cfg.n_layers, false);
  const bool inject = plan != nullptr && plan->rate > 0.0;
  if (plan != nullptr) {
    plan->validate();
    for (std::size_t l : plan->layer_sites(cfg.n_layers)) drop_after[l] = true;
  }
  if (inject && rng == nullptr) throw ConfigError("dropout injection requires a generator");

  if (inject) apply_dropout_inplace(x, plan->rate, *rng);

  detail::Workspace ws;
  for (std::size_t li = 0; li < cfg.n_layers; ++li) {
    const LayerParameters& l = p.layers[li];
    detail::layer_norm(x, l.ln1_gain, l.ln1_bias, cfg.ln_eps, ws.h);
    detail::attention_block(l, cfg, tokens, ws, x);
    detail::layer_norm(x, l.ln2_gain, l.ln2_bias, cfg.ln_eps, ws.h);
    detail::mlp_block(l, ws, x);
    if (inject && drop_after[li]) apply_dropout_inplace(x, plan->rate, *rng);
  }

  detail::layer_norm(x, p.final_ln_gain, p.final_ln_bias, cfg.ln_eps, ws.h);
  Matrix logits = ws.h * p.head;
  logits.rowwise() += p.head_bias;
  return logits;
}

// Row-wise log-softmax in the max-subtracted form.
inline LogProbMatrix log_softmax_rows(Matrix logits) {
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    auto row = logits.row(i);
    const double m = row.maxCoeff();
    const double lse = m + std::log((row.array() - m).exp().sum());
    row.array() -= lse;
  }
  return {std::move(logits)};
}

inline LogProbMatrix forward(const Parameters& p, const TokenSequence& tokens,
                             const std::optional<InjectionPlan>& plan, Rng& rng) {
  return log_softmax_rows(forward_logits(p, tokens, plan ? &*plan : nullptr, &rng));
}

// Deterministic pass, no dropout.
inline LogProbMatrix forward(const Parameters& p, const TokenSequence& tokens) {
  return log_softmax_rows(forward_logits(p, tokens, nullptr, nullptr));
}

// Post-softmax attention weights of one head in one layer (no dropout).
inline Matrix attention_weights_probe(const Parameters& p, const TokenSequence& tokens,
                                      std::size_t layer, std::size_t head) {
  const ModelConfig& cfg = p.config;
  if (layer >= cfg.n_layers)
    throw InvalidInjectionSite("layer " + std::to_string(layer) + " out of range (n_layers = " +
                               std::to_string(cfg.n_layers) + ")");
  if (head >= cfg.n_heads)
    throw InvalidInjectionSite("head " + std::to_string(head) + " out of range (n_heads = " +
                               std::to_string(cfg.n_heads) + ")");
  Matrix x = embed(p, tokens);
  detail::Workspace ws;
  Matrix probe;
  for (std::size_t li = 0; li <= layer; ++li) {
    const LayerParameters& l = p.layers[li];
    detail::layer_norm(x, l.ln1_gain, l.ln1_bias, cfg.ln_eps, ws.h);
    if (li == layer) {
      detail::attention_block(l, cfg, tokens, ws, x, head, &probe);
      break;
    }
    detail::attention_block(l, cfg, tokens, ws, x);
    detail::layer_norm(x, l.ln2_gain, l.ln2_bias, cfg.ln_eps, ws.h);
    detail::mlp_block(l, ws, x);
  }
  return probe;
}

}  // namespace mcdrop
