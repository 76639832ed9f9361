#include "intent/seq_encoder.hpp"

#include <cmath>

namespace intent {

Tensor build_tokens(const Tensor& box_seq, const Tensor& pose_seq, const Tensor& speed_seq,
                    const FeatureMask& mask) {
  if (!mask.any_sequence())
    throw ConfigError("no sequence channel is active; the encoder has no input");
  std::vector<const Tensor*> parts;
  if (mask.boxes) parts.push_back(&box_seq);
  if (mask.pose) parts.push_back(&pose_seq);
  if (mask.speed) parts.push_back(&speed_seq);
  std::int64_t n = -1, width = 0;
  for (const Tensor* p : parts) {
    if (p->rank() != 2) throw ShapeError(msg("sequence channel must be rank-2, got ", shape_str(p->shape())));
    if (n < 0) n = p->shape()[0];
    if (p->shape()[0] != n)
      throw ShapeError(msg("sequence lengths disagree: ", n, " vs ", p->shape()[0]));
    width += p->shape()[1];
  }
  Tensor out({n, width});
  std::int64_t col = 0;
  for (const Tensor* p : parts) {
    const std::int64_t d = p->shape()[1];
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < d; ++j) out.at(i, col + j) = p->at(i, j);
    col += d;
  }
  return out;
}

namespace {

Tensor xavier_uniform(Shape shape, std::int64_t fan_in, std::int64_t fan_out, RandomStream& rng) {
  Tensor t(std::move(shape));
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.vec()) v = rng.uniform(-bound, bound);
  return t;
}

Tensor sinusoidal_table(std::int64_t seq_len, std::int64_t d_model) {
  Tensor pe({seq_len, d_model});
  for (std::int64_t pos = 0; pos < seq_len; ++pos) {
    for (std::int64_t i = 0; i < d_model; i += 2) {
      const double angle =
          static_cast<double>(pos) /
          std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d_model));
      pe.at(pos, i) = std::sin(angle);
      if (i + 1 < d_model) pe.at(pos, i + 1) = std::cos(angle);
    }
  }
  return pe;
}

Var make_linear_params(std::int64_t in, std::int64_t out, RandomStream& rng) {
  return Var::param(xavier_uniform({out, in}, in, out, rng));
}

}  // namespace

SeqEncoder::SeqEncoder(SeqEncoderConfig config, std::int64_t token_width, RandomStream& rng)
    : config_(std::move(config)), token_width_(token_width) {
  if (config_.d_model % config_.n_heads != 0)
    throw ConfigError(msg("model dimension ", config_.d_model, " not divisible by ", config_.n_heads,
                          " heads"));
  if (config_.out_dim < 1) throw ConfigError("encoder output dimension must be positive");
  if (token_width_ < 1) throw ConfigError(msg("token width ", token_width_, " must be positive"));

  const std::int64_t d = config_.d_model;
  proj_w_ = make_linear_params(token_width_, d, rng);
  proj_b_ = Var::param(Tensor(Shape{d}));
  pos_encoding_ = sinusoidal_table(config_.seq_len, d);

  for (std::int64_t l = 0; l < config_.n_layers; ++l) {
    Layer layer;
    layer.wq = make_linear_params(d, d, rng);
    layer.bq = Var::param(Tensor(Shape{d}));
    layer.wk = make_linear_params(d, d, rng);
    layer.bk = Var::param(Tensor(Shape{d}));
    layer.wv = make_linear_params(d, d, rng);
    layer.bv = Var::param(Tensor(Shape{d}));
    layer.wo = make_linear_params(d, d, rng);
    layer.bo = Var::param(Tensor(Shape{d}));
    layer.ln1_g = Var::param(Tensor(Shape{d}, 1.0));
    layer.ln1_b = Var::param(Tensor(Shape{d}));
    layer.ln2_g = Var::param(Tensor(Shape{d}, 1.0));
    layer.ln2_b = Var::param(Tensor(Shape{d}));
    layer.ffn1_w = make_linear_params(d, config_.ffn_dim, rng);
    layer.ffn1_b = Var::param(Tensor(Shape{config_.ffn_dim}));
    layer.ffn2_w = make_linear_params(config_.ffn_dim, d, rng);
    layer.ffn2_b = Var::param(Tensor(Shape{d}));
    layers_.push_back(std::move(layer));
  }
  final_ln_g_ = Var::param(Tensor(Shape{d}, 1.0));
  final_ln_b_ = Var::param(Tensor(Shape{d}));
  out_w_ = make_linear_params(d, config_.out_dim, rng);
  out_b_ = Var::param(Tensor(Shape{config_.out_dim}));
}

Var SeqEncoder::forward(const Tensor& tokens, EncoderTrace* trace) const {
  const Shape want{config_.seq_len, token_width_};
  if (!(tokens.shape() == want))
    throw ShapeError(msg("sequence encoder expected ", shape_str(want), ", got ",
                         shape_str(tokens.shape())));
  if (!tokens.all_finite()) throw ValidationError("sequence encoder got non-finite tokens");

  const std::int64_t d = config_.d_model;
  const std::int64_t heads = config_.n_heads;
  const std::int64_t dh = d / heads;
  const double scale_factor = 1.0 / std::sqrt(static_cast<double>(dh));

  Var x = linear(Var::constant(tokens), proj_w_, proj_b_);
  if (config_.positional_encoding) x = add(x, Var::constant(pos_encoding_));

  for (std::size_t li = 0; li < layers_.size(); ++li) {
    const Layer& L = layers_[li];
    const Var q = linear(x, L.wq, L.bq);
    const Var k = linear(x, L.wk, L.bk);
    const Var v = linear(x, L.wv, L.bv);
    std::vector<Var> head_outs;
    head_outs.reserve(static_cast<std::size_t>(heads));
    for (std::int64_t h = 0; h < heads; ++h) {
      const Var qh = slice_cols(q, h * dh, (h + 1) * dh);
      const Var kh = slice_cols(k, h * dh, (h + 1) * dh);
      const Var vh = slice_cols(v, h * dh, (h + 1) * dh);
      const Var weights = softmax_rows(scale(matmul_nt(qh, kh), scale_factor));
      if (trace) trace->attention.push_back(weights.value());
      head_outs.push_back(matmul(weights, vh));
    }
    const Var attn = linear(concat_cols(head_outs), L.wo, L.bo);
    x = layer_norm(add(x, attn), L.ln1_g, L.ln1_b, config_.ln_eps);
    const Var ffn = linear(relu(linear(x, L.ffn1_w, L.ffn1_b)), L.ffn2_w, L.ffn2_b);
    x = layer_norm(add(x, ffn), L.ln2_g, L.ln2_b, config_.ln_eps);
    if (!x.value().all_finite())
      throw DivergenceError(msg("non-finite activations after encoder layer ", li));
  }

  Var pooled = mean_rows(x);
  if (trace) {
    double nrm = 0.0;
    for (std::int64_t i = 0; i < pooled.value().numel(); ++i)
      nrm += pooled.value()[i] * pooled.value()[i];
    trace->pooled_norm = std::sqrt(nrm);
  }
  pooled = layer_norm(pooled, final_ln_g_, final_ln_b_, config_.ln_eps);
  return linear(pooled, out_w_, out_b_);
}

std::vector<std::pair<std::string, Var>> SeqEncoder::named_parameters() const {
  std::vector<std::pair<std::string, Var>> out;
  out.emplace_back("seq.proj.weight", proj_w_);
  out.emplace_back("seq.proj.bias", proj_b_);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const std::string base = msg("seq.layer", i, ".");
    const Layer& L = layers_[i];
    out.emplace_back(base + "attn.q.weight", L.wq);
    out.emplace_back(base + "attn.q.bias", L.bq);
    out.emplace_back(base + "attn.k.weight", L.wk);
    out.emplace_back(base + "attn.k.bias", L.bk);
    out.emplace_back(base + "attn.v.weight", L.wv);
    out.emplace_back(base + "attn.v.bias", L.bv);
    out.emplace_back(base + "attn.out.weight", L.wo);
    out.emplace_back(base + "attn.out.bias", L.bo);
    out.emplace_back(base + "ln1.gamma", L.ln1_g);
    out.emplace_back(base + "ln1.beta", L.ln1_b);
    out.emplace_back(base + "ln2.gamma", L.ln2_g);
    out.emplace_back(base + "ln2.beta", L.ln2_b);
    out.emplace_back(base + "ffn1.weight", L.ffn1_w);
    out.emplace_back(base + "ffn1.bias", L.ffn1_b);
    out.emplace_back(base + "ffn2.weight", L.ffn2_w);
    out.emplace_back(base + "ffn2.bias", L.ffn2_b);
  }
  out.emplace_back("seq.final_ln.gamma", final_ln_g_);
  out.emplace_back("seq.final_ln.beta", final_ln_b_);
  out.emplace_back("seq.out.weight", out_w_);
  out.emplace_back("seq.out.bias", out_b_);
  return out;
}

std::int64_t SeqEncoder::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& [name, v] : named_parameters()) n += v.value().numel();
  return n;
}

}  // namespace intent
