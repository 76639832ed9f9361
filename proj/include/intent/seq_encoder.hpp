#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "intent/autograd.hpp"
#include "intent/mask.hpp"
#include "intent/rng.hpp"

namespace intent {

struct SeqEncoderConfig {
  std::int64_t d_model = 64;
  std::int64_t n_layers = 2;
  std::int64_t n_heads = 4;
  std::int64_t ffn_dim = 256;
  std::int64_t out_dim = 128;  // G
  std::int64_t seq_len = 16;
  bool positional_encoding = true;
  double ln_eps = 1e-5;

  bool operator==(const SeqEncoderConfig&) const = default;
};

// Per-timestep concatenation of the active non-image channels.
// Column order: boxes, pose, speed.
Tensor build_tokens(const Tensor& box_seq, const Tensor& pose_seq, const Tensor& speed_seq,
                    const FeatureMask& mask);

// Optional look inside a forward pass.
struct EncoderTrace {
  // attention[layer * n_heads + head] is the seq_len x seq_len weight matrix
  std::vector<Tensor> attention;
  double pooled_norm = 0.0;
};

// Pre-norm-free ("post-LN") transformer encoder: self-attention and
// feed-forward sublayers with residual connections, mean over positions,
// layer norm, linear map to out_dim.
class SeqEncoder {
 public:
  SeqEncoder(SeqEncoderConfig config, std::int64_t token_width, RandomStream& rng);

  // tokens: seq_len x token_width -> [1, out_dim]
  Var forward(const Tensor& tokens, EncoderTrace* trace = nullptr) const;

  std::vector<std::pair<std::string, Var>> named_parameters() const;
  std::int64_t parameter_count() const;
  const SeqEncoderConfig& config() const { return config_; }
  std::int64_t token_width() const { return token_width_; }

 private:
  struct Layer {
    Var wq, bq, wk, bk, wv, bv, wo, bo;
    Var ln1_g, ln1_b, ln2_g, ln2_b;
    Var ffn1_w, ffn1_b, ffn2_w, ffn2_b;
  };
  SeqEncoderConfig config_;
  std::int64_t token_width_ = 0;
  Var proj_w_, proj_b_;
  Tensor pos_encoding_;  // seq_len x d_model, fixed sinusoidal table
  std::vector<Layer> layers_;
  Var final_ln_g_, final_ln_b_;
  Var out_w_, out_b_;
};

}  // namespace intent
