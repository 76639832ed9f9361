#include "intent/fusion.hpp"

#include <cmath>

namespace intent {

std::string fusion_mode_name(FusionMode mode) {
  return mode == FusionMode::kConcat ? "concat" : "attention";
}

FusionMode parse_fusion_mode(const std::string& name) {
  if (name == "concat") return FusionMode::kConcat;
  if (name == "attention") return FusionMode::kAttention;
  throw ConfigError(msg("unknown fusion mode '", name, "', expected concat or attention"));
}

namespace {

Tensor xavier_uniform(Shape shape, std::int64_t fan_in, std::int64_t fan_out, RandomStream& rng) {
  Tensor t(std::move(shape));
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.vec()) v = rng.uniform(-bound, bound);
  return t;
}

}  // namespace

IntentModel::IntentModel(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  if (!config_.mask.any()) throw ConfigError("feature mask enables no channel");
  if (config_.fusion.dropout < 0.0 || config_.fusion.dropout >= 1.0)
    throw ConfigError(msg("dropout ", config_.fusion.dropout, " outside [0,1)"));
  if (config_.prep.stack_channels() != config_.video.in_channels && config_.mask.images)
    throw ConfigError(msg("preprocessing emits ", config_.prep.stack_channels(),
                          " stacked channels but the video encoder expects ",
                          config_.video.in_channels));

  RandomStream root(seed);
  RandomStream video_rng = root.fork(1);
  RandomStream seq_rng = root.fork(2);
  RandomStream fusion_rng = root.fork(3);

  std::int64_t head_in = 0;
  if (config_.mask.images) {
    video_ = std::make_unique<VideoEncoder>(config_.video, video_rng);
    head_in += config_.video.feature_dim;
  }
  if (config_.mask.any_sequence()) {
    const std::int64_t width =
        config_.mask.token_width(4, config_.prep.pose_dim, 1);
    SeqEncoderConfig sc = config_.seq;
    sc.seq_len = config_.prep.obs_len;
    seq_ = std::make_unique<SeqEncoder>(sc, width, seq_rng);
    head_in += config_.seq.out_dim;
  }

  if (config_.fusion.mode == FusionMode::kAttention) {
    if (!video_ || !seq_)
      throw ConfigError("attention fusion needs both branches; use concat for single-branch masks");
    if (config_.video.feature_dim != config_.seq.out_dim)
      throw ConfigError(msg("attention fusion mixes the two feature vectors, so their widths must ",
                            "match: video ", config_.video.feature_dim, " vs sequence ",
                            config_.seq.out_dim));
    attn_w_ = Var::param(xavier_uniform({config_.seq.out_dim, config_.video.feature_dim},
                                        config_.seq.out_dim, config_.video.feature_dim, fusion_rng));
    head_in = config_.video.feature_dim;  // head consumes the mixed vector
  }

  fc1_w_ = Var::param(xavier_uniform({config_.fusion.hidden, head_in}, head_in, config_.fusion.hidden,
                                     fusion_rng));
  fc1_b_ = Var::param(Tensor(Shape{config_.fusion.hidden}));
  fc2_w_ = Var::param(xavier_uniform({1, config_.fusion.hidden}, config_.fusion.hidden, 1, fusion_rng));
  fc2_b_ = Var::param(Tensor(Shape{1}));
}

Var IntentModel::fuse(std::optional<Var> v, std::optional<Var> s, Mode mode,
                      RandomStream* dropout_rng) const {
  if (!v && !s) throw ConfigError("fusion got no inputs");
  Var head_in;
  if (config_.fusion.mode == FusionMode::kAttention) {
    // many-to-one multiplicative attention: the sequence feature queries
    // the two candidate vectors, the softmax mixes them
    const Var q = matmul(*s, attn_w_);          // [1, F]
    const Var score_v = matmul_nt(q, *v);       // [1, 1]
    const Var score_s = matmul_nt(q, *s);       // [1, 1]
    const Var weights = softmax_rows(concat_cols({score_v, score_s}));  // [1, 2]
    const Var wv = slice_cols(weights, 0, 1);
    const Var ws = slice_cols(weights, 1, 2);
    head_in = add(scale_by(*v, wv), scale_by(*s, ws));
  } else if (v && s) {
    head_in = concat_cols({*v, *s});
  } else {
    head_in = v ? *v : *s;
  }

  Var h = linear(head_in, fc1_w_, fc1_b_);
  if (mode == Mode::kTrain && config_.fusion.dropout > 0.0) {
    if (!dropout_rng) throw ConfigError("training-mode forward needs a dropout random stream");
    h = dropout(h, config_.fusion.dropout, *dropout_rng, mode);
  }
  h = relu(h);
  return linear(h, fc2_w_, fc2_b_);
}

Var IntentModel::forward(const FeatureBundle& bundle, Mode mode, RandomStream* dropout_rng,
                         EncoderTrace* trace) const {
  if (!(bundle.mask == config_.mask))
    throw ConfigError(msg("bundle mask '", bundle.mask.token(), "' does not match model mask '",
                          config_.mask.token(), "'"));
  std::optional<Var> v, s;
  if (video_) v = video_->forward(bundle.video_stack);
  if (seq_) {
    const Tensor tokens = build_tokens(bundle.box_seq, bundle.pose_seq, bundle.speed_seq, config_.mask);
    s = seq_->forward(tokens, trace);
  }
  return fuse(std::move(v), std::move(s), mode, dropout_rng);
}

std::vector<std::pair<std::string, Var>> IntentModel::named_parameters() const {
  std::vector<std::pair<std::string, Var>> out;
  if (video_) {
    auto sub = video_->named_parameters();
    out.insert(out.end(), sub.begin(), sub.end());
  }
  if (seq_) {
    auto sub = seq_->named_parameters();
    out.insert(out.end(), sub.begin(), sub.end());
  }
  if (attn_w_.defined()) out.emplace_back("fusion.attn.weight", attn_w_);
  out.emplace_back("fusion.fc1.weight", fc1_w_);
  out.emplace_back("fusion.fc1.bias", fc1_b_);
  out.emplace_back("fusion.fc2.weight", fc2_w_);
  out.emplace_back("fusion.fc2.bias", fc2_b_);
  return out;
}

std::int64_t IntentModel::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& [name, v] : named_parameters()) n += v.value().numel();
  return n;
}

}  // namespace intent
