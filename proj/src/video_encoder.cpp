#include "intent/video_encoder.hpp"

#include <cmath>

namespace intent {

namespace {

Tensor he_normal(Shape shape, std::int64_t fan_in, RandomStream& rng) {
  Tensor t(std::move(shape));
  const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (auto& v : t.vec()) v = rng.normal(0.0, std);
  return t;
}

Tensor xavier_uniform(Shape shape, std::int64_t fan_in, std::int64_t fan_out, RandomStream& rng) {
  Tensor t(std::move(shape));
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.vec()) v = rng.uniform(-bound, bound);
  return t;
}

}  // namespace

VideoEncoder::VideoEncoder(VideoEncoderConfig config, RandomStream& rng) : config_(std::move(config)) {
  if (config_.stage_channels.empty()) throw ConfigError("video encoder needs at least one stage");
  if (config_.feature_dim < 1) throw ConfigError("video feature dimension must be positive");
  if (config_.kernel % 2 != 1) throw ConfigError(msg("conv kernel ", config_.kernel, " must be odd"));
  const std::int64_t down = std::int64_t{1} << config_.stage_channels.size();
  if (config_.input_hw % down != 0)
    throw ConfigError(msg("input size ", config_.input_hw, " not divisible by total stride ", down));
  std::int64_t cin = config_.in_channels;
  for (std::size_t i = 0; i < config_.stage_channels.size(); ++i) {
    if (cin % config_.temporal_groups != 0)
      throw ConfigError(msg("stage ", i, " input channels ", cin, " not divisible by temporal groups ",
                            config_.temporal_groups));
    const std::int64_t cout = config_.stage_channels[i];
    Stage s;
    s.cin = cin;
    s.cout = cout;
    Tensor off({cin, 3});
    for (auto& v : off.vec()) v = rng.uniform(-config_.shift_init_range, config_.shift_init_range);
    s.shift_offsets = Var::param(std::move(off));
    const std::int64_t k = config_.kernel;
    s.conv1_w = Var::param(he_normal({cout, cin, k, k}, cin * k * k, rng));
    s.conv1_b = Var::param(Tensor(Shape{cout}));
    s.conv2_w = Var::param(he_normal({cout, cout, k, k}, cout * k * k, rng));
    s.conv2_b = Var::param(Tensor(Shape{cout}));
    stages_.push_back(std::move(s));
    cin = cout;
  }
  head_w_ = Var::param(xavier_uniform({config_.feature_dim, cin}, cin, config_.feature_dim, rng));
  head_b_ = Var::param(Tensor(Shape{config_.feature_dim}));
}

Var VideoEncoder::forward(const Tensor& stack) const {
  const Shape want{config_.in_channels, config_.input_hw, config_.input_hw};
  if (!(stack.shape() == want))
    throw ShapeError(msg("video encoder expected ", shape_str(want), ", got ", shape_str(stack.shape())));
  const std::int64_t pad = (config_.kernel - 1) / 2;
  Var x = Var::constant(stack);
  for (const Stage& s : stages_) {
    x = shift3d(x, s.shift_offsets, config_.temporal_groups);
    x = relu(conv2d(x, s.conv1_w, s.conv1_b, 2, pad));
    x = relu(conv2d(x, s.conv2_w, s.conv2_b, 1, pad));
  }
  return linear(global_avg_pool(x), head_w_, head_b_);
}

Var VideoEncoder::forward_batch(const std::vector<const Tensor*>& stacks) const {
  if (stacks.empty()) throw ShapeError("video encoder got an empty batch");
  std::vector<Var> rows;
  rows.reserve(stacks.size());
  for (const Tensor* s : stacks) rows.push_back(forward(*s));
  return rows.size() == 1 ? rows[0] : concat_rows(rows);
}

std::vector<std::pair<std::string, Var>> VideoEncoder::named_parameters() const {
  std::vector<std::pair<std::string, Var>> out;
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    const std::string base = msg("video.stage", i + 1, ".");
    out.emplace_back(base + "shift.offsets", stages_[i].shift_offsets);
    out.emplace_back(base + "conv1.weight", stages_[i].conv1_w);
    out.emplace_back(base + "conv1.bias", stages_[i].conv1_b);
    out.emplace_back(base + "conv2.weight", stages_[i].conv2_w);
    out.emplace_back(base + "conv2.bias", stages_[i].conv2_b);
  }
  out.emplace_back("video.head.weight", head_w_);
  out.emplace_back("video.head.bias", head_b_);
  return out;
}

std::int64_t VideoEncoder::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& [name, v] : named_parameters()) n += v.value().numel();
  return n;
}

}  // namespace intent
