#include "intent/config_io.hpp"

#include <fstream>
#include <set>

#include "intent/hash.hpp"

namespace intent {

namespace {

// Strict object reader: every key must be consumed, every value must have
// the right JSON type. Unknown keys fail with their full path.
class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ParseError(msg(path_, ": expected a JSON object"));
  }

  std::string where(const char* key) const { return path_ + "." + key; }

  double number(const char* key, double def) {
    const Json* v = take(key);
    if (!v) return def;
    if (!v->is_number()) throw ParseError(msg(where(key), ": expected a number"));
    return v->get<double>();
  }

  std::int64_t integer(const char* key, std::int64_t def) {
    const Json* v = take(key);
    if (!v) return def;
    if (!v->is_number_integer()) throw ParseError(msg(where(key), ": expected an integer"));
    return v->get<std::int64_t>();
  }

  std::uint64_t unsigned_integer(const char* key, std::uint64_t def) {
    const Json* v = take(key);
    if (!v) return def;
    if (!v->is_number_integer() || (v->is_number_integer() && v->get<std::int64_t>() < 0 &&
                                    !v->is_number_unsigned()))
      throw ParseError(msg(where(key), ": expected a nonnegative integer"));
    return v->get<std::uint64_t>();
  }

  bool boolean(const char* key, bool def) {
    const Json* v = take(key);
    if (!v) return def;
    if (!v->is_boolean()) throw ParseError(msg(where(key), ": expected a boolean"));
    return v->get<bool>();
  }

  std::string text(const char* key, const std::string& def) {
    const Json* v = take(key);
    if (!v) return def;
    if (!v->is_string()) throw ParseError(msg(where(key), ": expected a string"));
    return v->get<std::string>();
  }

  // present-and-null and absent both mean "unset"
  std::optional<double> optional_number(const char* key, std::optional<double> def) {
    const Json* v = take(key);
    if (!v) return def;
    if (v->is_null()) return std::nullopt;
    if (!v->is_number()) throw ParseError(msg(where(key), ": expected a number or null"));
    return v->get<double>();
  }

  std::vector<std::int64_t> integer_list(const char* key, std::vector<std::int64_t> def) {
    const Json* v = take(key);
    if (!v) return def;
    if (!v->is_array()) throw ParseError(msg(where(key), ": expected an array of integers"));
    std::vector<std::int64_t> out;
    for (const Json& e : *v) {
      if (!e.is_number_integer()) throw ParseError(msg(where(key), ": expected an array of integers"));
      out.push_back(e.get<std::int64_t>());
    }
    return out;
  }

  // nullptr when the key is absent; the sub-object is consumed either way
  const Json* object(const char* key) {
    const Json* v = take(key);
    if (!v) return nullptr;
    if (!v->is_object()) throw ParseError(msg(where(key), ": expected an object"));
    return v;
  }

  const Json* raw(const char* key) { return take(key); }

  void done() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw ParseError(msg(path_, ".", key, ": unknown key"));
  }

 private:
  const Json* take(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

Json mask_to_json(const FeatureMask& m) { return Json(m.token()); }

FeatureMask mask_from_json(const Json& j, const std::string& path) {
  if (!j.is_string()) throw ParseError(msg(path, ": expected a mask string such as \"IBPS\""));
  try {
    return parse_mask(j.get<std::string>());
  } catch (const ConfigError& e) {
    throw ParseError(msg(path, ": ", e.what()));
  }
}

Json video_config_to_json(const VideoEncoderConfig& c) {
  Json j;
  j["in_channels"] = c.in_channels;
  j["temporal_groups"] = c.temporal_groups;
  j["stage_channels"] = c.stage_channels;
  j["kernel"] = c.kernel;
  j["feature_dim"] = c.feature_dim;
  j["input_hw"] = c.input_hw;
  j["shift_init_range"] = c.shift_init_range;
  j["shift_lr_multiplier"] = c.shift_lr_multiplier;
  return j;
}

VideoEncoderConfig video_config_from_json(const Json& j, const std::string& path,
                                          const VideoEncoderConfig& base) {
  Reader r(j, path);
  VideoEncoderConfig c = base;
  c.in_channels = r.integer("in_channels", c.in_channels);
  c.temporal_groups = r.integer("temporal_groups", c.temporal_groups);
  c.stage_channels = r.integer_list("stage_channels", c.stage_channels);
  c.kernel = r.integer("kernel", c.kernel);
  c.feature_dim = r.integer("feature_dim", c.feature_dim);
  c.input_hw = r.integer("input_hw", c.input_hw);
  c.shift_init_range = r.number("shift_init_range", c.shift_init_range);
  c.shift_lr_multiplier = r.number("shift_lr_multiplier", c.shift_lr_multiplier);
  r.done();
  return c;
}

Json seq_config_to_json(const SeqEncoderConfig& c) {
  Json j;
  j["d_model"] = c.d_model;
  j["n_layers"] = c.n_layers;
  j["n_heads"] = c.n_heads;
  j["ffn_dim"] = c.ffn_dim;
  j["out_dim"] = c.out_dim;
  j["seq_len"] = c.seq_len;
  j["positional_encoding"] = c.positional_encoding;
  j["ln_eps"] = c.ln_eps;
  return j;
}

SeqEncoderConfig seq_config_from_json(const Json& j, const std::string& path,
                                      const SeqEncoderConfig& base) {
  Reader r(j, path);
  SeqEncoderConfig c = base;
  c.d_model = r.integer("d_model", c.d_model);
  c.n_layers = r.integer("n_layers", c.n_layers);
  c.n_heads = r.integer("n_heads", c.n_heads);
  c.ffn_dim = r.integer("ffn_dim", c.ffn_dim);
  c.out_dim = r.integer("out_dim", c.out_dim);
  c.seq_len = r.integer("seq_len", c.seq_len);
  c.positional_encoding = r.boolean("positional_encoding", c.positional_encoding);
  c.ln_eps = r.number("ln_eps", c.ln_eps);
  r.done();
  return c;
}

Json fusion_config_to_json(const FusionConfig& c) {
  Json j;
  j["mode"] = fusion_mode_name(c.mode);
  j["hidden"] = c.hidden;
  j["dropout"] = c.dropout;
  return j;
}

FusionConfig fusion_config_from_json(const Json& j, const std::string& path,
                                     const FusionConfig& base) {
  Reader r(j, path);
  FusionConfig c = base;
  const std::string mode = r.text("mode", fusion_mode_name(c.mode));
  try {
    c.mode = parse_fusion_mode(mode);
  } catch (const ConfigError& e) {
    throw ParseError(msg(r.where("mode"), ": ", e.what()));
  }
  c.hidden = r.integer("hidden", c.hidden);
  c.dropout = r.number("dropout", c.dropout);
  r.done();
  return c;
}

Json prep_config_to_json(const PrepConfig& c) {
  Json j;
  j["obs_len"] = c.obs_len;
  j["sub_phase"] = c.sub_phase;
  j["crop_height"] = c.crop_height;
  j["crop_width"] = c.crop_width;
  j["pose_dim"] = c.pose_dim;
  j["pixel_min"] = c.pixel_min;
  j["pixel_max"] = c.pixel_max;
  return j;
}

PrepConfig prep_config_from_json(const Json& j, const std::string& path, const PrepConfig& base) {
  Reader r(j, path);
  PrepConfig c = base;
  c.obs_len = r.integer("obs_len", c.obs_len);
  c.sub_phase = r.integer("sub_phase", c.sub_phase);
  c.crop_height = r.integer("crop_height", c.crop_height);
  c.crop_width = r.integer("crop_width", c.crop_width);
  c.pose_dim = r.integer("pose_dim", c.pose_dim);
  c.pixel_min = r.number("pixel_min", c.pixel_min);
  c.pixel_max = r.number("pixel_max", c.pixel_max);
  r.done();
  return c;
}

Json model_config_to_json(const ModelConfig& c) {
  Json j;
  j["mask"] = mask_to_json(c.mask);
  j["video"] = video_config_to_json(c.video);
  j["seq"] = seq_config_to_json(c.seq);
  j["fusion"] = fusion_config_to_json(c.fusion);
  j["prep"] = prep_config_to_json(c.prep);
  return j;
}

ModelConfig model_config_from_json(const Json& j, const std::string& path, const ModelConfig& base) {
  Reader r(j, path);
  ModelConfig c = base;
  if (const Json* m = r.raw("mask")) c.mask = mask_from_json(*m, r.where("mask"));
  if (const Json* v = r.object("video")) c.video = video_config_from_json(*v, r.where("video"), c.video);
  if (const Json* s = r.object("seq")) c.seq = seq_config_from_json(*s, r.where("seq"), c.seq);
  if (const Json* f = r.object("fusion"))
    c.fusion = fusion_config_from_json(*f, r.where("fusion"), c.fusion);
  if (const Json* p = r.object("prep")) c.prep = prep_config_from_json(*p, r.where("prep"), c.prep);
  r.done();
  return c;
}

Json norm_stats_to_json(const NormStats& s) {
  Json j;
  j["speed_mean"] = s.speed_mean;
  j["speed_std"] = s.speed_std;
  j["image_width"] = s.image_width;
  j["image_height"] = s.image_height;
  return j;
}

NormStats norm_stats_from_json(const Json& j, const std::string& path) {
  Reader r(j, path);
  NormStats s;
  s.speed_mean = r.number("speed_mean", s.speed_mean);
  s.speed_std = r.number("speed_std", s.speed_std);
  s.image_width = r.number("image_width", s.image_width);
  s.image_height = r.number("image_height", s.image_height);
  r.done();
  return s;
}

Json train_config_to_json(const TrainConfig& c) {
  Json j;
  j["profile"] = c.profile;
  j["optimizer"] = optim_kind_name(c.optimizer);
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["unified_lr"] = c.unified_lr ? Json(*c.unified_lr) : Json(nullptr);
  j["backbone_lr"] = c.backbone_lr ? Json(*c.backbone_lr) : Json(nullptr);
  j["seq_encoder_lr"] = c.seq_encoder_lr ? Json(*c.seq_encoder_lr) : Json(nullptr);
  j["shift_lr"] = c.shift_lr;
  j["shift_lr_is_multiplier"] = c.shift_lr_is_multiplier;
  j["weight_decay"] = c.weight_decay;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["eps"] = c.eps;
  j["seed"] = c.seed;
  return j;
}

TrainConfig train_config_from_json(const Json& j, const std::string& path, const TrainConfig& base) {
  Reader r(j, path);
  TrainConfig c = base;
  c.profile = r.text("profile", c.profile);
  const std::string opt = r.text("optimizer", optim_kind_name(c.optimizer));
  try {
    c.optimizer = parse_optim_kind(opt);
  } catch (const ConfigError& e) {
    throw ParseError(msg(r.where("optimizer"), ": ", e.what()));
  }
  c.batch_size = r.integer("batch_size", c.batch_size);
  c.epochs = r.integer("epochs", c.epochs);
  c.unified_lr = r.optional_number("unified_lr", c.unified_lr);
  c.backbone_lr = r.optional_number("backbone_lr", c.backbone_lr);
  c.seq_encoder_lr = r.optional_number("seq_encoder_lr", c.seq_encoder_lr);
  c.shift_lr = r.number("shift_lr", c.shift_lr);
  c.shift_lr_is_multiplier = r.boolean("shift_lr_is_multiplier", c.shift_lr_is_multiplier);
  c.weight_decay = r.number("weight_decay", c.weight_decay);
  c.beta1 = r.number("beta1", c.beta1);
  c.beta2 = r.number("beta2", c.beta2);
  c.eps = r.number("eps", c.eps);
  c.seed = r.unsigned_integer("seed", c.seed);
  r.done();
  return c;
}

Json window_params_to_json(const WindowParams& p) {
  Json j;
  j["obs_len"] = p.obs_len;
  j["tte_min"] = p.tte_min;
  j["tte_max"] = p.tte_max;
  j["stride"] = p.stride;
  return j;
}

WindowParams window_params_from_json(const Json& j, const std::string& path,
                                     const WindowParams& base) {
  Reader r(j, path);
  WindowParams p = base;
  p.obs_len = r.integer("obs_len", p.obs_len);
  p.tte_min = r.integer("tte_min", p.tte_min);
  p.tte_max = r.integer("tte_max", p.tte_max);
  p.stride = r.integer("stride", p.stride);
  r.done();
  return p;
}

Json experiment_config_to_json(const ExperimentConfig& c) {
  Json j;
  j["model"] = model_config_to_json(c.model);
  j["train"] = train_config_to_json(c.train);
  j["windows"] = window_params_to_json(c.windows);
  j["data_dir"] = c.data_dir;
  j["frames_root"] = c.frames_root;
  j["out_dir"] = c.out_dir;
  j["split_ratios"] = c.split_ratios;
  j["split_seed"] = c.split_seed;
  return j;
}

ExperimentConfig experiment_config_from_json(const Json& j, const std::string& path,
                                             const ExperimentConfig& base) {
  Reader r(j, path);
  ExperimentConfig c = base;
  if (const Json* m = r.object("model")) c.model = model_config_from_json(*m, r.where("model"), c.model);
  if (const Json* t = r.object("train")) c.train = train_config_from_json(*t, r.where("train"), c.train);
  if (const Json* w = r.object("windows"))
    c.windows = window_params_from_json(*w, r.where("windows"), c.windows);
  c.data_dir = r.text("data_dir", c.data_dir);
  c.frames_root = r.text("frames_root", c.frames_root);
  c.out_dir = r.text("out_dir", c.out_dir);
  if (const Json* s = r.raw("split_ratios")) {
    if (!s->is_array() || s->size() != 3)
      throw ParseError(msg(r.where("split_ratios"), ": expected an array of three numbers"));
    for (std::size_t i = 0; i < 3; ++i) {
      if (!(*s)[i].is_number())
        throw ParseError(msg(r.where("split_ratios"), ": expected an array of three numbers"));
      c.split_ratios[i] = (*s)[i].get<double>();
    }
  }
  c.split_seed = r.unsigned_integer("split_seed", c.split_seed);
  r.done();
  return c;
}

ExperimentConfig load_experiment_config(const std::string& file, const ExperimentConfig& base) {
  std::ifstream in(file);
  if (!in) throw IoError(msg("cannot open config file ", file));
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(msg(file, ": ", e.what()));
  }
  return experiment_config_from_json(j, "config", base);
}

std::uint64_t config_fingerprint(const ModelConfig& c) {
  return fnv1a(model_config_to_json(c).dump());
}

}  // namespace intent
