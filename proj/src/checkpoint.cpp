#include "intent/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include "intent/config_io.hpp"

namespace intent {

namespace {

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t read_u32(std::istream& is, const std::string& path) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw ParseError(msg(path, ": truncated checkpoint"));
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::istream& is, const std::string& path) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw ParseError(msg(path, ": truncated checkpoint"));
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

Json meta_to_json(const CheckpointMeta& meta) {
  Json j;
  j["model"] = model_config_to_json(meta.model);
  j["stats"] = norm_stats_to_json(meta.stats);
  j["class_weight"] = meta.class_weight;
  j["profile"] = meta.profile;
  j["seed"] = meta.seed;
  j["epoch"] = meta.epoch;
  j["split_ratios"] = meta.split_ratios;
  j["split_seed"] = meta.split_seed;
  j["windows"] = window_params_to_json(meta.windows);
  return j;
}

CheckpointMeta meta_from_json(const Json& j, const std::string& path) {
  if (!j.is_object()) throw ParseError(msg(path, ": header is not a JSON object"));
  CheckpointMeta meta;
  if (!j.contains("model")) throw ParseError(msg(path, ": header lacks the model config"));
  meta.model = model_config_from_json(j.at("model"), path + ":model");
  if (j.contains("stats")) meta.stats = norm_stats_from_json(j.at("stats"), path + ":stats");
  if (j.contains("class_weight")) meta.class_weight = j.at("class_weight").get<double>();
  if (j.contains("profile")) meta.profile = j.at("profile").get<std::string>();
  if (j.contains("seed")) meta.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("epoch")) meta.epoch = j.at("epoch").get<std::int64_t>();
  if (j.contains("split_ratios")) {
    const Json& r = j.at("split_ratios");
    if (!r.is_array() || r.size() != 3)
      throw ParseError(msg(path, ": split_ratios must hold three numbers"));
    for (std::size_t i = 0; i < 3; ++i) meta.split_ratios[i] = r[i].get<double>();
  }
  if (j.contains("split_seed")) meta.split_seed = j.at("split_seed").get<std::uint64_t>();
  if (j.contains("windows"))
    meta.windows = window_params_from_json(j.at("windows"), path + ":windows");
  return meta;
}

}  // namespace

void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const std::vector<std::pair<std::string, Var>>& params) {
  Json header = meta_to_json(meta);
  Json index = Json::array();
  for (const auto& [name, v] : params) {
    Json entry;
    entry["name"] = name;
    entry["shape"] = v.shape();
    index.push_back(std::move(entry));
  }
  header["tensors"] = std::move(index);
  const std::string header_bytes = header.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError(msg("cannot write checkpoint ", path));
  os.write(kCheckpointMagic, 8);
  write_u32(os, kCheckpointVersion);
  write_u64(os, header_bytes.size());
  os.write(header_bytes.data(), static_cast<std::streamsize>(header_bytes.size()));
  for (const auto& [name, v] : params) {
    const Tensor& t = v.value();
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(sizeof(Scalar) * t.numel()));
  }
  if (!os) throw IoError(msg("write failed for checkpoint ", path));
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(msg("cannot open checkpoint ", path));

  char magic[8];
  if (!is.read(magic, 8)) throw ParseError(msg(path, ": truncated checkpoint"));
  if (std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw ParseError(msg(path, ": not a checkpoint file (bad magic)"));
  const std::uint32_t version = read_u32(is, path);
  if (version != kCheckpointVersion)
    throw ParseError(msg(path, ": unsupported checkpoint version ", version, ", this build reads ",
                         kCheckpointVersion));
  const std::uint64_t header_len = read_u64(is, path);
  std::string header_bytes(header_len, '\0');
  if (!is.read(header_bytes.data(), static_cast<std::streamsize>(header_len)))
    throw ParseError(msg(path, ": truncated checkpoint header"));
  Json header;
  try {
    header = Json::parse(header_bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(msg(path, ": checkpoint header is not valid JSON: ", e.what()));
  }

  LoadedCheckpoint out;
  out.meta = meta_from_json(header, path);
  if (!header.contains("tensors") || !header.at("tensors").is_array())
    throw ParseError(msg(path, ": header lacks the tensor index"));
  for (const Json& entry : header.at("tensors")) {
    if (!entry.is_object() || !entry.contains("name") || !entry.contains("shape"))
      throw ParseError(msg(path, ": malformed tensor index entry"));
    const std::string name = entry.at("name").get<std::string>();
    Shape shape;
    for (const Json& d : entry.at("shape")) shape.push_back(d.get<std::int64_t>());
    Tensor t(shape);
    if (!is.read(reinterpret_cast<char*>(t.data()),
                 static_cast<std::streamsize>(sizeof(Scalar) * t.numel())))
      throw ParseError(msg(path, ": truncated payload for tensor ", name));
    out.tensors.emplace_back(name, std::move(t));
  }
  if (is.peek() != std::ifstream::traits_type::eof())
    throw ParseError(msg(path, ": trailing bytes after the last tensor"));
  return out;
}

std::unique_ptr<IntentModel> model_from_checkpoint(const LoadedCheckpoint& ckpt) {
  auto model = std::make_unique<IntentModel>(ckpt.meta.model, ckpt.meta.seed);
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : ckpt.tensors) {
    if (!by_name.emplace(name, &t).second)
      throw ParseError(msg("checkpoint stores tensor ", name, " twice"));
  }
  auto params = model->named_parameters();
  for (auto& [name, v] : params) {
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw ParseError(msg("checkpoint lacks tensor ", name));
    if (!(it->second->shape() == v.shape()))
      throw ParseError(msg("checkpoint tensor ", name, " has shape ", shape_str(it->second->shape()),
                           ", model expects ", shape_str(v.shape())));
    v.mutable_value() = *it->second;
    by_name.erase(it);
  }
  if (!by_name.empty())
    throw ParseError(msg("checkpoint holds ", by_name.size(),
                         " tensors the model does not have, first: ", by_name.begin()->first));
  return model;
}

}  // namespace intent
