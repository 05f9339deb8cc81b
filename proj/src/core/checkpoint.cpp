#include "core/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "core/wire.hpp"
#include "json.hpp"

namespace mc {
namespace {

using wire::put_f64;
using wire::put_u32;
using wire::put_u64;

constexpr char kMagic[4] = {'M', 'C', 'K', 'P'};

nlohmann::json header_json(const Checkpoint& ckpt) {
  Config flat;
  ckpt.model.write_to(flat);
  nlohmann::json model;
  for (const auto& key : flat.keys()) model[key] = flat.get_str(key);
  return nlohmann::json{{"model", model},
                        {"vocab", ckpt.vocab_tokens},
                        {"seed", ckpt.seed},
                        {"epoch", ckpt.epoch},
                        {"step", ckpt.step},
                        {"extra", ckpt.extra}};
}

void parse_header(const std::string& text, Checkpoint& ckpt, const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw data_error("corrupt checkpoint header in " + path + ": " + e.what());
  }
  try {
    Config flat;
    for (const auto& [key, value] : j.at("model").items())
      flat.set(key, value.get<std::string>());
    ckpt.model = ModelConfig::from_config(flat);
    ckpt.vocab_tokens = j.at("vocab").get<std::vector<std::string>>();
    ckpt.seed = j.at("seed").get<uint64_t>();
    ckpt.epoch = j.at("epoch").get<int64_t>();
    ckpt.step = j.at("step").get<int64_t>();
    ckpt.extra = j.at("extra").get<std::map<std::string, std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw data_error("checkpoint header missing fields in " + path + ": " + e.what());
  }
}

}  // namespace

const Checkpoint::Blob* Checkpoint::find(const std::string& name) const {
  for (const auto& blob : blobs)
    if (blob.name == name) return &blob;
  return nullptr;
}

Checkpoint checkpoint_from_model(const Model& model, int64_t epoch, int64_t step) {
  Checkpoint ckpt;
  ckpt.model = model.config();
  for (const auto& tok : model.vocab().real_tokens()) ckpt.vocab_tokens.push_back(tok);
  ckpt.seed = model.seed();
  ckpt.epoch = epoch;
  ckpt.step = step;
  for (const auto& p : model.parameters()) {
    auto view = p.tensor.data();
    ckpt.blobs.push_back({p.name, {view.begin(), view.end()}});
  }
  return ckpt;
}

void load_parameters(const Checkpoint& ckpt, Model& model) {
  for (auto& p : model.parameters()) {
    const auto* blob = ckpt.find(p.name);
    if (blob == nullptr)
      throw data_error("checkpoint is missing parameter: " + p.name);
    if (static_cast<int64_t>(blob->values.size()) != p.tensor.numel())
      throw data_error("checkpoint parameter " + p.name + " holds " +
                       std::to_string(blob->values.size()) + " values, expected " +
                       std::to_string(p.tensor.numel()));
    auto dst = p.tensor.mutable_data();
    std::copy(blob->values.begin(), blob->values.end(), dst.begin());
  }
}

Model model_from_checkpoint(const Checkpoint& ckpt) {
  Model model(ckpt.model, Vocabulary::from_tokens(ckpt.vocab_tokens), ckpt.seed);
  load_parameters(ckpt, model);
  return model;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::string out;
  out.append(kMagic, sizeof(kMagic));
  put_u32(out, Checkpoint::kFormatVersion);

  const std::string header = header_json(ckpt).dump();
  put_u64(out, header.size());
  out += header;

  put_u32(out, static_cast<uint32_t>(ckpt.blobs.size()));
  for (const auto& blob : ckpt.blobs) {
    put_u64(out, blob.name.size());
    out += blob.name;
    put_u64(out, blob.values.size());
    for (double v : blob.values) put_f64(out, v);
  }

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw io_error("cannot write checkpoint: " + path);
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw io_error("short write on checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw io_error("cannot read checkpoint: " + path);
  std::string buf((std::istreambuf_iterator<char>(file)),
                  std::istreambuf_iterator<char>());

  wire::Reader r(buf, "checkpoint " + path);
  if (r.bytes(4) != std::string(kMagic, sizeof(kMagic)))
    throw data_error("not a checkpoint file: " + path);
  const uint32_t version = r.u32();
  if (version != Checkpoint::kFormatVersion)
    throw data_error("unsupported checkpoint version " + std::to_string(version) +
                     " in " + path + " (expected " +
                     std::to_string(Checkpoint::kFormatVersion) + ")");

  Checkpoint ckpt;
  parse_header(r.bytes(r.u64()), ckpt, path);

  const uint32_t n_blobs = r.u32();
  ckpt.blobs.reserve(n_blobs);
  for (uint32_t i = 0; i < n_blobs; ++i) {
    Checkpoint::Blob blob;
    blob.name = r.bytes(r.u64());
    const uint64_t n = r.u64();
    blob.values.reserve(n);
    for (uint64_t k = 0; k < n; ++k) blob.values.push_back(r.f64());
    ckpt.blobs.push_back(std::move(blob));
  }
  if (!r.exhausted())
    throw data_error("trailing bytes in checkpoint " + path);
  return ckpt;
}

Checkpoint average_checkpoints(const std::vector<Checkpoint>& ckpts) {
  MC_CHECK(!ckpts.empty(), "need at least one checkpoint to average");
  Checkpoint out = ckpts.back();
  out.blobs.clear();

  const Checkpoint& first = ckpts.front();
  const double n = static_cast<double>(ckpts.size());
  for (const auto& blob : first.blobs) {
    if (blob.name.rfind("opt.", 0) == 0) continue;
    Checkpoint::Blob avg{blob.name, blob.values};
    for (size_t j = 1; j < ckpts.size(); ++j) {
      const auto* other = ckpts[j].find(blob.name);
      if (other == nullptr)
        throw data_error("checkpoint " + std::to_string(j) +
                         " is missing parameter: " + blob.name);
      if (other->values.size() != blob.values.size())
        throw data_error("checkpoint parameter size mismatch for " + blob.name);
    }
    for (size_t i = 0; i < avg.values.size(); ++i) {
      double delta_sum = 0.0;
      for (size_t j = 1; j < ckpts.size(); ++j)
        delta_sum += ckpts[j].find(blob.name)->values[i] - blob.values[i];
      avg.values[i] = blob.values[i] + delta_sum / n;
    }
    out.blobs.push_back(std::move(avg));
  }
  out.extra["averaged_over"] = std::to_string(ckpts.size());
  return out;
}

}  // namespace mc
