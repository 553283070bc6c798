#include "ganomaly/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "ganomaly/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ganomaly {

namespace {

static_assert(std::endian::native == std::endian::little,
              "tensor containers are written little-endian verbatim");

// CRC32 (IEEE 802.3, reflected, poly 0xEDB88320), table built once.
uint32_t crc32(const uint8_t* data, size_t len) {
  static const auto table = [] {
    std::array<uint32_t, 256> t{};
    for (uint32_t i = 0; i < 256; ++i) {
      uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  uint32_t c = 0xFFFFFFFFu;
  for (size_t i = 0; i < len; ++i) c = table[(c ^ data[i]) & 0xFFu] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

constexpr char kMagic[4] = {'G', 'T', 'N', 'S'};
constexpr uint32_t kContainerVersion = 1;

template <typename T>
void append_pod(std::string& buf, const T& v) {
  buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

void write_container(const std::string& path, const std::vector<nn::StateRef<float>>& tensors) {
  std::string payload;
  append_pod(payload, kContainerVersion);
  append_pod(payload, static_cast<uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    append_pod(payload, static_cast<uint32_t>(t.name.size()));
    payload.append(t.name);
    payload.push_back(0);  // dtype 0 = float32
    payload.push_back(static_cast<char>(t.value->ndim()));
    for (int64_t d = 0; d < t.value->ndim(); ++d) append_pod(payload, t.value->dim(d));
    payload.append(reinterpret_cast<const char*>(t.value->data()),
                   static_cast<size_t>(t.value->numel()) * sizeof(float));
  }
  const uint32_t crc = crc32(reinterpret_cast<const uint8_t*>(payload.data()), payload.size());

  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + tmp);
    f.write(kMagic, 4);
    f.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    f.write(reinterpret_cast<const char*>(&crc), sizeof(crc));
    if (!f) throw IoError("short write to " + tmp);
  }
  fs::rename(tmp, path);
}

struct ReadCursor {
  const uint8_t* p;
  size_t left;
  std::string origin;

  void take(void* out, size_t n) {
    if (n > left) throw FormatError("truncated tensor container: " + origin);
    std::memcpy(out, p, n);
    p += n;
    left -= n;
  }
  template <typename T>
  T pod() {
    T v;
    take(&v, sizeof(T));
    return v;
  }
};

void read_container(const std::string& path, std::vector<nn::StateRef<float>> tensors) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < 4 + sizeof(uint32_t) || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw FormatError("bad magic in " + path);

  const size_t payload_len = bytes.size() - 4 - sizeof(uint32_t);
  uint32_t stored_crc;
  std::memcpy(&stored_crc, bytes.data() + 4 + payload_len, sizeof(stored_crc));
  const uint32_t actual =
      crc32(reinterpret_cast<const uint8_t*>(bytes.data()) + 4, payload_len);
  if (actual != stored_crc) {
    throw FormatError("checksum mismatch in " + path + " (file is corrupt)");
  }

  ReadCursor cur{reinterpret_cast<const uint8_t*>(bytes.data()) + 4, payload_len, path};
  const uint32_t version = cur.pod<uint32_t>();
  if (version != kContainerVersion)
    throw ConfigError("unsupported tensor container version " + std::to_string(version) + " in " +
                      path);
  const uint32_t count = cur.pod<uint32_t>();

  std::map<std::string, nn::StateRef<float>*> want;
  for (auto& t : tensors) want[t.name] = &t;

  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = cur.pod<uint32_t>();
    std::string name(name_len, '\0');
    cur.take(name.data(), name_len);
    const uint8_t dtype = cur.pod<uint8_t>();
    if (dtype != 0) throw FormatError("unknown dtype in " + path + " for tensor " + name);
    const uint8_t ndim = cur.pod<uint8_t>();
    std::vector<int64_t> shape(ndim);
    int64_t numel = 1;
    for (uint8_t d = 0; d < ndim; ++d) {
      shape[d] = cur.pod<int64_t>();
      numel *= shape[d];
    }
    auto it = want.find(name);
    if (it == want.end()) throw FormatError("unexpected tensor '" + name + "' in " + path);
    if (it->second->value->shape() != shape) {
      throw FormatError("tensor '" + name + "' in " + path + " has shape " +
                        Tensor<float>::shape_str(shape) + ", expected " +
                        Tensor<float>::shape_str(it->second->value->shape()));
    }
    cur.take(it->second->value->data(), static_cast<size_t>(numel) * sizeof(float));
    want.erase(it);
  }
  if (!want.empty())
    throw FormatError("tensor '" + want.begin()->first + "' missing from " + path);
}

const char* kNetworks[] = {"gen_encoder", "gen_decoder", "encoder", "discriminator"};

json train_config_to_json(const TrainConfig& cfg) {
  return json{{"epochs", cfg.epochs},
              {"batch_size", cfg.batch_size},
              {"learning_rate", cfg.learning_rate},
              {"beta1", cfg.beta1},
              {"beta2", cfg.beta2},
              {"w_adv", cfg.weights.adv},
              {"w_con", cfg.weights.con},
              {"w_enc", cfg.weights.enc},
              {"seed", cfg.seed},
              {"squared_latent_norms", cfg.squared_latent_norms},
              {"reinit_d_threshold", cfg.reinit_d_threshold},
              {"checkpoint_every", cfg.checkpoint_every}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig cfg;
  cfg.epochs = j.at("epochs").get<int64_t>();
  cfg.batch_size = j.at("batch_size").get<int64_t>();
  cfg.learning_rate = j.at("learning_rate").get<double>();
  cfg.beta1 = j.at("beta1").get<double>();
  cfg.beta2 = j.at("beta2").get<double>();
  cfg.weights.adv = j.at("w_adv").get<double>();
  cfg.weights.con = j.at("w_con").get<double>();
  cfg.weights.enc = j.at("w_enc").get<double>();
  cfg.seed = j.at("seed").get<uint64_t>();
  cfg.squared_latent_norms = j.at("squared_latent_norms").get<bool>();
  cfg.reinit_d_threshold = j.at("reinit_d_threshold").get<double>();
  cfg.checkpoint_every = j.at("checkpoint_every").get<int64_t>();
  return cfg;
}

json load_manifest(const std::string& dir) {
  const std::string path = dir + "/manifest.json";
  std::ifstream f(path);
  if (!f) throw IoError("cannot open checkpoint manifest " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw FormatError("bad checkpoint manifest " + path + ": " + e.what());
  }
  const int version = j.value("format_version", -1);
  if (version != kCheckpointFormatVersion) {
    throw ConfigError("unsupported checkpoint format_version " + std::to_string(version) +
                      " (this build reads version " + std::to_string(kCheckpointFormatVersion) +
                      ")");
  }
  return j;
}

}  // namespace

void save_checkpoint(const std::string& dir, ModelBundle<float>& bundle, Adam<float>* gen_opt,
                     Adam<float>* disc_opt, int64_t epoch, const TrainConfig& cfg) {
  io::make_dirs(dir);

  json manifest{{"format_version", kCheckpointFormatVersion},
                {"epoch", epoch},
                {"arch",
                 {{"input_size", bundle.arch.input_size},
                  {"channels", bundle.arch.channels},
                  {"latent_dim", bundle.arch.latent_dim},
                  {"base_width", bundle.arch.base_width}}},
                {"train", train_config_to_json(cfg)},
                {"has_optimizer", gen_opt != nullptr && disc_opt != nullptr}};
  if (gen_opt && disc_opt) {
    manifest["gen_steps"] = gen_opt->step_count();
    manifest["disc_steps"] = disc_opt->step_count();
  }
  io::write_text_file(dir + "/manifest.json", manifest.dump(2) + "\n");

  for (const char* net : kNetworks)
    write_container(dir + "/" + net + ".tensors", bundle.network_state(net));

  if (gen_opt && disc_opt) {
    std::vector<nn::StateRef<float>> moments;
    for (auto& s : gen_opt->moment_state()) moments.push_back({"gen." + s.name, s.value});
    for (auto& s : disc_opt->moment_state()) moments.push_back({"disc." + s.name, s.value});
    write_container(dir + "/optimizer.tensors", moments);
  }
}

LoadedCheckpoint load_checkpoint(const std::string& dir) {
  const json manifest = load_manifest(dir);

  ArchConfig arch;
  const json& a = manifest.at("arch");
  arch.input_size = a.at("input_size").get<int64_t>();
  arch.channels = a.at("channels").get<int64_t>();
  arch.latent_dim = a.at("latent_dim").get<int64_t>();
  arch.base_width = a.at("base_width").get<int64_t>();

  LoadedCheckpoint out;
  out.cfg = train_config_from_json(manifest.at("train"));
  out.epoch = manifest.at("epoch").get<int64_t>();
  // Seed irrelevant here: every tensor gets overwritten from disk.
  out.bundle = build_models<float>(arch, 0);
  for (const char* net : kNetworks)
    read_container(dir + "/" + net + ".tensors", out.bundle.network_state(net));
  return out;
}

void restore_optimizers(const std::string& dir, Adam<float>& gen_opt, Adam<float>& disc_opt) {
  const json manifest = load_manifest(dir);
  if (!manifest.value("has_optimizer", false))
    throw FormatError("checkpoint " + dir + " carries no optimizer state");

  std::vector<nn::StateRef<float>> moments;
  for (auto& s : gen_opt.moment_state()) moments.push_back({"gen." + s.name, s.value});
  for (auto& s : disc_opt.moment_state()) moments.push_back({"disc." + s.name, s.value});
  read_container(dir + "/optimizer.tensors", std::move(moments));

  gen_opt.set_step_count(manifest.at("gen_steps").get<int64_t>());
  disc_opt.set_step_count(manifest.at("disc_steps").get<int64_t>());
}

}  // namespace ganomaly
