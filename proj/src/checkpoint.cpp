#include "sili/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "json.hpp"

namespace sili::checkpoint {

namespace {

constexpr char kMagic[8] = {'S', 'I', 'L', 'I', 'C', 'K', 'P', 'T'};
constexpr uint32_t kFormatVersion = 1;

enum class EntryKind : uint8_t { param = 0, buffer = 1, velocity = 2 };

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

void write_entry(std::ostream& out, const std::string& name, EntryKind kind, const Tensor& t) {
  write_pod(out, static_cast<uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_pod(out, static_cast<uint8_t>(kind));
  write_pod(out, static_cast<uint32_t>(t.ndim()));
  for (int d = 0; d < t.ndim(); ++d) write_pod(out, t.dim(d));
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(double)));
}

std::string manifest_to_json(const Manifest& m) {
  nlohmann::json j;
  j["config_json"] = m.config_json;
  j["config_hash"] = m.config_hash;
  j["epoch"] = m.epoch;
  j["best_val_f1"] = m.best_val_f1;
  j["bundle_layout_version"] = m.bundle_layout_version;
  j["bundle_layout"] = m.bundle_layout;
  return j.dump();
}

Manifest manifest_from_json(const std::string& s) {
  const nlohmann::json j = nlohmann::json::parse(s);
  Manifest m;
  m.config_json = j.at("config_json").get<std::string>();
  m.config_hash = j.at("config_hash").get<uint64_t>();
  m.epoch = j.at("epoch").get<int>();
  m.best_val_f1 = j.at("best_val_f1").get<double>();
  m.bundle_layout_version = j.at("bundle_layout_version").get<int>();
  m.bundle_layout = j.at("bundle_layout").get<std::string>();
  return m;
}

}  // namespace

uint64_t hash_string(const std::string& s) {
  uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

void save(const std::filesystem::path& path, const nn::ParamStore& store, const nn::Sgd* opt,
          const Manifest& manifest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot create " + path.string());
  out.write(kMagic, sizeof kMagic);
  write_pod(out, kFormatVersion);
  const std::string mjson = manifest_to_json(manifest);
  write_pod(out, static_cast<uint64_t>(mjson.size()));
  out.write(mjson.data(), static_cast<std::streamsize>(mjson.size()));

  uint64_t count = store.params().size() + store.buffers().size() + (opt ? opt->velocity.size() : 0);
  write_pod(out, count);
  for (const auto& [name, var] : store.params())
    write_entry(out, name, EntryKind::param, var.value());
  for (const auto& [name, tensor] : store.buffers())
    write_entry(out, name, EntryKind::buffer, tensor);
  if (opt)
    for (const auto& [name, tensor] : opt->velocity)
      write_entry(out, name, EntryKind::velocity, tensor);
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

Manifest load(const std::filesystem::path& path, nn::ParamStore& store, nn::Sgd* opt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path.string());
  const auto version = read_pod<uint32_t>(in);
  if (version != kFormatVersion)
    throw std::runtime_error("checkpoint: unsupported format version");
  const auto mlen = read_pod<uint64_t>(in);
  std::string mjson(mlen, '\0');
  in.read(mjson.data(), static_cast<std::streamsize>(mlen));
  Manifest manifest = manifest_from_json(mjson);

  const auto count = read_pod<uint64_t>(in);
  for (uint64_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto kind = static_cast<EntryKind>(read_pod<uint8_t>(in));
    const auto ndim = read_pod<uint32_t>(in);
    std::vector<int64_t> shape(ndim);
    for (auto& d : shape) d = read_pod<int64_t>(in);
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint: truncated file " + path.string());

    if (kind == EntryKind::param) {
      ad::Var* var = store.find_param(name);
      if (!var) throw std::runtime_error("checkpoint: unknown parameter '" + name + "'");
      if (!var->value().same_shape(t))
        throw std::runtime_error("checkpoint: shape mismatch for '" + name + "' (stored " +
                                 t.shape_str() + ", model " + var->value().shape_str() + ")");
      var->mutable_value() = std::move(t);
    } else if (kind == EntryKind::buffer) {
      auto it = store.buffers().find(name);
      if (it == store.buffers().end())
        throw std::runtime_error("checkpoint: unknown buffer '" + name + "'");
      if (!it->second.same_shape(t))
        throw std::runtime_error("checkpoint: shape mismatch for buffer '" + name + "'");
      it->second = std::move(t);
    } else {
      if (opt) opt->velocity[name] = std::move(t);
    }
  }
  return manifest;
}

int load_prefix(const std::filesystem::path& path, nn::ParamStore& store,
                const std::string& prefix) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path.string());
  read_pod<uint32_t>(in);
  const auto mlen = read_pod<uint64_t>(in);
  in.seekg(static_cast<std::streamoff>(mlen), std::ios::cur);
  const auto count = read_pod<uint64_t>(in);
  int applied = 0;
  for (uint64_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto kind = static_cast<EntryKind>(read_pod<uint8_t>(in));
    const auto ndim = read_pod<uint32_t>(in);
    std::vector<int64_t> shape(ndim);
    for (auto& d : shape) d = read_pod<int64_t>(in);
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint: truncated file " + path.string());
    if (name.rfind(prefix, 0) != 0) continue;
    if (kind == EntryKind::param) {
      ad::Var* var = store.find_param(name);
      if (!var || !var->value().same_shape(t))
        throw std::runtime_error("checkpoint: backbone entry '" + name +
                                 "' does not fit this model");
      var->mutable_value() = std::move(t);
      ++applied;
    } else if (kind == EntryKind::buffer) {
      auto it = store.buffers().find(name);
      if (it == store.buffers().end() || !it->second.same_shape(t))
        throw std::runtime_error("checkpoint: backbone buffer '" + name +
                                 "' does not fit this model");
      it->second = std::move(t);
      ++applied;
    }
  }
  if (applied == 0)
    throw std::runtime_error("checkpoint: no entries under prefix '" + prefix + "' in " +
                             path.string());
  return applied;
}

Manifest peek(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path.string());
  read_pod<uint32_t>(in);
  const auto mlen = read_pod<uint64_t>(in);
  std::string mjson(mlen, '\0');
  in.read(mjson.data(), static_cast<std::streamsize>(mlen));
  if (!in) throw std::runtime_error("checkpoint: truncated manifest in " + path.string());
  return manifest_from_json(mjson);
}

}  // namespace sili::checkpoint
