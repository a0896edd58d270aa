#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "sili/nn.hpp"

namespace sili::checkpoint {

inline constexpr int kBundleLayoutVersion = 1;
inline constexpr const char* kBundleLayout = "z0|z1,pe1,cs1|z2,pe2,cs2|z3,pe3,cs3|z4,pe4,cs4";

/// Everything a loader needs to validate compatibility. `config_json` holds
/// the full run configuration so a checkpoint is self-describing.
struct Manifest {
  std::string config_json;
  uint64_t config_hash = 0;
  int epoch = -1;
  double best_val_f1 = 0.0;
  int bundle_layout_version = kBundleLayoutVersion;
  std::string bundle_layout = kBundleLayout;
};

/// FNV-1a over a canonical JSON string.
uint64_t hash_string(const std::string& s);

/// Writes parameters, buffers and (optionally) optimizer velocity as named
/// double arrays. Entry order is deterministic, so save -> load -> save
/// produces byte-identical files.
void save(const std::filesystem::path& path, const nn::ParamStore& store, const nn::Sgd* opt,
          const Manifest& manifest);

/// Loads into an already-constructed store; every stored entry must match an
/// existing parameter/buffer by name and shape.
Manifest load(const std::filesystem::path& path, nn::ParamStore& store, nn::Sgd* opt);

/// Reads only the manifest.
Manifest peek(const std::filesystem::path& path);

/// Loads only the entries whose name starts with `prefix` (parameters and
/// buffers), skipping everything else. Used to seed a backbone from an
/// externally supplied checkpoint. Returns the number of entries applied.
int load_prefix(const std::filesystem::path& path, nn::ParamStore& store,
                const std::string& prefix);

}  // namespace sili::checkpoint
