#pragma once

// Versioned parameter container: magic, version, JSON header, then float32 little-endian
// tensor payloads in header order.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

namespace dng {

using json = nlohmann::json;

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    std::string kind;   // "coarse", "renderer", ...
    json config;        // model configuration needed to rebuild the modules
    json descriptor;    // descriptor layout the parameters were trained with
    std::vector<std::pair<std::string, torch::Tensor>> tensors;

    void add(const std::string& name, const torch::Tensor& t) { tensors.emplace_back(name, t); }
    /// Throws SchemaMismatch when missing.
    const torch::Tensor& get(std::string_view name) const;
    bool has(std::string_view name) const;
};

std::uint64_t fnv1a64(std::string_view bytes);
/// Hash of the canonical (sorted-key) dump of `value`, as 16 hex digits.
std::string json_hash(const json& value);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws ConfigError when the file is missing, SchemaMismatch on a bad magic, version or layout.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Throws SchemaMismatch naming the first differing field when the descriptor layouts differ.
void require_same_descriptor(const json& stored, const json& expected);

/// Adds every parameter and buffer of `module` as "<prefix>.<name>".
void add_module(Checkpoint& ckpt, const std::string& prefix, const torch::nn::Module& module);
/// Copies tensors saved by add_module into `module`. Throws SchemaMismatch on a missing name
/// or shape difference.
void load_module(const Checkpoint& ckpt, const std::string& prefix, torch::nn::Module& module);

}  // namespace dng
